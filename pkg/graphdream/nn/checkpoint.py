"""
Checkpoints - Versioned parameter files
"""

from pathlib import Path
from typing import Any, Dict, Mapping

import torch

from graphdream.exceptions import CheckpointError
from graphdream.nn.core import ParamStore

FORMAT_VERSION = 1


def save_checkpoint(path: Path, kind: str, stores: Mapping[str, ParamStore],
                    meta: Mapping[str, Any]) -> Path:
    """
    Write named parameter groups plus JSON-safe metadata (model dims, rule count)
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "meta": dict(meta),
        "params": {group: store.state_dict() for group, store in stores.items()},
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path: Path, kind: str) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if not isinstance(payload, dict) or payload.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"checkpoint {path}: unknown format version")
    if payload.get("kind") != kind:
        raise CheckpointError(f"checkpoint {path} holds a {payload.get('kind')!r}, expected {kind!r}")
    return payload
