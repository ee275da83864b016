"""
Seeding Utility - Named sub-seeds derived from one global seed
"""

import hashlib

import numpy as np
import torch


def sub_seed(seed: int, name: str) -> int:
    """Stable 63-bit seed for a named consumer (env, wm, controller, ...)"""
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big") & ((1 << 63) - 1)


def make_rng(seed: int, name: str) -> np.random.Generator:
    """numpy Generator for a named consumer"""
    return np.random.default_rng(sub_seed(seed, name))


def make_torch_generator(seed: int, name: str) -> torch.Generator:
    """torch Generator for a named consumer (parameter initialization)"""
    generator = torch.Generator()
    generator.manual_seed(sub_seed(seed, name))
    return generator
