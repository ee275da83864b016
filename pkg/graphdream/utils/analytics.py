"""
Analytics Utility - Summary statistics and stable CSV output for run results
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence

import numpy as np
import pandas as pd

# 95% normal quantile
Z_95 = 1.959963984540054
FLOAT_FORMAT = "%.10g"


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float
    ci95: float
    count: int

    def as_dict(self, prefix: str = "") -> Dict[str, float]:
        return {
            f"{prefix}mean": self.mean,
            f"{prefix}std": self.std,
            f"{prefix}ci95": self.ci95,
        }


def summarize(values: Iterable[float]) -> Summary:
    """Mean, sample std and half-width of a normal 95% interval; empty input gives zeros"""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        return Summary(0.0, 0.0, 0.0, 0)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return Summary(float(arr.mean()), std, Z_95 * std / np.sqrt(arr.size), int(arr.size))


def reduction_pct(initial: float, final: float) -> float:
    """Relative cost reduction in percent"""
    if initial == 0:
        return 0.0
    return 100.0 * (initial - final) / initial


def min_max_normalize(values: Sequence[float]) -> List[float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return []
    span = arr.max() - arr.min()
    if span == 0:
        return [0.0] * int(arr.size)
    return list((arr - arr.min()) / span)


def write_csv(rows: Sequence[Mapping[str, Any]], path: Path, columns: Sequence[str] = None) -> Path:
    """Write rows with a fixed float format so reruns give byte-identical files"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=list(columns) if columns else None)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path)
