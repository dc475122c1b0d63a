"""Error measures and stage timing."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ErrorReport",
    "relative_error",
    "pointwise_error",
    "jump_neighborhood_max",
    "jump_window",
    "time_stage",
    "error_report",
]


def _pair(f_star, f_true):
    a, b = np.asarray(f_star), np.asarray(f_true)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def relative_error(f_star, f_true) -> float:
    """``||f_star - f_true||_2 / ||f_true||_2``."""
    a, b = _pair(f_star, f_true)
    nb = np.linalg.norm(b)
    if nb == 0:
        raise ValueError("the reference has zero norm")
    return float(np.linalg.norm(a - b) / nb)


def pointwise_error(f_star, f_true) -> np.ndarray:
    a, b = _pair(f_star, f_true)
    return np.abs(a - b)


def jump_window(n: int, width: int = 5) -> int:
    """Window half-width scaled with resolution (``width`` cells at 257 points)."""
    return max(1, int(round(width * n / 257)))


def jump_neighborhood_max(f_star, f_true, jump_indices, width: int | None = None) -> float:
    """Largest pointwise error within ``width`` cells of any listed jump index (1D)."""
    err = pointwise_error(f_star, f_true)
    if err.ndim != 1:
        raise ValueError("jump windows are defined for 1D signals")
    n = err.size
    w = jump_window(n) if width is None else int(width)
    sel = np.zeros(n, dtype=bool)
    for j in np.atleast_1d(jump_indices):
        sel[max(0, j - w):min(n, j + w + 1)] = True
    if not sel.any():
        return 0.0
    return float(err[sel].max())


def time_stage(label, thunk):
    """Run ``thunk()`` and return ``(result, seconds)`` from a monotonic clock."""
    t0 = time.perf_counter()
    out = thunk()
    return out, time.perf_counter() - t0


@dataclass
class ErrorReport:
    relative_error: float
    pointwise: np.ndarray = field(repr=False)
    jump_neighborhood_max: float = float("nan")
    runtime_s: float = float("nan")

    def __post_init__(self):
        if self.relative_error < 0 or np.any(self.pointwise < 0):
            raise ValueError("errors must be non-negative")

    CSV_FIELDS = ("experiment", "method", "parameters", "relative_error", "jump_window_error", "seconds")

    def csv_row(self, experiment: str, method: str, parameters: str = "") -> dict:
        return {
            "experiment": experiment,
            "method": method,
            "parameters": parameters,
            "relative_error": self.relative_error,
            "jump_window_error": self.jump_neighborhood_max,
            "seconds": self.runtime_s,
        }


def error_report(f_star, f_true, jump_indices=None, runtime_s: float = float("nan"),
                 width: int | None = None) -> ErrorReport:
    pw = pointwise_error(f_star, f_true)
    jn = float("nan")
    if jump_indices is not None and pw.ndim == 1:
        jn = jump_neighborhood_max(f_star, f_true, jump_indices, width)
    return ErrorReport(relative_error(f_star, f_true), pw, jn, runtime_s)
