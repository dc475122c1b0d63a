"""Binary regularisation masks from binary edge maps.

A mask lives on the output space of ``L^m``: row ``j`` of ``L^m`` reads grid
points ``j..j+m``.  Any row whose stencil touches a flagged edge point is
switched off (mask 0) so the quadratic penalty never acts across a jump.

The default rule tests ``|L^m| y > tau`` with the absolute stencil, which is
exactly the stencil dilation of the edge set.  ``rule="signed"`` tests
``|L^m y| > tau`` instead; there, neighbouring edge points can cancel inside
a stencil and leave a row switched on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .edge_detection import BinaryEdgeMap
from .pa_transform import PATransform

__all__ = ["RegularizationMask", "build_mask_1d", "build_mask_2d", "ideal_edge_map_1d", "align_edges",
           "refine_edges"]

_RULES = ("dilate", "signed")


@dataclass(frozen=True, eq=False)
class RegularizationMask:
    """0/1 entries on the ``L^m`` output rows of one axis."""

    values: np.ndarray
    m: int
    tau: float
    axis: int = 0

    def __post_init__(self):
        v = np.asarray(self.values).astype(np.uint8)
        if np.any(v > 1):
            raise ValueError("mask entries must be 0 or 1")
        object.__setattr__(self, "values", v)

    @property
    def dims(self) -> int:
        return self.values.ndim

    @property
    def shape(self):
        return self.values.shape

    def zeros(self) -> int:
        return int(self.values.size - self.values.sum())


def _indicator(b):
    return np.asarray(getattr(b, "indicator", b), dtype=float)


def _mask(y, m, tau, axis, rule):
    if rule not in _RULES:
        raise ValueError(f"rule must be one of {_RULES}, got {rule!r}")
    if not tau >= 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    L = PATransform(m, y.shape[axis])
    resp = L.apply(y, axis=axis, absolute=(rule == "dilate"))
    return RegularizationMask(~(np.abs(resp) > tau), m, float(tau), axis)


def build_mask_1d(b, m: int, tau: float, rule: str = "dilate") -> RegularizationMask:
    """Mask of length ``n - m``; zero on rows whose stencil meets an edge.

    Parameters
    ----------
    b : BinaryEdgeMap or array of 0/1
    m : int
        PA order, ``1 <= m < n``.
    tau : float
        The edge threshold, reused for the stencil response.
    """
    y = _indicator(b)
    if y.ndim != 1:
        raise ValueError("build_mask_1d needs a 1D edge map")
    if m < 1:
        raise ValueError("mask construction needs m >= 1")
    return _mask(y, m, tau, 0, rule)


def build_mask_2d(bx, by, m: int, tau: float, rule: str = "dilate"):
    """``(M^x, M^y)`` of shapes ``(n-m, n)`` and ``(n, n-m)``.

    ``M^x`` follows ``L^m`` down the columns of the x-edge map (jumps as
    ``i`` varies); ``M^y`` follows ``(L^m)^T`` along the rows of the y-edge map.
    """
    x, y = _indicator(bx), _indicator(by)
    if x.ndim != 2 or x.shape != y.shape or x.shape[0] != x.shape[1]:
        raise ValueError(f"edge maps must be equal square images, got {x.shape} and {y.shape}")
    if m < 1:
        raise ValueError("mask construction needs m >= 1")
    return _mask(x, m, tau, 0, rule), _mask(y, m, tau, 1, rule)


_ALIGNMENTS = ("right_limit", "point", "refine")


def align_edges(b, axis: int = 0, alignment: str = "right_limit", ignore_seam: bool = True) -> BinaryEdgeMap:
    """Re-index a detected edge map before mask dilation.

    The detector places a jump at the grid point nearest to it.  Images are
    sampled with right-hand limits, so a jump sitting on ``x_j`` separates
    samples ``j-1`` and ``j``; with ``alignment="right_limit"`` each flag is
    moved to ``j-1``, the left sample of that pair, which is where
    :func:`build_mask_1d` expects it.  ``"point"`` keeps the flags where they
    are (``"refine"`` also does; see :func:`refine_edges` for its second
    step).

    The end points ``x = -1`` and ``x = 1`` are the same point of the
    periodic extension.  A jump there lies between the last and first sample
    and no PA stencil crosses it, so with ``ignore_seam`` flags on the two end
    samples are dropped.
    """
    if alignment not in _ALIGNMENTS:
        raise ValueError(f"alignment must be one of {_ALIGNMENTS}, got {alignment!r}")
    y = _indicator(b).astype(np.uint8)
    tau = getattr(b, "tau", 0.0)
    y = np.moveaxis(y, axis, 0).copy()
    if ignore_seam:
        y[0] = 0
        y[-1] = 0
    if alignment == "right_limit":
        y[:-1] = y[1:].copy()
        y[-1] = 0
    return BinaryEdgeMap(np.moveaxis(y, 0, axis), tau)


def refine_edges(b, image, axis: int = 0, split: float = 0.45) -> BinaryEdgeMap:
    """Move isolated edge flags off the sample that straddles the jump.

    ``image`` is a reconstruction made with the mask of the point-aligned map
    ``b``, so a flagged sample ``j`` is constrained by the data alone while
    ``j-1`` and ``j+1`` are tied to their own sides.  Its relative level

        t = (g[j] - g[j-1]) / (g[j+1] - g[j-1])

    tells on which side of the jump ``x_j`` lies: ``t >= split`` puts it on the
    right (the jump separates ``j-1`` and ``j``) and the flag moves to ``j-1``;
    otherwise the jump separates ``j`` and ``j+1`` and the flag moves to
    ``j+1``.  In both cases the dilated mask then frees exactly the rows that
    cross the jump and leaves every straddling sample tied to one side.  A jump
    sitting on a grid point gives ``t = 1/2`` and is resolved to the right,
    matching right-limit sampling.  Flags at the ends, flags with a flagged
    neighbour along ``axis`` and flags with ``g[j+1] == g[j-1]`` stay put.
    """
    y = np.moveaxis(_indicator(b).astype(np.uint8), axis, 0)
    g = np.moveaxis(np.real(np.asarray(image, dtype=complex)), axis, 0)
    if g.shape != y.shape:
        raise ValueError(f"image shape {g.shape} does not match edge map {y.shape}")
    out = y.copy()
    n = y.shape[0]
    inner = np.zeros_like(y, dtype=bool)
    inner[1:-1] = (y[1:-1] == 1) & (y[:-2] == 0) & (y[2:] == 0)
    idx = np.nonzero(inner)
    if idx[0].size:
        j = idx[0]
        rest = idx[1:]
        left, mid, right = g[(j - 1,) + rest], g[idx], g[(j + 1,) + rest]
        span = right - left
        ok = span != 0
        t = np.where(ok, (mid - left) / np.where(ok, span, 1.0), np.nan)
        move = ok & np.isfinite(t)
        dest = np.where(t >= split, j - 1, j + 1)
        out[tuple(x[move] for x in idx)] = 0
        out[(dest[move],) + tuple(x[move] for x in rest)] = 1
    return BinaryEdgeMap(np.moveaxis(out, 0, axis), getattr(b, "tau", 0.0))


def ideal_edge_map_1d(jumps, grid) -> BinaryEdgeMap:
    """Binary edge map of known jump locations.

    A jump at ``xi`` sits between grid points ``floor(xi*J)`` and the next
    one and is attributed to the nearer of the two (ties go right).  A jump
    at ``x = +-1`` (the periodic seam) flags both end points.
    """
    y = np.zeros(grid.n, dtype=np.uint8)
    J = grid.J
    for xi in jumps:
        xi = xi[0] if isinstance(xi, tuple) else xi
        if abs(abs(xi) - 1.0) < 1e-12:
            y[0] = y[-1] = 1
            continue
        j = int(np.floor(xi * J + 0.5))
        y[j + J] = 1
    return BinaryEdgeMap(y, 0.0)
