"""Polynomial annihilation (high order total variation) operators.

``L^m`` is the ``(n-m) x n`` banded matrix whose rows carry the binomial
stencil ``c_j = (-1)**(m-j) * C(m, j)``, ``j = 0..m``, divided by

    q_m = | sum_{j >= floor(m/2)+1} c_j |

so that a unit step gives a response of magnitude one in the row whose stencil
is split at its centre.  ``L^0`` is the identity and ``L^1`` the forward
difference ``g[j+1] - g[j]``; ``L^3`` has rows ``(-1/2, 3/2, -3/2, 1/2)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy import sparse

__all__ = ["PATransform", "build", "apply_1d", "apply_2d", "adjoint_apply", "pa_stencil"]


def pa_stencil(m: int) -> np.ndarray:
    if m < 0:
        raise ValueError(f"PA order must be >= 0, got {m}")
    c = np.array([(-1) ** (m - j) * comb(m, j) for j in range(m + 1)], dtype=float)
    if m == 0:
        return c
    q = abs(c[m // 2 + 1:].sum())
    return c / q


def _axis_slices(ndim, axis, start, stop):
    sl = [slice(None)] * ndim
    sl[axis] = slice(start, stop)
    return tuple(sl)


@dataclass(frozen=True)
class PATransform:
    """Order-``m`` PA operator on ``n`` points."""

    m: int
    n: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 0:
            raise ValueError(f"PA order must be a non-negative integer, got {self.m!r}")
        if self.m >= self.n:
            raise ValueError(f"PA order {self.m} needs more than {self.n} points")

    @property
    def stencil(self) -> np.ndarray:
        return pa_stencil(self.m)

    @property
    def n_out(self) -> int:
        return self.n - self.m

    @property
    def shape(self) -> tuple:
        return (self.n - self.m, self.n)

    def matrix(self, absolute: bool = False) -> sparse.csr_matrix:
        c = np.abs(self.stencil) if absolute else self.stencil
        return sparse.diags(list(c), list(range(self.m + 1)), shape=self.shape, format="csr")

    def apply(self, g, axis: int = 0, absolute: bool = False) -> np.ndarray:
        """``L^m`` along ``axis`` (output length ``n - m`` on that axis)."""
        g = np.asarray(g)
        if g.shape[axis] != self.n:
            raise ValueError(f"axis {axis} has length {g.shape[axis]}, expected {self.n}")
        c = np.abs(self.stencil) if absolute else self.stencil
        k = self.n_out
        out = c[0] * g[_axis_slices(g.ndim, axis, 0, k)]
        for j in range(1, self.m + 1):
            out = out + c[j] * g[_axis_slices(g.ndim, axis, j, j + k)]
        return out

    def adjoint(self, v, axis: int = 0) -> np.ndarray:
        """``(L^m)^T`` along ``axis``."""
        v = np.asarray(v)
        if v.shape[axis] != self.n_out:
            raise ValueError(f"axis {axis} has length {v.shape[axis]}, expected {self.n_out}")
        shape = list(v.shape)
        shape[axis] = self.n
        out = np.zeros(shape, dtype=np.result_type(v, float))
        k = self.n_out
        for j, cj in enumerate(self.stencil):
            out[_axis_slices(v.ndim, axis, j, j + k)] += cj * v
        return out

    def gram_diagonal(self) -> np.ndarray:
        """Diagonal of ``(L^m)^T L^m``."""
        return np.asarray(self.matrix().power(2).sum(axis=0)).ravel()


def build(m: int, n: int) -> PATransform:
    return PATransform(m, n)


def apply_1d(L: PATransform, g) -> np.ndarray:
    g = np.asarray(g)
    if g.ndim != 1:
        raise ValueError("apply_1d expects a vector")
    return L.apply(g)


_AXES = {"rows": 0, "cols": 1, "x": 0, "y": 1, 0: 0, 1: 1}


def apply_2d(L: PATransform, g, axis="rows") -> np.ndarray:
    """``L^m g`` (``axis="rows"``, acting down each column) or ``g (L^m)^T`` (``"cols"``)."""
    g = np.asarray(g)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"apply_2d expects a square image, got shape {g.shape}")
    try:
        ax = _AXES[axis]
    except KeyError:
        raise ValueError(f"axis must be 'rows' or 'cols', got {axis!r}") from None
    return L.apply(g, axis=ax)


def adjoint_apply(L: PATransform, v, axis=0) -> np.ndarray:
    return L.adjoint(v, axis=_AXES.get(axis, axis))
