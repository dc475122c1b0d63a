"""Test functions and their continuous Fourier samples.

``F1`` and ``F2`` live on ``[-1, 1]``; ``F2`` is the classic Gelb-Tanner test
function on ``[-pi, pi]`` rescaled by ``x -> pi*x``.  ``F3`` is a radial 2D
function with a jump across the circle ``x**2 + y**2 = 1/2``.  The Shepp-Logan
phantom uses the high-contrast ("modified") ten-ellipse table.

Fourier samples are the continuous coefficients

    f_hat(lam) = 1/2 int_{-1}^{1} f(x) exp(-i pi lam x) dx

(prefactor 1/4 over the square in 2D).  They are computed by quadrature split
at the discontinuities, never by the discrete forward operator, so that
reconstructions see the genuine continuous/discrete model mismatch.

At a 1D breakpoint the evaluator returns the right-hand limit.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special

from .errors import NumericFailure
from .fourier_model import SpatialGrid
from .sampling import FourierData, FrequencySet, Provenance

__all__ = [
    "PhantomId",
    "Phantom",
    "FourierData",
    "F1",
    "F2",
    "F3",
    "SHEPP_LOGAN",
    "get_phantom",
    "piecewise_phantom",
    "evaluate",
    "rasterize",
    "continuous_fourier_samples",
    "shepp_logan",
    "SHEPP_LOGAN_ELLIPSES",
]


class PhantomId(str, Enum):
    F1 = "F1"
    F2 = "F2"
    F3 = "F3"
    SHEPP_LOGAN = "SHEPP_LOGAN"
    CUSTOM = "CUSTOM"


Piece = tuple  # (a, b, func) on [a, b)


@dataclass(frozen=True)
class Phantom:
    """A piecewise-smooth test function on ``[-1, 1]**dims``.

    1D phantoms carry ``pieces``: ``(a, b, func)`` triples covering
    ``[-1, 1]`` in order; ``func`` is evaluated on ``[a, b)`` (the last piece
    includes ``x = 1``).  2D phantoms carry a vectorised ``evaluator(x, y)``
    and a ``fourier(lambdas)`` routine.
    """

    id: str
    dims: int
    breakpoints: tuple
    pieces: tuple = ()
    evaluator: Callable | None = None
    fourier: Callable | None = field(default=None, repr=False)

    def __call__(self, *coords):
        return evaluate(self, *coords)

    def limits(self, x0: float) -> tuple:
        """One-sided limits ``(f(x0-), f(x0+))`` of a 1D phantom."""
        self._need_1d()
        eps = 1e-12
        return float(evaluate(self, x0 - eps)), float(evaluate(self, x0))

    def jumps(self, periodic: bool = False) -> list:
        """``[(location, f(x+) - f(x-)), ...]`` at interior breakpoints.

        With ``periodic=True`` the jump of the 2-periodic extension at
        ``x = 1 ~ -1`` is appended (reported at ``x = 1``) when nonzero.
        """
        self._need_1d()
        out = []
        for x0 in self.breakpoints:
            lo, hi = self.limits(x0)
            out.append((x0, hi - lo))
        if periodic:
            jump = float(evaluate(self, -1.0)) - float(evaluate(self, 1.0))
            if abs(jump) > 1e-14:
                out.append((1.0, jump))
        return out

    def _need_1d(self):
        if self.dims != 1:
            raise ValueError("only defined for 1D phantoms")


def piecewise_phantom(pieces, name: str = PhantomId.CUSTOM.value) -> Phantom:
    """Assemble a 1D phantom from ``(a, b, func)`` pieces covering ``[-1, 1]``."""
    pieces = tuple(sorted(pieces, key=lambda p: p[0]))
    if pieces[0][0] != -1 or pieces[-1][1] != 1:
        raise ValueError("pieces must cover [-1, 1]")
    for (_, b, _), (a, _, _) in zip(pieces, pieces[1:]):
        if a != b:
            raise ValueError("pieces must be contiguous")
    bps = tuple(p[0] for p in pieces[1:])
    return Phantom(name, 1, bps, pieces)


def _zero(x):
    return np.zeros_like(x)


def _f1_neg(x):
    return -np.cos(x / 2)


def _f1_pos(x):
    return np.cos(x / 2)


F1 = Phantom(PhantomId.F1.value, 1, (0.0,), ((-1.0, 0.0, _f1_neg), (0.0, 1.0, _f1_pos)))

# f2(pi x): branch intervals of the original divided by pi.
F2 = Phantom(
    PhantomId.F2.value,
    1,
    (-0.75, -0.5, -0.25, 0.125, 0.375, 0.75),
    (
        (-1.0, -0.75, _zero),
        (-0.75, -0.5, lambda x: np.full_like(x, 1.5)),
        (-0.5, -0.25, _zero),
        (-0.25, 0.125, lambda x: 1.75 - np.pi * x / 2 + np.sin(7 * np.pi * x - 0.25)),
        (0.125, 0.375, _zero),
        (0.375, 0.75, lambda x: 11 * np.pi * x / 4 - 5),
        (0.75, 1.0, _zero),
    ),
)


def _check_domain(*coords):
    for c in coords:
        if np.any(np.abs(c) > 1 + 1e-12):
            raise ValueError("points must lie in [-1, 1]")


def _eval_pieces(pieces, x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for i, (a, b, func) in enumerate(pieces):
        sel = (x >= a) & ((x < b) if i < len(pieces) - 1 else (x <= b))
        if np.any(sel):
            out[sel] = func(x[sel])
    return out


def evaluate(phantom: Phantom, *coords):
    """Pointwise values; ``evaluate(F1, x)`` or ``evaluate(F3, x, y)``."""
    if len(coords) != phantom.dims:
        raise ValueError(f"{phantom.id} is {phantom.dims}D, got {len(coords)} coordinate arrays")
    coords = [np.asarray(c, dtype=float) for c in coords]
    _check_domain(*coords)
    if phantom.dims == 1:
        res = _eval_pieces(phantom.pieces, coords[0])
    else:
        X, Y = np.broadcast_arrays(*coords)
        res = phantom.evaluator(X, Y)
    return res[()] if np.ndim(res) == 0 else res


def rasterize(phantom: Phantom, grid: SpatialGrid) -> np.ndarray:
    """Phantom sampled on the grid (``g[i, j] = f(x_i, y_j)`` in 2D)."""
    if grid.dims != phantom.dims:
        raise ValueError("grid and phantom dimensions differ")
    if grid.dims == 1:
        return evaluate(phantom, grid.points)
    return evaluate(phantom, *grid.mesh())


# ---------------------------------------------------------------------------
# 1D quadrature

def _piece_coefficient(func, a, b, lam, tol):
    def scalar(x):
        return float(func(np.asarray(x, dtype=float)))

    opts = dict(epsabs=tol, epsrel=1e-13, limit=400, full_output=1)
    w = np.pi * lam
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if w == 0.0:
            res = integrate.quad(scalar, a, b, **opts)
            parts = [res]
        else:
            parts = [integrate.quad(scalar, a, b, weight=kind, wvar=w, **opts) for kind in ("cos", "sin")]
    for p in parts:
        if len(p) > 3 or not np.isfinite(p[0]) or p[1] > tol:
            raise NumericFailure(f"quadrature did not converge at lambda={lam!r} (error estimate {p[1]:.2e})")
    if w == 0.0:
        return 0.5 * parts[0][0]
    return 0.5 * (parts[0][0] - 1j * parts[1][0])


def _fourier_1d(phantom, lam, tol):
    out = np.zeros(lam.shape, dtype=complex)
    active = [p for p in phantom.pieces if p[2] is not _zero]
    for i, l in enumerate(lam):
        out[i] = sum(_piece_coefficient(func, a, b, l, tol / max(len(active), 1)) for a, b, func in active)
    return out


# ---------------------------------------------------------------------------
# F3: separable outer branch plus a radial correction inside the disc

_R3 = np.sqrt(0.5)


def _composite_gauss(a, b, panels=24, order=32):
    x, w = leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    h = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    nodes = (mid[:, None] + h[:, None] * x).ravel()
    weights = (h[:, None] * w).ravel()
    return nodes, weights


def _f3_eval(x, y):
    r2 = x ** 2 + y ** 2
    return np.where(r2 <= 0.5, np.cos(np.pi * r2), np.cos(np.pi * r2 - np.pi / 2))


def _f3_fourier(lambdas, chunk=2048):
    # outer branch sin(pi r^2) = sin(pi x^2)cos(pi y^2) + cos(pi x^2)sin(pi y^2); each 1D
    # factor is even, so (1/2) int_{-1}^{1} h(x) e^{-i pi lam x} dx = int_0^1 h(x) cos(pi lam x) dx
    xs, ws = _composite_gauss(0.0, 1.0)
    rs, wr = _composite_gauss(0.0, _R3)
    sx, cx = np.sin(np.pi * xs ** 2) * ws, np.cos(np.pi * xs ** 2) * ws
    q = (np.cos(np.pi * rs ** 2) - np.sin(np.pi * rs ** 2)) * rs * wr
    out = np.empty(len(lambdas), dtype=complex)
    for s in range(0, len(lambdas), chunk):
        lam = lambdas[s:s + chunk]
        c1 = np.cos(np.pi * np.outer(lam[:, 0], xs))
        c2 = np.cos(np.pi * np.outer(lam[:, 1], xs))
        outer = (c1 @ sx) * (c2 @ cx) + (c1 @ cx) * (c2 @ sx)
        rho = np.hypot(lam[:, 0], lam[:, 1])
        disc = 0.25 * 2 * np.pi * (special.j0(np.pi * np.outer(rho, rs)) @ q)
        out[s:s + chunk] = outer + disc
    return out


F3 = Phantom(PhantomId.F3.value, 2, ("circle x^2+y^2=1/2",), evaluator=_f3_eval, fourier=_f3_fourier)


# ---------------------------------------------------------------------------
# Shepp-Logan

#: (intensity, semi-axis a (x), semi-axis b (y), x0, y0, angle in degrees);
#: high-contrast intensities of the widely used "modified" table.
SHEPP_LOGAN_ELLIPSES = np.array([
    [1.0, 0.6900, 0.9200, 0.00, 0.0000, 0.0],
    [-0.8, 0.6624, 0.8740, 0.00, -0.0184, 0.0],
    [-0.2, 0.1100, 0.3100, 0.22, 0.0000, -18.0],
    [-0.2, 0.1600, 0.4100, -0.22, 0.0000, 18.0],
    [0.1, 0.2100, 0.2500, 0.00, 0.3500, 0.0],
    [0.1, 0.0460, 0.0460, 0.00, 0.1000, 0.0],
    [0.1, 0.0460, 0.0460, 0.00, -0.1000, 0.0],
    [0.1, 0.0460, 0.0230, -0.08, -0.6050, 0.0],
    [0.1, 0.0230, 0.0230, 0.00, -0.6060, 0.0],
    [0.1, 0.0230, 0.0460, 0.06, -0.6050, 0.0],
])


def _ellipse_frame(row):
    A, a, b, x0, y0, deg = row
    phi = np.deg2rad(deg)
    return A, a, b, x0, y0, np.cos(phi), np.sin(phi)


def _sl_eval(x, y, table=SHEPP_LOGAN_ELLIPSES):
    out = np.zeros(np.broadcast(x, y).shape)
    for row in table:
        A, a, b, x0, y0, c, s = _ellipse_frame(row)
        u = (x - x0) * c + (y - y0) * s
        v = -(x - x0) * s + (y - y0) * c
        out += A * ((u / a) ** 2 + (v / b) ** 2 <= 1.0)
    return out


def _sl_fourier(lambdas, table=SHEPP_LOGAN_ELLIPSES):
    l1, l2 = lambdas[:, 0], lambdas[:, 1]
    out = np.zeros(len(lambdas), dtype=complex)
    for row in table:
        A, a, b, x0, y0, c, s = _ellipse_frame(row)
        w = np.pi * np.hypot(a * (l1 * c + l2 * s), b * (-l1 * s + l2 * c))
        # 2 J1(w)/w -> 1 as w -> 0
        jinc = np.ones_like(w)
        nz = w > 1e-12
        jinc[nz] = 2 * special.j1(w[nz]) / w[nz]
        out += 0.25 * A * a * b * np.pi * jinc * np.exp(-1j * np.pi * (l1 * x0 + l2 * y0))
    return out


SHEPP_LOGAN = Phantom(PhantomId.SHEPP_LOGAN.value, 2, ("ten ellipses",), evaluator=_sl_eval, fourier=_sl_fourier)

_REGISTRY = {p.id: p for p in (F1, F2, F3, SHEPP_LOGAN)}


def get_phantom(name) -> Phantom:
    key = getattr(name, "value", name)
    key = str(key).upper().replace("-", "_")
    if key in ("SL", "SHEPPLOGAN"):
        key = "SHEPP_LOGAN"
    try:
        return _REGISTRY[key]
    except KeyError:
        raise ValueError(f"unknown phantom {name!r}; choose from {sorted(_REGISTRY)}") from None


def shepp_logan(grid: SpatialGrid) -> np.ndarray:
    """Rasterised high-contrast Shepp-Logan phantom on a 2D grid."""
    if grid.dims != 2:
        raise ValueError("Shepp-Logan needs a 2D grid")
    return rasterize(SHEPP_LOGAN, grid)


def continuous_fourier_samples(phantom: Phantom, freqs: FrequencySet, tol: float = 1e-10) -> FourierData:
    """Continuous Fourier coefficients of ``phantom`` at ``freqs``.

    1D: adaptive oscillatory quadrature on each smooth piece, absolute
    tolerance ``tol`` per coefficient.  2D: the phantom's own routine
    (closed-form ellipse transforms for Shepp-Logan; Gauss-Legendre on the
    separable and radial parts for F3).
    """
    if phantom.dims != freqs.dims:
        raise ValueError(f"{phantom.id} is {phantom.dims}D but frequencies are {freqs.dims}D")
    if phantom.dims == 1:
        values = _fourier_1d(phantom, freqs.lambdas, tol)
    else:
        values = phantom.fourier(freqs.lambdas)
    return FourierData(freqs, values, Provenance.CONTINUOUS_QUADRATURE, meta={"phantom": phantom.id})
