"""Optimisation kernels shared by the reconstruction drivers.

All problems have a least-squares data term

    s * || diag(r) F g - b ||_2^2

(``s`` a fidelity scale, ``r`` optional per-sample row weights) plus a
regulariser built from PA transforms applied along image axes.  For real
unknowns the normal equations use ``Re(F^H diag(|r|^2) F)``, i.e. the
real-restricted least-squares problem.

* :func:`split_bregman` handles ``rho * sum_i ||w_i * L_i g||_1``.
* :func:`cg_solve` handles the masked quadratic ``lam * sum_i ||M_i L_i g||^2``.
* :func:`direct_solve` forms the same quadratic problem densely (1D only).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import NumericFailure
from .fourier_model import ForwardOperator
from .pa_transform import PATransform
from .sampling import FourierData

__all__ = [
    "Fidelity",
    "Sparsifier",
    "WeightedL1Problem",
    "MaskedL2Problem",
    "SolveReport",
    "conjugate_gradient",
    "shrink",
    "split_bregman",
    "cg_solve",
    "direct_solve",
    "pa_sparsifiers",
]

_DENSE_LIMIT = 513


@dataclass
class Fidelity:
    """Data term ``scale * ||diag(row_scale) F g - data||^2``."""

    op: ForwardOperator
    data: np.ndarray
    row_scale: np.ndarray | None = None
    scale: float = 1.0
    real: bool = True

    def __post_init__(self):
        if isinstance(self.data, FourierData):
            if self.data.freqs is not self.op.freqs and not np.array_equal(
                    self.data.freqs.lambdas, self.op.freqs.lambdas):
                raise ValueError("data and operator frequencies differ")
            self.data = self.data.values
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != (len(self.op.freqs),):
            raise ValueError(f"data has shape {self.data.shape}, expected ({len(self.op.freqs)},)")
        if self.row_scale is not None:
            self.row_scale = np.asarray(self.row_scale, dtype=complex)
            if self.row_scale.shape != self.data.shape:
                raise ValueError("row_scale must align with the data")
        if not self.scale > 0:
            raise ValueError("fidelity scale must be positive")

    @property
    def shape(self) -> tuple:
        return self.op.grid.shape

    @property
    def dtype(self):
        return float if self.real else complex

    def _weights(self):
        return None if self.row_scale is None else np.abs(self.row_scale) ** 2

    def diagonal(self) -> float:
        """The (constant) diagonal of ``scale * A^H A``."""
        w = np.ones(len(self.data)) if self.row_scale is None else self._weights()
        return self.scale * self.op.scale ** 2 * float(np.sum(w))

    def residual(self, g) -> np.ndarray:
        Fg = self.op.forward(g)
        if self.row_scale is not None:
            Fg = self.row_scale * Fg
        return Fg - self.data

    def value(self, g) -> float:
        return self.scale * float(np.sum(np.abs(self.residual(g)) ** 2))

    def normal(self, g) -> np.ndarray:
        """``scale * A^H A g`` (real part for real unknowns)."""
        return self.scale * self.op.normal(g, self._weights(), real=self.real)

    def rhs(self) -> np.ndarray:
        """``scale * A^H data`` (real part for real unknowns)."""
        b = self.data if self.row_scale is None else np.conj(self.row_scale) * self.data
        out = self.scale * self.op.adjoint(b)
        return out.real if self.real else out

    def dense(self):
        """Dense ``A`` and ``b`` (1D, small grids)."""
        A = self.op.matrix()
        if self.row_scale is not None:
            A = self.row_scale[:, None] * A
        return A, self.data


@dataclass(frozen=True)
class Sparsifier:
    """A PA transform acting along one image axis."""

    L: PATransform
    axis: int = 0

    def __call__(self, g):
        return self.L.apply(g, axis=self.axis)

    def T(self, v):
        return self.L.adjoint(v, axis=self.axis)

    def out_shape(self, shape) -> tuple:
        s = list(shape)
        s[self.axis] = self.L.n_out
        return tuple(s)

    def dense(self) -> np.ndarray:
        return self.L.matrix().toarray()


def pa_sparsifiers(m: int, n: int, dims: int) -> list:
    """``L^m`` along every axis of an ``n``-point (per axis) grid."""
    L = PATransform(m, n)
    return [Sparsifier(L, ax) for ax in range(dims)]


@dataclass
class SolveReport:
    """Outcome of one solver call."""

    iterations: int
    residual: float
    wall_time: float
    converged: bool
    label: str = ""
    objective: float = float("nan")
    history: list = field(default_factory=list, repr=False)

    CSV_FIELDS = ("label", "iterations", "residual", "wall_time", "converged", "objective")

    def csv_row(self) -> dict:
        return {k: getattr(self, k) for k in self.CSV_FIELDS}


def _check_sparsifiers(sparsifiers, shape):
    out = []
    for sp in sparsifiers:
        if isinstance(sp, PATransform):
            sp = Sparsifier(sp, 0)
        if sp.L.n != shape[sp.axis]:
            raise ValueError(f"sparsifier of size {sp.L.n} does not fit axis {sp.axis} of {shape}")
        out.append(sp)
    if not out:
        raise ValueError("at least one sparsifier is required")
    return out


@dataclass
class WeightedL1Problem:
    """``fid(g) + rho * sum_i ||weights_i * L_i g||_1``.

    ``beta`` is the Split Bregman splitting penalty.  By default it is
    ``beta_factor`` times the diagonal of the data-term Hessian, which keeps
    the inner systems well conditioned whatever the data scaling; inner CG
    runs to ``inner_tol`` or ``inner_maxiter``.
    """

    fidelity: Fidelity
    sparsifiers: list
    rho: float
    weights: list | None = None
    beta: float | None = None
    beta_factor: float = 1.0
    inner_tol: float = 1e-6
    inner_maxiter: int = 100
    tol: float = 1e-6
    max_outer: int = 200

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        self.sparsifiers = _check_sparsifiers(self.sparsifiers, self.fidelity.shape)
        shapes = [sp.out_shape(self.fidelity.shape) for sp in self.sparsifiers]
        if self.weights is None:
            self.weights = [np.ones(s) for s in shapes]
        else:
            ws = [np.broadcast_to(np.asarray(w, dtype=float), s) for w, s in zip(self.weights, shapes)]
            if len(ws) != len(shapes):
                raise ValueError("one weight array per sparsifier is required")
            if any(np.any(w < 0) or not np.all(np.isfinite(w)) for w in ws):
                raise ValueError("weights must be finite and non-negative")
            self.weights = ws
        if self.beta is None:
            self.beta = self.beta_factor * 2.0 * self.fidelity.diagonal()
        if not self.beta > 0:
            raise ValueError("splitting penalty must be positive")

    def objective(self, g) -> float:
        reg = sum(float(np.sum(w * np.abs(sp(g)))) for sp, w in zip(self.sparsifiers, self.weights))
        return self.fidelity.value(g) + self.rho * reg


@dataclass
class MaskedL2Problem:
    """``fid(g) + lam * sum_i ||masks_i * L_i g||^2`` with binary masks."""

    fidelity: Fidelity
    sparsifiers: list
    lam: float
    masks: list | None = None
    tol: float = 1e-8
    maxiter: int = 2000

    def __post_init__(self):
        # lam = 0 is allowed here (pure least squares); drivers insist on lam > 0
        if not self.lam >= 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        self.sparsifiers = _check_sparsifiers(self.sparsifiers, self.fidelity.shape)
        shapes = [sp.out_shape(self.fidelity.shape) for sp in self.sparsifiers]
        if self.masks is None:
            self.masks = [np.ones(s) for s in shapes]
        else:
            if len(self.masks) != len(shapes):
                raise ValueError("one mask per sparsifier is required")
            ms = []
            for mk, s in zip(self.masks, shapes):
                mk = np.asarray(getattr(mk, "values", mk), dtype=float)
                if mk.shape != s:
                    raise ValueError(f"mask shape {mk.shape} does not match sparsifier output {s}")
                if not np.all((mk == 0) | (mk == 1)):
                    raise ValueError("mask entries must be 0 or 1")
                ms.append(mk)
            self.masks = ms

    def regularizer(self, g) -> float:
        return float(sum(np.sum(mk * np.abs(sp(g)) ** 2) for sp, mk in zip(self.sparsifiers, self.masks)))

    def objective(self, g) -> float:
        return self.fidelity.value(g) + self.lam * self.regularizer(g)

    def apply(self, g):
        """Normal-equation operator ``fid.normal + lam * sum L^T M L``."""
        out = self.fidelity.normal(g)
        for sp, mk in zip(self.sparsifiers, self.masks):
            out = out + self.lam * sp.T(mk * sp(g))
        return out


def _inner(a, b) -> float:
    return float(np.vdot(a, b).real)


def conjugate_gradient(apply, rhs, x0=None, tol: float = 1e-8, maxiter: int = 2000, callback=None):
    """CG for a Hermitian positive semidefinite operator on arrays of any shape.

    Stops when ``||r|| <= tol * ||rhs||``.  Returns ``(x, iterations,
    relative_residual, converged)``.  A non-positive curvature ``p^H A p``
    with a non-negligible residual raises :class:`NumericFailure`.
    """
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=rhs.dtype)
    bnorm = np.sqrt(_inner(rhs, rhs))
    if bnorm == 0.0:
        return np.zeros_like(rhs), 0, 0.0, True
    r = rhs - apply(x)
    rr = _inner(r, r)
    p = r.copy()
    it = 0
    while np.sqrt(rr) > tol * bnorm and it < maxiter:
        Ap = apply(p)
        pAp = _inner(p, Ap)
        if not pAp > 1e-300:
            raise NumericFailure(f"CG breakdown at iteration {it}: p^H A p = {pAp:.3e}")
        alpha = rr / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rr_new = _inner(r, r)
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1
        if callback is not None:
            callback(x)
    res = np.sqrt(rr) / bnorm
    return x, it, res, res <= tol


def shrink(v, t):
    """Soft threshold ``sign(v) * max(|v| - t, 0)``; ``|v| == t`` maps to 0."""
    a = np.abs(v)
    scale = np.where(a > t, 1.0 - t / np.where(a > 0, a, 1.0), 0.0)
    return v * scale


def _init(problem, init):
    shape = problem.fidelity.shape
    if init is None:
        return np.zeros(shape, dtype=problem.fidelity.dtype)
    init = np.asarray(init)
    if init.shape != shape:
        raise ValueError(f"initial image has shape {init.shape}, expected {shape}")
    return init.astype(problem.fidelity.dtype, copy=True)


def split_bregman(p: WeightedL1Problem, init=None):
    """Split Bregman iterations for :class:`WeightedL1Problem`.

    With ``d_i ~ L_i g`` the g-update solves

        (2 fid.normal + beta sum L_i^T L_i) g = 2 fid.rhs + beta sum L_i^T (d_i - b_i)

    by warm-started CG, then ``d_i = shrink(L_i g + b_i, rho w_i / beta)`` and
    ``b_i += L_i g - d_i``.  Stops when the relative change of ``g`` drops below ``p.tol``; otherwise returns the iterate with
    the lowest objective and ``converged=False``.
    """
    t0 = time.perf_counter()
    g = _init(p, init)
    sps = p.sparsifiers
    beta = p.beta
    rhs0 = 2.0 * p.fidelity.rhs()

    def apply(x):
        out = 2.0 * p.fidelity.normal(x)
        for sp in sps:
            out = out + beta * sp.T(sp(x))
        return out

    if not np.any(rhs0):
        # zero data: g = 0 is the global minimiser
        z = np.zeros_like(g)
        return z, SolveReport(0, 0.0, time.perf_counter() - t0, True, "split_bregman", 0.0)

    d = [sp(g) for sp in sps]
    b = [np.zeros_like(x) for x in d]
    best_g, best_obj = g, p.objective(g)
    history = []
    converged = False
    change = np.inf
    it = 0
    for it in range(1, p.max_outer + 1):
        rhs = rhs0
        for sp, di, bi in zip(sps, d, b):
            rhs = rhs + beta * sp.T(di - bi)
        g_new, _, _, _ = conjugate_gradient(apply, rhs, g, p.inner_tol, p.inner_maxiter)
        Lg = [sp(g_new) for sp in sps]
        d = [shrink(x + bi, p.rho * w / beta) for x, bi, w in zip(Lg, b, p.weights)]
        b = [bi + x - di for bi, x, di in zip(b, Lg, d)]
        gnorm = np.linalg.norm(g_new)
        change = np.linalg.norm(g_new - g) / gnorm if gnorm > 0 else 0.0
        g = g_new
        obj = p.objective(g)
        history.append(obj)
        if obj < best_obj:
            best_g, best_obj = g, obj
        if change < p.tol:
            converged = True
            break
    out = g if converged else best_g
    rep = SolveReport(it, float(change), time.perf_counter() - t0, converged, "split_bregman",
                      p.objective(out), history)
    return out, rep


def cg_solve(p: MaskedL2Problem, init=None):
    """Solve the normal equations of :class:`MaskedL2Problem` by CG.

    Stagnation at ``p.maxiter`` gives ``converged=False``; curvature
    breakdown raises :class:`NumericFailure`.
    """
    t0 = time.perf_counter()
    g0 = _init(p, init)
    x, it, res, ok = conjugate_gradient(p.apply, p.fidelity.rhs(), g0, p.tol, p.maxiter)
    return x, SolveReport(it, float(res), time.perf_counter() - t0, bool(ok), "cg", p.objective(x))


def _dense_system(p: MaskedL2Problem):
    fid = p.fidelity
    if fid.op.dims != 1 or fid.op.grid.n > _DENSE_LIMIT:
        raise ValueError(f"direct_solve needs a 1D grid with at most {_DENSE_LIMIT} points")
    A, b = fid.dense()
    H = fid.scale * (A.conj().T @ A)
    rhs = fid.scale * (A.conj().T @ b)
    if fid.real:
        H, rhs = H.real, rhs.real
    for sp, mk in zip(p.sparsifiers, p.masks):
        L = sp.dense()
        H = H + p.lam * (L.T @ (mk[:, None] * L))
    return H, rhs


def direct_solve(p: MaskedL2Problem) -> np.ndarray:
    """Dense solve of ``(s A^H A + lam sum L^T M L) g = s A^H b`` (1D only)."""
    H, rhs = _dense_system(p)
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > 1e13:
        raise NumericFailure(
            f"normal matrix is singular to working precision (condition {cond:.2e}); "
            "use lambda > 0, a non-empty mask, or more data")
    return linalg.solve(H, rhs, assume_a="her" if np.iscomplexobj(H) else "sym")
