"""Reconstruction drivers: plain HOTV-l1, iteratively reweighted l1 and edge-adaptive l2.

Every driver minimises a data term plus a PA-transform regulariser on a
uniform grid, in 1D or 2D (two axis-wise sparsifiers in 2D).  The data term
is ``s * ||F g - f_hat||^2``.  With ``"unitary"`` scaling ``s = (2J+1)**d``,
which makes ``s F^H F`` close to the identity when there are as many samples
as grid points; ``"plain"`` uses ``s = 1``; ``"axis"`` uses
``s = (2J+1)**(d-1)``, so each pixel carries the weight of one axis
quadrature (the same as ``"plain"`` in 1D).  The l1 drivers default to
unitary scaling and the quadratic driver to axis scaling; with these
defaults the customary parameter values (``rho = 1``, ``lam = 1`` for 257
points) land in a useful regime for both.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .edge_detection import (BinaryEdgeMap, CFKind, EdgeMap, combine_edge_maps, concentration_factors,
                             jump_recovery_1d, jump_recovery_2d, threshold)
from .fourier_model import ForwardOperator, SpatialGrid
from .masking import RegularizationMask, align_edges, build_mask_1d, build_mask_2d, refine_edges
from .metrics import time_stage
from .sampling import FourierData, FrequencySet
from .solvers import (Fidelity, MaskedL2Problem, WeightedL1Problem, cg_solve, pa_sparsifiers,
                      split_bregman)

__all__ = [
    "ReconstructionConfig",
    "ReconstructionResult",
    "hotv_l1",
    "ir_l1",
    "edge_adaptive_l2",
    "edge_adaptive_l2_with_mask",
    "ir_weights",
]

_FIDELITY = ("unitary", "plain", "axis")
_ALIGNMENTS = ("refine", "point", "right_limit")
_RULES = ("dilate", "signed")


@dataclass(frozen=True)
class ReconstructionConfig:
    """Parameters shared by the drivers.

    Attributes
    ----------
    m : PA order.
    lam : weight of the masked quadratic penalty (edge-adaptive l2).
    rho : weight of the l1 penalty (HOTV and IR).
    eps : IR weighting offset, ``w = 1/(|L^m g| + eps)``.
    l_max : maximum number of IR solves.
    mu : l1 weight of the jump-function recovery.  With ``edge_noise_floor``
        and noisy data of known variance it is raised to the universal noise
        level (see :func:`nufrecon.edge_detection.noise_floor_mu`).
    tau : edge and mask threshold.
    """

    m: int = 1
    lam: float = 1.0
    rho: float = 1.0
    eps: float = 1.0
    l_max: int = 25
    mu: float = 1.0
    tau: float = 1 / 257
    l1_fidelity: str = "unitary"
    l2_fidelity: str = "axis"
    ir_tol: float = 1e-4
    cg_tol: float = 1e-8
    cg_maxiter: int = 2000
    sb_tol: float = 1e-6
    sb_max_outer: int = 200
    sb_inner_tol: float = 1e-6
    sb_inner_maxiter: int = 100
    sb_beta_factor: float = 10.0
    edge_tol: float = 1e-8
    edge_noise_floor: bool = True
    cf_kind: str = CFKind.FIRST_ORDER.value
    mask_rule: str = "dilate"
    edge_alignment: str = "refine"
    ignore_seam: bool = True
    accel_tolerance: float = 1e-6

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 0:
            raise ValueError(f"m must be a non-negative integer, got {self.m}")
        for name in ("lam", "rho", "mu", "eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if int(self.l_max) != self.l_max or self.l_max < 1:
            raise ValueError(f"l_max must be an integer >= 1, got {self.l_max}")
        if not self.tau >= 0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")
        for name in ("l1_fidelity", "l2_fidelity"):
            if getattr(self, name) not in _FIDELITY:
                raise ValueError(f"{name} must be one of {_FIDELITY}, got {getattr(self, name)!r}")
        if self.edge_alignment not in _ALIGNMENTS:
            raise ValueError(f"edge_alignment must be one of {_ALIGNMENTS}, got {self.edge_alignment!r}")
        if self.mask_rule not in _RULES:
            raise ValueError(f"mask_rule must be one of {_RULES}, got {self.mask_rule!r}")
        CFKind(self.cf_kind)

    def with_(self, **changes) -> "ReconstructionConfig":
        return replace(self, **changes)

    def sb_options(self) -> dict:
        return dict(tol=self.sb_tol, max_outer=self.sb_max_outer, inner_tol=self.sb_inner_tol,
                    inner_maxiter=self.sb_inner_maxiter, beta_factor=self.sb_beta_factor)


@dataclass
class ReconstructionResult:
    image: np.ndarray
    method: str
    edge_map: EdgeMap | tuple | None = None
    binary_edges: BinaryEdgeMap | tuple | None = None
    mask: RegularizationMask | tuple | None = None
    weights: list | None = None
    reports: list = field(default_factory=list)
    stage_times: dict = field(default_factory=dict)
    total_time: float = 0.0
    iterations: int = 1
    flags: list = field(default_factory=list)

    def __post_init__(self):
        if not np.all(np.isfinite(self.image)):
            raise ValueError("reconstruction produced non-finite values")


def _setup(data, freqs, grid, cfg, op):
    if isinstance(data, FourierData):
        if len(data) != len(freqs):
            raise ValueError("data and frequencies are not aligned")
    elif np.shape(data) != (len(freqs),):
        raise ValueError("data and frequencies are not aligned")
    if grid.dims != freqs.dims:
        raise ValueError("grid and frequencies differ in dimension")
    if cfg.m >= grid.n:
        raise ValueError(f"PA order {cfg.m} too large for {grid.n} points")
    if op is None:
        op = ForwardOperator(grid, freqs, accel_tolerance=cfg.accel_tolerance)
    return op


def _fidelity(op, data, mode, real=True):
    s = {"unitary": op.grid.n ** op.grid.dims, "plain": 1, "axis": op.grid.n ** (op.grid.dims - 1)}[mode]
    return Fidelity(op, data, scale=float(s), real=real)


def ir_weights(Lg, eps: float) -> np.ndarray:
    """``1 / (|L^m g| + eps)``, each in ``(0, 1/eps]``."""
    return 1.0 / (np.abs(Lg) + eps)


def _ir_loop(data, freqs, grid, cfg, op, l_max, label):
    t0 = time.perf_counter()
    op = _setup(data, freqs, grid, cfg, op)
    fid = _fidelity(op, data, cfg.l1_fidelity)
    sps = pa_sparsifiers(cfg.m, grid.n, grid.dims)
    weights = None
    g = None
    reports, times = [], {}
    it = 0
    for it in range(1, l_max + 1):
        prob = WeightedL1Problem(fid, sps, cfg.rho, weights, **cfg.sb_options())
        (g_new, rep), dt = time_stage(f"solve_{it}", lambda: split_bregman(prob, g))
        rep.label = f"{label}_{it}"
        reports.append(rep)
        times[f"solve_{it}"] = dt
        change = np.inf if g is None else np.linalg.norm(g_new - g) / max(np.linalg.norm(g_new), 1e-300)
        g = g_new
        if it == l_max or change < cfg.ir_tol:
            break
        weights = [ir_weights(sp(g), cfg.eps) for sp in sps]
    final_w = [np.ones(sp.out_shape(grid.shape)) for sp in sps] if weights is None else weights
    return ReconstructionResult(g, label, weights=final_w, reports=reports, stage_times=times,
                                total_time=time.perf_counter() - t0, iterations=it)


def hotv_l1(data, freqs: FrequencySet, grid: SpatialGrid, cfg: ReconstructionConfig,
            op: ForwardOperator | None = None) -> ReconstructionResult:
    """One unweighted solve of ``s||F g - f_hat||^2 + rho * sum ||L^m g||_1``."""
    return _ir_loop(data, freqs, grid, cfg, op, 1, "hotv")


def ir_l1(data, freqs: FrequencySet, grid: SpatialGrid, cfg: ReconstructionConfig,
          op: ForwardOperator | None = None) -> ReconstructionResult:
    """Iteratively reweighted l1.

    Starts from unit weights, then alternates a weighted solve with
    ``w = 1/(|L^m g| + eps)`` (per axis in 2D).  Stops after ``l_max``
    solves or once the relative change between solves drops below
    ``cfg.ir_tol``; the last iterate is returned.
    """
    return _ir_loop(data, freqs, grid, cfg, op, cfg.l_max, "ir")


def _alignment(cfg):
    return "point" if cfg.edge_alignment == "refine" else cfg.edge_alignment


def _detect(data, freqs, grid, cfg, op):
    edge_opts = dict(tol=cfg.edge_tol, inner_tol=cfg.edge_tol)
    al = _alignment(cfg)
    if grid.dims == 1:
        cf = concentration_factors(freqs, cfg.cf_kind)
        e = jump_recovery_1d(data, freqs, grid, cfg.mu, cf, op=op, solver_opts=edge_opts,
                             noise_floor=cfg.edge_noise_floor)
        b = threshold(e, cfg.tau)
        cells = (align_edges(b, 0, al, cfg.ignore_seam),)
        return e, b, cells, build_mask_1d(cells[0], cfg.m, cfg.tau, cfg.mask_rule), [e.report]
    cfx = concentration_factors(freqs, cfg.cf_kind, axis=0)
    cfy = concentration_factors(freqs, cfg.cf_kind, axis=1)
    gx, gy = jump_recovery_2d(data, freqs, grid, cfg.mu, cfx, cfy, op=op, solver_opts=edge_opts,
                              noise_floor=cfg.edge_noise_floor)
    bx, by = threshold(gx, cfg.tau), threshold(gy, cfg.tau)
    cells = (align_edges(bx, 0, al, cfg.ignore_seam), align_edges(by, 1, al, cfg.ignore_seam))
    return (gx, gy), (bx, by), cells, build_mask_2d(*cells, cfg.m, cfg.tau, cfg.mask_rule), [gx.report, gy.report]


def _refined_mask(cells, image, cfg):
    cells = [refine_edges(c, image, axis) for axis, c in enumerate(cells)]
    if len(cells) == 1:
        return build_mask_1d(cells[0], cfg.m, cfg.tau, cfg.mask_rule)
    return build_mask_2d(*cells, cfg.m, cfg.tau, cfg.mask_rule)


def _masks_for(mask, sps, grid):
    if isinstance(mask, (RegularizationMask, np.ndarray)):
        mask = (mask,)
    mask = tuple(mask)
    if len(mask) == 1 and len(sps) > 1 and sps[0].L.m == 0:
        mask = mask * len(sps)
    arrays = [np.asarray(getattr(mk, "values", mk)) for mk in mask]
    if len(arrays) != len(sps):
        raise ValueError(f"expected {len(sps)} mask(s), got {len(arrays)}")
    for a, sp in zip(arrays, sps):
        if a.shape != sp.out_shape(grid.shape):
            raise ValueError(f"mask shape {a.shape} does not match {sp.out_shape(grid.shape)}")
    return arrays


def _masked_solve(data, grid, cfg, op, masks, real, init=None):
    fid = _fidelity(op, data, cfg.l2_fidelity, real)
    sps = pa_sparsifiers(cfg.m, grid.n, grid.dims)
    if cfg.m == 0 and grid.dims == 2 and len(masks) == 1:
        sps = sps[:1]
    arrays = _masks_for(masks, sps, grid)
    flags = []
    if all(not a.any() for a in arrays):
        warnings.warn("every mask entry is zero; solving the fidelity-only least-squares problem",
                      RuntimeWarning, stacklevel=3)
        flags.append("all_edges")
    prob = MaskedL2Problem(fid, sps, cfg.lam, arrays, cfg.cg_tol, cfg.cg_maxiter)
    (g, rep), dt = time_stage("cg", lambda: cg_solve(prob, init))
    return g, rep, dt, flags


def edge_adaptive_l2(data, freqs: FrequencySet, grid: SpatialGrid, cfg: ReconstructionConfig,
                     op: ForwardOperator | None = None) -> ReconstructionResult:
    """Detect jumps, build the stencil mask, then solve the masked quadratic problem by CG.

    ``cfg.m`` must be at least 1.  With ``cfg.edge_alignment == "refine"``
    a first solve with the point-aligned mask decides on which side of each
    detected jump its grid sample lies (:func:`refine_edges`) and a second,
    warm-started solve uses the corrected mask.  The edge map(s), binary
    map(s) and final mask(s) are returned with the image.
    """
    if cfg.m < 1:
        raise ValueError("edge-adaptive reconstruction with detection needs m >= 1")
    t0 = time.perf_counter()
    op = _setup(data, freqs, grid, cfg, op)
    (edge, binary, cells, mask, reports), t_edge = time_stage("edges", lambda: _detect(data, freqs, grid, cfg, op))
    g, rep, t_cg, flags = _masked_solve(data, grid, cfg, op, mask, True)
    reports = reports + [rep]
    times = {"edges_and_mask": t_edge, "cg": t_cg}
    if cfg.edge_alignment == "refine":
        t1 = time.perf_counter()
        mask = _refined_mask(cells, g, cfg)
        times["refine_mask"] = time.perf_counter() - t1
        g, rep, t_cg, flags = _masked_solve(data, grid, cfg, op, mask, True, init=g)
        reports.append(rep)
        times["cg_refined"] = t_cg
    return ReconstructionResult(g, "ea", edge, binary, mask, None, reports, times,
                                time.perf_counter() - t0, 1, flags)


def edge_adaptive_l2_with_mask(data, freqs: FrequencySet, grid: SpatialGrid, mask, cfg: ReconstructionConfig,
                               op: ForwardOperator | None = None, real: bool = True) -> ReconstructionResult:
    """Masked quadratic reconstruction with a supplied mask.

    ``mask`` is one mask (1D, or ``m = 0`` in 2D) or a pair ``(M^x, M^y)``.
    With ``m = 0`` the sparsifier is the identity; passing ``(M^x, M^y)``
    then penalises ``(M^x + M^y) * g**2``.  ``real=False`` solves for a
    complex image.
    """
    t0 = time.perf_counter()
    op = _setup(data, freqs, grid, cfg, op)
    g, rep, t_cg, flags = _masked_solve(data, grid, cfg, op, mask, real)
    return ReconstructionResult(g, "ea_mask", None, None, mask, None, [rep], {"cg": t_cg},
                                time.perf_counter() - t0, 1, flags)


def combined_edge_map(result: ReconstructionResult):
    """Single edge map of an edge-adaptive result (combined across axes in 2D)."""
    e = result.edge_map
    if isinstance(e, tuple):
        return combine_edge_maps(*e)
    return e
