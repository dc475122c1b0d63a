"""Discrete non-uniform Fourier forward model on a uniform spatial grid.

The forward map sends an image ``g`` sampled at ``x_j = j/J`` to

    (F g)(lambda_k) = w**d * sum_j g_j exp(-i*pi*lambda_k*x_j),   w = 1/(2J+1)

so that ``F`` applied to point samples of a smooth ``f`` approximates its
continuous coefficients ``(1/2) int f(x) exp(-i pi lambda x) dx`` (and the 2D
analogue with prefactor 1/4).  ``F`` is available by direct summation or by
Gaussian gridding (oversampling factor 2); the normal operator ``F^H F`` is
applied exactly through its Toeplitz structure.

In 2D, images are indexed ``g[i, j] = f(x_i, y_j)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft as sfft

from .errors import NumericFailure
from .sampling import FourierData, FrequencySet, Provenance

__all__ = ["SpatialGrid", "ForwardOperator", "predicted_gridding_error", "DIRECT", "ACCELERATED"]

DIRECT = "direct"
ACCELERATED = "accelerated"

_CHUNK = 4096


@dataclass(frozen=True)
class SpatialGrid:
    """``2J+1`` equispaced points ``x_j = j/J`` per axis on ``[-1, 1]``."""

    dims: int
    J: int

    def __post_init__(self):
        if self.dims not in (1, 2):
            raise ValueError(f"dims must be 1 or 2, got {self.dims}")
        if int(self.J) != self.J or self.J < 1:
            raise ValueError(f"J must be an integer >= 1, got {self.J!r}")

    @classmethod
    def from_size(cls, n: int, dims: int = 1) -> "SpatialGrid":
        if n < 3 or n % 2 == 0:
            raise ValueError(f"grid size must be odd and >= 3, got {n}")
        return cls(dims, (n - 1) // 2)

    @property
    def n(self) -> int:
        return 2 * self.J + 1

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dims

    @property
    def points(self) -> np.ndarray:
        return np.arange(-self.J, self.J + 1) / self.J

    @property
    def weight(self) -> float:
        return 1.0 / self.n

    def mesh(self):
        """Coordinate arrays ``(X, Y)`` with ``X[i, j] = x_i`` (2D only)."""
        if self.dims != 2:
            raise ValueError("mesh() is only defined for 2D grids")
        return np.meshgrid(self.points, self.points, indexing="ij")


def predicted_gridding_error(width: int) -> float:
    """Error bound (relative to the l1 norm of the input) of a half-width ``width`` kernel."""
    return 10.0 ** (0.5 - width)


def _width_for(tol: float) -> int:
    width = 2
    while predicted_gridding_error(width) > tol:
        width += 1
    return width


class _GaussianGridding:
    """Type-1/type-2 NUFFT between indices ``-h..h`` and angles ``theta``.

    Computes ``S(theta_k) = sum_j a_j exp(-i theta_k . j)`` and its exact
    adjoint.  Kernel: periodised Gaussian on a twice-oversampled grid.
    """

    def __init__(self, theta: np.ndarray, half: int, tol: float, width: int | None = None):
        theta = np.atleast_2d(np.asarray(theta, dtype=float).T).T  # (K, d)
        self.K, self.d = theta.shape
        self.half = half
        self.N = 2 * half + 1
        self.Mr = 2 * self.N
        if width is None:
            width = _width_for(tol)
        elif predicted_gridding_error(width) > tol:
            raise NumericFailure(
                f"kernel half-width {width} cannot reach tolerance {tol:g} "
                f"(predicted {predicted_gridding_error(width):.1e})"
            )
        self.width = width
        R = self.Mr / self.N
        tau = np.pi * width / (self.N ** 2 * R * (R - 0.5))
        offs = np.arange(-width + 1, width + 1)
        self.w, self.idx = [], []
        for a in range(self.d):
            m = np.floor(theta[:, a] * self.Mr / (2 * np.pi)).astype(np.int64)[:, None] + offs
            dist = theta[:, a, None] - 2 * np.pi * m / self.Mr
            self.w.append(np.exp(-dist ** 2 / (4 * tau)) / self.Mr)
            self.idx.append(np.mod(m, self.Mr))
        j = np.arange(-half, half + 1)
        self.deconv = np.sqrt(tau / np.pi) * np.exp(-(j ** 2) * tau)

    def _deconv_grid(self):
        c = self.deconv
        return c if self.d == 1 else np.multiply.outer(c, c)

    def forward(self, a: np.ndarray) -> np.ndarray:
        G = np.zeros((self.Mr,) * self.d, dtype=complex)
        G[(slice(0, self.N),) * self.d] = a / self._deconv_grid()
        G = np.roll(G, (-self.half,) * self.d, axis=tuple(range(self.d)))
        H = sfft.fftn(G)
        if self.d == 1:
            return np.einsum("kw,kw->k", self.w[0], H[self.idx[0]])
        out = np.empty(self.K, dtype=complex)
        for s in range(0, self.K, _CHUNK):
            sl = slice(s, s + _CHUNK)
            ix, iy = self.idx[0][sl], self.idx[1][sl]
            block = H[ix[:, :, None], iy[:, None, :]]
            out[sl] = np.einsum("ka,kb,kab->k", self.w[0][sl], self.w[1][sl], block)
        return out

    def spread(self, d: np.ndarray) -> np.ndarray:
        """Transpose of the interpolation step: samples -> oversampled grid."""
        size = self.Mr ** self.d
        acc = np.zeros(size, dtype=complex)
        for s in range(0, self.K, _CHUNK):
            sl = slice(s, s + _CHUNK)
            if self.d == 1:
                flat = self.idx[0][sl]
                wts = self.w[0][sl] * d[sl, None]
            else:
                flat = self.idx[0][sl][:, :, None] * self.Mr + self.idx[1][sl][:, None, :]
                wts = self.w[0][sl][:, :, None] * self.w[1][sl][:, None, :] * d[sl, None, None]
            flat = flat.ravel()
            wts = wts.ravel()
            acc.real += np.bincount(flat, weights=wts.real, minlength=size)
            acc.imag += np.bincount(flat, weights=wts.imag, minlength=size)
        return acc.reshape((self.Mr,) * self.d)

    def adjoint(self, d: np.ndarray) -> np.ndarray:
        U = self.spread(np.asarray(d, dtype=complex))
        A = sfft.ifftn(U) * U.size
        A = np.roll(A, (self.half,) * self.d, axis=tuple(range(self.d)))[(slice(0, self.N),) * self.d]
        return A / self._deconv_grid()


class ForwardOperator:
    """Non-uniform Fourier map ``F`` between a :class:`SpatialGrid` and a :class:`FrequencySet`.

    Parameters
    ----------
    grid : SpatialGrid
    freqs : FrequencySet
    mode : {"direct", "accelerated"}
        Exact summation, or Gaussian gridding with error ``accel_tolerance``
        relative to ``w**d * ||g||_1``.
    accel_tolerance : float
    kernel_width : int, optional
        Force the gridding kernel half-width; raises :class:`NumericFailure`
        if it cannot meet ``accel_tolerance``.
    """

    def __init__(self, grid: SpatialGrid, freqs: FrequencySet, mode: str = ACCELERATED,
                 accel_tolerance: float = 1e-6, kernel_width: int | None = None):
        if grid.dims != freqs.dims:
            raise ValueError(f"grid is {grid.dims}D but frequencies are {freqs.dims}D")
        if mode not in (DIRECT, ACCELERATED):
            raise ValueError(f"unknown mode {mode!r}")
        self.grid = grid
        self.freqs = freqs
        self.mode = mode
        self.accel_tolerance = accel_tolerance
        self.kernel_width = kernel_width
        self.scale = grid.weight ** grid.dims
        self._kernels = {}
        if mode == ACCELERATED:
            self._plan  # validate kernel width eagerly

    # -- geometry -------------------------------------------------------
    @property
    def dims(self) -> int:
        return self.grid.dims

    @property
    def theta(self) -> np.ndarray:
        """Angles per grid index, ``pi * lambda / J``."""
        return np.pi * self.freqs.lambdas / self.grid.J

    @cached_property
    def _plan(self):
        return _GaussianGridding(self.theta, self.grid.J, self.accel_tolerance, self.kernel_width)

    def _exp_axis(self, lam):
        return np.exp(-1j * np.pi * np.outer(lam, self.grid.points))

    def _check_image(self, g):
        g = np.asarray(g)
        if g.shape != self.grid.shape:
            raise ValueError(f"image shape {g.shape} does not match grid {self.grid.shape}")
        return g

    def _check_samples(self, d):
        if isinstance(d, FourierData):
            d = d.values
        d = np.asarray(d)
        if d.shape != (len(self.freqs),):
            raise ValueError(f"expected {len(self.freqs)} samples, got shape {d.shape}")
        return d

    # -- direct summation ----------------------------------------------
    def _direct_forward(self, g):
        lam = self.freqs.lambdas
        if self.dims == 1:
            return self._exp_axis(lam) @ g
        if self.freqs.is_product:
            Ex, Ey = (self._exp_axis(ax) for ax in self.freqs.axes)
            return (Ex @ g @ Ey.T).ravel()
        out = np.empty(len(lam), dtype=complex)
        for s in range(0, len(lam), _CHUNK):
            Ex = self._exp_axis(lam[s:s + _CHUNK, 0])
            Ey = self._exp_axis(lam[s:s + _CHUNK, 1])
            out[s:s + _CHUNK] = np.einsum("ki,ij,kj->k", Ex, g, Ey)
        return out

    def _direct_adjoint(self, d):
        lam = self.freqs.lambdas
        if self.dims == 1:
            return self._exp_axis(lam).conj().T @ d
        if self.freqs.is_product:
            Ex, Ey = (self._exp_axis(ax) for ax in self.freqs.axes)
            n1, n2 = len(self.freqs.axes[0]), len(self.freqs.axes[1])
            return Ex.conj().T @ d.reshape(n1, n2) @ Ey.conj()
        out = np.zeros(self.grid.shape, dtype=complex)
        for s in range(0, len(lam), _CHUNK):
            Ex = self._exp_axis(lam[s:s + _CHUNK, 0]).conj()
            Ey = self._exp_axis(lam[s:s + _CHUNK, 1]).conj()
            out += np.einsum("ki,k,kj->ij", Ex, d[s:s + _CHUNK], Ey)
        return out

    # -- public maps ----------------------------------------------------
    def forward(self, g) -> np.ndarray:
        """``F g`` as a complex vector aligned with the frequencies."""
        g = self._check_image(g)
        if self.mode == DIRECT:
            return self.scale * self._direct_forward(g.astype(complex))
        return self.scale * self._plan.forward(g)

    def adjoint(self, d) -> np.ndarray:
        """``F^H d`` as a complex image."""
        d = self._check_samples(d).astype(complex)
        if self.mode == DIRECT:
            return self.scale * self._direct_adjoint(d)
        return self.scale * self._plan.adjoint(d)

    def apply(self, g) -> FourierData:
        """``forward`` wrapped as :class:`FourierData` with DISCRETE_FORWARD provenance."""
        return FourierData(self.freqs, self.forward(g), Provenance.DISCRETE_FORWARD)

    def matrix(self) -> np.ndarray:
        """Dense ``F`` (1D only, at most 513 grid points)."""
        if self.dims != 1 or self.grid.n > 513:
            raise ValueError("dense matrices are only built for 1D grids with n <= 513")
        return self.scale * self._exp_axis(self.freqs.lambdas)

    # -- normal operator ------------------------------------------------
    def toeplitz_kernel(self, sample_weights=None) -> np.ndarray:
        """``t(D) = w**(2d) * sum_k s_k exp(i pi lambda_k . D / J)`` for ``D`` in ``-2J..2J``.

        ``(F^H diag(s) F)[j, j'] = t(j - j')``.
        """
        s = np.ones(len(self.freqs)) if sample_weights is None else np.asarray(sample_weights, float)
        J = self.grid.J
        if self.dims == 1:
            D = np.arange(-2 * J, 2 * J + 1)
            t = np.exp(1j * np.outer(D, self.theta)) @ s
        elif self.freqs.is_product and sample_weights is None:
            D = np.arange(-2 * J, 2 * J + 1)
            tx, ty = (np.exp(1j * np.pi / J * np.outer(D, ax)).sum(axis=1) for ax in self.freqs.axes)
            t = np.multiply.outer(tx, ty)
        else:
            plan = _GaussianGridding(self.theta, 2 * J, tol=1e-11)
            t = plan.adjoint(s.astype(complex))
        return self.scale ** 2 * t

    def _embed_len(self) -> int:
        # any circulant size >= 2n - 1 holds the kernel; 2n is slow when n is prime
        return sfft.next_fast_len(2 * self.grid.n - 1)

    def _embedded_kernel(self, sample_weights, real):
        key = (None if sample_weights is None else np.asarray(sample_weights).tobytes(), real)
        if key not in self._kernels:
            t = self.toeplitz_kernel(sample_weights)
            if real:
                t = t.real
            n = self.grid.n
            P = self._embed_len()
            c = np.zeros((P,) * self.dims, dtype=t.dtype)
            # index D -> D mod P, D in -2J..2J  (2J = n-1)
            idx = np.mod(np.arange(-(n - 1), n), P)
            c[np.ix_(*([idx] * self.dims))] = t
            if real:
                self._kernels[key] = sfft.rfftn(c).real
            else:
                self._kernels[key] = sfft.fftn(c)
            if len(self._kernels) > 8:
                self._kernels.pop(next(iter(self._kernels)))
        return self._kernels[key]

    def normal(self, g, sample_weights=None, real: bool = True) -> np.ndarray:
        """Apply ``F^H diag(s) F`` (or its real part when ``real``) to an image.

        Direct mode multiplies out the two summations; accelerated mode uses
        the circulant embedding of the Toeplitz kernel.
        """
        g = self._check_image(g)
        if self.mode == DIRECT:
            s = 1.0 if sample_weights is None else np.asarray(sample_weights)
            if not real:
                return self.adjoint(s * self.forward(g))
            out = self.adjoint(s * self.forward(g.real)).real
            if np.iscomplexobj(g):
                out = out + 1j * self.adjoint(s * self.forward(g.imag)).real
            return out
        C = self._embedded_kernel(sample_weights, real)
        n = self.grid.n
        P = self._embed_len()
        shape = (P,) * self.dims
        crop = (slice(0, n),) * self.dims
        if real:
            def conv(x):
                return sfft.irfftn(sfft.rfftn(x, shape) * C, shape)[crop]
            if np.iscomplexobj(g):
                return conv(g.real) + 1j * conv(g.imag)
            return conv(g)
        return sfft.ifftn(sfft.fftn(g, shape) * C)[crop]
