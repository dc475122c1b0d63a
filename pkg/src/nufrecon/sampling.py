"""Jittered non-uniform frequency sets, complex Gaussian noise and subsampling.

Frequencies are centred on zero: ``lambda_k = k + (1 - 2*xi_k)/4`` for
``k = -M..M`` with ``xi_k ~ U[0, 1]``, so every sample lies within 1/4 of its
nominal integer.  In two dimensions each coordinate of each sample is jittered
independently.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

__all__ = [
    "FrequencySet",
    "FourierData",
    "Provenance",
    "NO_NOISE",
    "jittered_frequencies_1d",
    "jittered_frequencies_2d",
    "add_noise",
    "subsample",
]

#: Sentinel ``snr_db`` meaning "leave the data untouched".
NO_NOISE = float("inf")


class Provenance(str, Enum):
    CONTINUOUS_QUADRATURE = "continuous_quadrature"
    DISCRETE_FORWARD = "discrete_forward"
    MEASURED = "measured"


@dataclass(frozen=True, eq=False)
class FrequencySet:
    """Non-uniform sample locations.

    Attributes
    ----------
    dims : int
        1 or 2.
    M : int
        Half-bandwidth of the nominal integer grid ``-M..M``.
    lambdas : ndarray
        Shape ``(K,)`` in 1D, ``(K, 2)`` in 2D.
    nominal : ndarray of int
        The integer (or integer pair) each entry jitters around.
    seed : int or None
        Seed of the draw (None when the jitter was supplied explicitly).
    axes : tuple of ndarray or None
        For 2D product grids, the per-axis 1D frequencies whose Cartesian
        product gives ``lambdas``.
    """

    dims: int
    M: int
    lambdas: np.ndarray
    nominal: np.ndarray
    seed: int | None = None
    axes: tuple | None = None

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        nom = np.asarray(self.nominal, dtype=int)
        if self.dims not in (1, 2):
            raise ValueError(f"dims must be 1 or 2, got {self.dims}")
        want = (lam.shape[0],) if self.dims == 1 else (lam.shape[0], 2)
        if lam.shape != want or nom.shape != want:
            raise ValueError(f"lambdas/nominal must have shape {want}, got {lam.shape} and {nom.shape}")
        lam.setflags(write=False)
        nom.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "nominal", nom)

    def __len__(self):
        return self.lambdas.shape[0]

    @property
    def is_product(self) -> bool:
        return self.axes is not None

    def take(self, index) -> "FrequencySet":
        """Subset of the samples (drops the product structure)."""
        index = np.asarray(index)
        return FrequencySet(self.dims, self.M, self.lambdas[index], self.nominal[index], self.seed)


@dataclass(frozen=True, eq=False)
class FourierData:
    """Complex Fourier samples aligned with a :class:`FrequencySet`."""

    freqs: FrequencySet
    values: np.ndarray
    provenance: Provenance = Provenance.MEASURED
    snr_db: float = NO_NOISE
    noise_seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (len(self.freqs),):
            raise ValueError(f"values must have shape ({len(self.freqs)},), got {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.shape[0]

    def with_values(self, values, **changes) -> "FourierData":
        return replace(self, values=values, **changes)


def _check_M(M):
    if int(M) != M or M < 1:
        raise ValueError(f"M must be an integer >= 1, got {M!r}")
    return int(M)


def jittered_frequencies_1d(M: int, seed: int | None = None, xi=None) -> FrequencySet:
    """Draw ``2M+1`` jittered frequencies around ``-M..M``.

    ``xi`` overrides the uniform draws (shape ``(2M+1,)``), which is how the
    zero-jitter (``xi = 1/2``) and maximal-offset (``xi = 0``) cases are made.
    """
    M = _check_M(M)
    k = np.arange(-M, M + 1)
    if xi is None:
        xi = np.random.default_rng(seed).random(k.size)
    else:
        xi = np.broadcast_to(np.asarray(xi, dtype=float), k.shape)
        seed = None
    return FrequencySet(1, M, k + (1.0 - 2.0 * xi) / 4.0, k, seed)


def jittered_frequencies_2d(M: int, seed: int | None = None, xi=None, product: bool = False) -> FrequencySet:
    """Draw ``(2M+1)**2`` jittered frequency pairs.

    Samples are ordered with the first coordinate varying slowest.  With
    ``product=True`` one 1D jitter is drawn per axis and the set is their
    Cartesian product; otherwise every pair is jittered independently.
    """
    M = _check_M(M)
    k = np.arange(-M, M + 1)
    n = k.size
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    nominal = np.stack([k1.ravel(), k2.ravel()], axis=1)
    if product:
        if xi is None:
            xi = np.random.default_rng(seed).random((2, n))
        else:
            xi = np.broadcast_to(np.asarray(xi, dtype=float), (2, n))
            seed = None
        ax = tuple(k + (1.0 - 2.0 * xi[a]) / 4.0 for a in range(2))
        l1, l2 = np.meshgrid(ax[0], ax[1], indexing="ij")
        lam = np.stack([l1.ravel(), l2.ravel()], axis=1)
        return FrequencySet(2, M, lam, nominal, seed, axes=ax)
    if xi is None:
        xi = np.random.default_rng(seed).random(nominal.shape)
    else:
        xi = np.broadcast_to(np.asarray(xi, dtype=float), nominal.shape)
        seed = None
    return FrequencySet(2, M, nominal + (1.0 - 2.0 * xi) / 4.0, nominal, seed)


def noise_variance(values, snr_db: float) -> float:
    """Variance giving ``10*log10(mean|values|^2 / var) = snr_db``."""
    p_signal = float(np.mean(np.abs(values) ** 2))
    return p_signal / 10.0 ** (snr_db / 10.0)


def add_noise(data: FourierData, snr_db: float, seed: int | None = None) -> FourierData:
    """Add i.i.d. circular complex Gaussian noise at the requested SNR.

    ``snr_db = NO_NOISE`` (``+inf``) returns the data unchanged.
    """
    if len(data) == 0:
        raise ValueError("cannot add noise to empty data")
    if np.isposinf(snr_db):
        return data
    if not np.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite or +inf, got {snr_db}")
    var = noise_variance(data.values, snr_db)
    rng = np.random.default_rng(seed)
    eta = np.sqrt(var / 2.0) * (rng.standard_normal(len(data)) + 1j * rng.standard_normal(len(data)))
    meta = dict(data.meta, noise_variance=var)
    return data.with_values(data.values + eta, snr_db=float(snr_db), noise_seed=seed, meta=meta)


def subsample(freqs: FrequencySet, data: FourierData, keep: int, seed: int | None = None):
    """Keep a uniformly random subset of ``keep`` samples, without replacement.

    Returns the reduced ``(FrequencySet, FourierData)``; sample order follows
    the original ordering.
    """
    total = len(freqs)
    if len(data) != total:
        raise ValueError("frequencies and data are not aligned")
    if int(keep) != keep or not 0 < keep <= total:
        raise ValueError(f"keep must be an integer in (0, {total}], got {keep!r}")
    idx = np.sort(np.random.default_rng(seed).choice(total, size=int(keep), replace=False))
    sub = freqs.take(idx)
    meta = dict(data.meta, subsample_seed=seed, subsample_keep=int(keep))
    return sub, replace(data, freqs=sub, values=data.values[idx], meta=meta)
