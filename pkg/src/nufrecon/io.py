"""Plain-file exports: PGM/PBM images and CSV tables.

PGM images are written as binary ``P5`` with ``maxval = 65535`` (16 bit,
big-endian).  Values are mapped linearly from ``[lo, hi]`` (default: the data
range) onto ``0..65535``; the row order puts the first array axis down the
image.  PBM masks are binary ``P4`` with 1 drawn black.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .sampling import FourierData, FrequencySet, Provenance

__all__ = [
    "write_pgm",
    "read_pgm",
    "write_pbm",
    "read_pbm",
    "write_matrix_csv",
    "read_matrix_csv",
    "write_fourier_csv",
    "read_fourier_csv",
    "write_rows_csv",
]


def _as_image(a):
    a = np.asarray(a)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValueError(f"images must be 1D or 2D, got shape {a.shape}")
    return a


def write_pgm(path, values, lo: float | None = None, hi: float | None = None) -> tuple:
    """Write a 16-bit PGM; returns the ``(lo, hi)`` range used."""
    a = _as_image(np.real(values)).astype(float)
    if not np.all(np.isfinite(a)):
        raise ValueError("cannot write non-finite values")
    lo = float(a.min()) if lo is None else float(lo)
    hi = float(a.max()) if hi is None else float(hi)
    span = hi - lo if hi > lo else 1.0
    q = np.clip(np.rint((a - lo) / span * 65535.0), 0, 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n# range {lo!r} {hi!r}\n{a.shape[1]} {a.shape[0]}\n65535\n".encode("ascii"))
        fh.write(q.tobytes())
    return lo, hi


def _header_tokens(data, count):
    tokens, pos = [], 0
    while len(tokens) < count:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    return tokens, pos + 1


def read_pgm(path) -> np.ndarray:
    """Raw integer samples of a binary PGM (8 or 16 bit)."""
    data = Path(path).read_bytes()
    (magic, w, h, maxval), pos = _header_tokens(data, 4)
    if magic != "P5":
        raise ValueError(f"not a binary PGM: {magic}")
    w, h, maxval = int(w), int(h), int(maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(data, dtype=dtype, count=w * h, offset=pos).reshape(h, w).astype(np.int64)


def write_pbm(path, bits) -> None:
    a = _as_image(bits)
    if np.any((a != 0) & (a != 1)):
        raise ValueError("PBM entries must be 0 or 1")
    packed = np.packbits(a.astype(np.uint8), axis=1)
    with open(path, "wb") as fh:
        fh.write(f"P4\n{a.shape[1]} {a.shape[0]}\n".encode("ascii"))
        fh.write(packed.tobytes())


def read_pbm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    (magic, w, h), pos = _header_tokens(data, 3)
    if magic != "P4":
        raise ValueError(f"not a binary PBM: {magic}")
    w, h = int(w), int(h)
    row = (w + 7) // 8
    packed = np.frombuffer(data, dtype=np.uint8, count=row * h, offset=pos).reshape(h, row)
    return np.unpackbits(packed, axis=1)[:, :w]


def write_matrix_csv(path, values) -> None:
    """Real matrix (or vector, written as one row) with full double precision."""
    np.savetxt(path, _as_image(np.real(values)), delimiter=",", fmt="%.17g")


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_fourier_csv(path, data: FourierData) -> None:
    """One row per sample: nominal index, frequency, real and imaginary part."""
    fr = data.freqs
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if fr.dims == 1:
            w.writerow(["k", "lambda", "re", "im"])
            for k, lam, v in zip(fr.nominal, fr.lambdas, data.values):
                w.writerow([int(k), repr(float(lam)), repr(float(v.real)), repr(float(v.imag))])
        else:
            w.writerow(["k1", "k2", "lambda1", "lambda2", "re", "im"])
            for k, lam, v in zip(fr.nominal, fr.lambdas, data.values):
                w.writerow([int(k[0]), int(k[1]), repr(float(lam[0])), repr(float(lam[1])),
                            repr(float(v.real)), repr(float(v.imag))])


def read_fourier_csv(path, M: int | None = None) -> FourierData:
    """Inverse of :func:`write_fourier_csv` (product structure is not kept)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    head, body = rows[0], rows[1:]
    if not body:
        raise ValueError(f"{path}: no samples")
    tab = np.array(body, dtype=float)
    if head == ["k", "lambda", "re", "im"]:
        nominal, lam, vals = tab[:, 0].astype(int), tab[:, 1], tab[:, 2] + 1j * tab[:, 3]
        dims = 1
    elif head == ["k1", "k2", "lambda1", "lambda2", "re", "im"]:
        nominal, lam, vals = tab[:, :2].astype(int), tab[:, 2:4], tab[:, 4] + 1j * tab[:, 5]
        dims = 2
    else:
        raise ValueError(f"{path}: unrecognised header {head}")
    if M is None:
        M = int(np.abs(nominal).max()) or 1
    return FourierData(FrequencySet(dims, M, lam, nominal), vals, Provenance.MEASURED)


def write_rows_csv(path, rows, fields) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)
