import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss
from scipy import integrate

from nufrecon.fourier_model import SpatialGrid
from nufrecon.phantoms import (F1, F2, F3, SHEPP_LOGAN, SHEPP_LOGAN_ELLIPSES, continuous_fourier_samples,
                               evaluate, get_phantom, piecewise_phantom, rasterize, shepp_logan)
from nufrecon.sampling import FrequencySet, jittered_frequencies_1d


def _gl_coefficient(ph, lam, panels=200, order=20):
    """Composite Gauss-Legendre over each piece (independent of the library's quadrature)."""
    x, w = leggauss(order)
    total = 0.0
    for a, b, func in ph.pieces:
        edges = np.linspace(a, b, panels + 1)
        h = np.diff(edges)[:, None] / 2
        nodes = ((edges[:-1] + edges[1:])[:, None] / 2 + h * x).ravel()
        wts = (h * w).ravel()
        total += np.sum(wts * func(nodes) * np.exp(-1j * np.pi * lam * nodes))
    return 0.5 * total


def test_point_values():
    assert evaluate(F1, 0.5) == pytest.approx(np.cos(0.25))
    assert evaluate(F1, -0.5) == pytest.approx(-np.cos(0.25))
    assert evaluate(F1, 0.0) == pytest.approx(1.0)
    assert evaluate(F3, 0.0, 0.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        evaluate(F1, 1.5)


def test_jump_values():
    (x0, j0), = F1.jumps()
    assert x0 == 0 and j0 == pytest.approx(2.0)
    assert [x for x, _ in F2.jumps()] == [-0.75, -0.5, -0.25, 0.125, 0.375, 0.75]
    assert F2.jumps()[0][1] == pytest.approx(1.5)
    assert F1.jumps(periodic=True)[-1][1] == pytest.approx(-2 * np.cos(0.5))


@pytest.mark.parametrize("ph", [F1, F2])
def test_1d_coefficients_match_gauss_legendre(ph):
    f = FrequencySet(1, 10, np.array([0.0, 0.3, 3.0, -7.25, 40.1]), np.array([0, 0, 3, -7, 40]))
    got = continuous_fourier_samples(ph, f).values
    want = np.array([_gl_coefficient(ph, lam) for lam in f.lambdas])
    assert np.max(np.abs(got - want)) < 1e-10


def test_f1_closed_form_at_zero():
    # F1 is odd, so its mean vanishes
    f = FrequencySet(1, 1, np.array([0.0]), np.array([0]))
    assert abs(continuous_fourier_samples(F1, f).values[0]) < 1e-12


def _f3_reference(lam):
    r2 = 0.5

    def inner(x):
        fx = lambda y: F3.evaluator(x, y) * np.cos(np.pi * (lam[0] * x + lam[1] * y))
        gy = lambda y: F3.evaluator(x, y) * np.sin(np.pi * (lam[0] * x + lam[1] * y))
        pts = [-np.sqrt(r2 - x * x), np.sqrt(r2 - x * x)] if x * x < r2 else None
        c = integrate.quad(fx, -1, 1, points=pts, epsabs=1e-12, limit=200)[0]
        s = integrate.quad(gy, -1, 1, points=pts, epsabs=1e-12, limit=200)[0]
        return c, s

    re = integrate.quad(lambda x: inner(x)[0], -1, 1, points=[-np.sqrt(r2), np.sqrt(r2)], epsabs=1e-11, limit=200)[0]
    im = integrate.quad(lambda x: inner(x)[1], -1, 1, points=[-np.sqrt(r2), np.sqrt(r2)], epsabs=1e-11, limit=200)[0]
    return 0.25 * (re - 1j * im)


@pytest.mark.parametrize("lam", [(0.0, 0.0), (1.3, -0.2), (4.9, 2.1)])
def test_f3_coefficients_match_nested_quadrature(lam):
    f = FrequencySet(2, 5, np.array([lam]), np.array([[round(lam[0]), round(lam[1])]]))
    got = continuous_fourier_samples(F3, f).values[0]
    assert abs(got - _f3_reference(lam)) < 1e-8


def _ellipse_reference(row, lam):
    A, a, b, x0, y0, deg = row
    phi = np.deg2rad(deg)
    c, s = np.cos(phi), np.sin(phi)

    # integrate in the ellipse's own frame (u, v); Jacobian a*b after scaling to the unit disc
    def integrand(v, u, part):
        x = x0 + a * u * c - b * v * s
        y = y0 + a * u * s + b * v * c
        ph = np.pi * (lam[0] * x + lam[1] * y)
        return np.cos(ph) if part == 0 else np.sin(ph)

    lo, hi = (lambda u: -np.sqrt(1 - u * u)), (lambda u: np.sqrt(1 - u * u))
    re = integrate.dblquad(integrand, -1, 1, lo, hi, args=(0,), epsabs=1e-12)[0]
    im = integrate.dblquad(integrand, -1, 1, lo, hi, args=(1,), epsabs=1e-12)[0]
    return 0.25 * A * a * b * (re - 1j * im)


def test_shepp_logan_transform_matches_quadrature():
    rng = np.random.default_rng(0)
    lams = rng.uniform(-6, 6, size=(3, 2))
    f = FrequencySet(2, 6, lams, np.rint(lams).astype(int))
    got = continuous_fourier_samples(SHEPP_LOGAN, f).values
    for k, lam in enumerate(lams):
        want = sum(_ellipse_reference(row, lam) for row in SHEPP_LOGAN_ELLIPSES)
        assert abs(got[k] - want) < 1e-9


def test_shepp_logan_raster():
    img = shepp_logan(SpatialGrid.from_size(65, 2))
    assert img.shape == (65, 65)
    assert img.max() == pytest.approx(1.0)
    assert img[0, 0] == 0
    vals = np.round(np.unique(img), 6)
    assert vals.min() >= 0 and np.allclose(vals * 10, np.round(vals * 10))


def test_rasterize_and_registry():
    g = SpatialGrid.from_size(9)
    assert np.allclose(rasterize(F1, g), evaluate(F1, g.points))
    assert get_phantom("sl") is SHEPP_LOGAN
    assert get_phantom("f3") is F3
    with pytest.raises(ValueError):
        get_phantom("nope")
    with pytest.raises(ValueError):
        rasterize(F3, g)


def test_custom_piecewise():
    ph = piecewise_phantom([(-1, 0, lambda x: 0 * x), (0, 1, lambda x: 1 + 0 * x)])
    f = jittered_frequencies_1d(3, seed=0)
    vals = continuous_fourier_samples(ph, f).values
    lam = f.lambdas
    want = np.where(lam == 0, 0.5, (1 - np.exp(-1j * np.pi * lam)) / (2j * np.pi * lam))
    assert np.allclose(vals, want, atol=1e-12)
    with pytest.raises(ValueError):
        piecewise_phantom([(-1, 0.5, np.sin), (0.6, 1, np.sin)])
