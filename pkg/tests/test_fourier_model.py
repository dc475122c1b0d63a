import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nufrecon.errors import NumericFailure
from nufrecon.fourier_model import (ACCELERATED, DIRECT, ForwardOperator, SpatialGrid,
                                    predicted_gridding_error)
from nufrecon.sampling import jittered_frequencies_1d, jittered_frequencies_2d


def _pair(grid, freqs):
    return ForwardOperator(grid, freqs, DIRECT), ForwardOperator(grid, freqs, ACCELERATED)


def test_grid():
    g = SpatialGrid.from_size(9, 2)
    assert g.J == 4 and g.n == 9 and g.shape == (9, 9)
    assert np.allclose(g.points, np.linspace(-1, 1, 9))
    X, Y = g.mesh()
    assert X[0, 5] == -1 and Y[0, 5] == g.points[5]
    with pytest.raises(ValueError):
        SpatialGrid.from_size(8)


def test_direct_matches_explicit_sum():
    grid = SpatialGrid.from_size(11)
    f = jittered_frequencies_1d(5, seed=0)
    g = np.random.default_rng(0).standard_normal(11)
    want = np.array([np.sum(g * np.exp(-1j * np.pi * lam * grid.points)) for lam in f.lambdas]) / 11
    assert np.allclose(ForwardOperator(grid, f, DIRECT).forward(g), want, atol=1e-14)


def test_smooth_function_approximates_continuous_coefficients():
    grid = SpatialGrid.from_size(257)
    f = jittered_frequencies_1d(8, seed=1)
    op = ForwardOperator(grid, f, DIRECT)
    # f(x) = exp(-20 x^2) is negligible at the ends; its coefficient is a Gaussian
    lam = f.lambdas
    exact = 0.5 * np.sqrt(np.pi / 20) * np.exp(-(np.pi * lam) ** 2 / 80)
    got = op.forward(np.exp(-20 * grid.points ** 2)) * 257 / 256
    assert np.max(np.abs(got - exact)) < 1e-8


@pytest.mark.parametrize("n", [65, 129, 257])
def test_accelerated_agrees_1d(n):
    grid = SpatialGrid.from_size(n)
    f = jittered_frequencies_1d((n - 1) // 2, seed=n)
    d, a = _pair(grid, f)
    g = np.random.default_rng(n).standard_normal(n)
    assert np.max(np.abs(d.forward(g) - a.forward(g))) < 1e-6
    v = np.random.default_rng(1).standard_normal(len(f)) + 0j
    assert np.max(np.abs(d.adjoint(v) - a.adjoint(v))) < 1e-6


def test_accelerated_agrees_2d():
    grid = SpatialGrid.from_size(33, 2)
    f = jittered_frequencies_2d(16, seed=0)
    d, a = _pair(grid, f)
    g = np.random.default_rng(0).standard_normal(grid.shape)
    assert np.max(np.abs(d.forward(g) - a.forward(g))) < 1e-6


@settings(max_examples=15, deadline=None)
@given(J=st.integers(2, 40), seed=st.integers(0, 1000))
def test_adjoint_identity_direct(J, seed):
    grid = SpatialGrid(1, J)
    f = jittered_frequencies_1d(J, seed=seed)
    op = ForwardOperator(grid, f, DIRECT)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)
    v = rng.standard_normal(len(f)) + 1j * rng.standard_normal(len(f))
    lhs = np.vdot(v, op.forward(g))
    rhs = np.vdot(op.adjoint(v), g)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_accelerated_adjoint_is_exact_transpose():
    grid = SpatialGrid.from_size(17, 2)
    f = jittered_frequencies_2d(8, seed=2)
    op = ForwardOperator(grid, f, ACCELERATED)
    rng = np.random.default_rng(0)
    g = rng.standard_normal(grid.shape)
    v = rng.standard_normal(len(f)) + 1j * rng.standard_normal(len(f))
    assert abs(np.vdot(v, op.forward(g)) - np.vdot(op.adjoint(v), g)) < 1e-12


@pytest.mark.parametrize("dims,product", [(1, False), (2, False), (2, True)])
def test_normal_operator(dims, product):
    grid = SpatialGrid.from_size(15, dims)
    f = jittered_frequencies_1d(7, seed=0) if dims == 1 else jittered_frequencies_2d(7, seed=0, product=product)
    op = ForwardOperator(grid, f)
    ref = ForwardOperator(grid, f, DIRECT)
    rng = np.random.default_rng(3)
    g = rng.standard_normal(grid.shape)
    s = rng.random(len(f))
    assert np.allclose(op.normal(g, real=False), ref.adjoint(ref.forward(g)), atol=1e-10)
    assert np.allclose(op.normal(g, s), ref.adjoint(s * ref.forward(g)).real, atol=1e-10)


def test_dense_matrix():
    grid = SpatialGrid.from_size(9)
    f = jittered_frequencies_1d(4, seed=0)
    op = ForwardOperator(grid, f, DIRECT)
    g = np.arange(9.0)
    assert np.allclose(op.matrix() @ g, op.forward(g))
    with pytest.raises(ValueError):
        ForwardOperator(SpatialGrid.from_size(5, 2), jittered_frequencies_2d(2, 0)).matrix()


def test_kernel_width_failure():
    grid = SpatialGrid.from_size(9)
    f = jittered_frequencies_1d(4, seed=0)
    assert predicted_gridding_error(8) < 1e-6
    with pytest.raises(NumericFailure):
        ForwardOperator(grid, f, ACCELERATED, accel_tolerance=1e-12, kernel_width=3)


def test_shape_checks():
    op = ForwardOperator(SpatialGrid.from_size(9), jittered_frequencies_1d(4, seed=0))
    with pytest.raises(ValueError):
        op.forward(np.zeros(8))
    with pytest.raises(ValueError):
        op.adjoint(np.zeros(3))
    with pytest.raises(ValueError):
        ForwardOperator(SpatialGrid.from_size(9, 2), jittered_frequencies_1d(4, seed=0))
