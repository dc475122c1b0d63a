import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nufrecon.edge_detection import BinaryEdgeMap
from nufrecon.fourier_model import SpatialGrid
from nufrecon.masking import (RegularizationMask, align_edges, build_mask_1d, build_mask_2d, ideal_edge_map_1d,
                              refine_edges)


def _dilation_oracle(y, m):
    # row j of L^m reads samples j..j+m
    n = y.size
    return np.array([0 if y[j:j + m + 1].any() else 1 for j in range(n - m)], dtype=np.uint8)


@given(st.lists(st.integers(0, 1), min_size=6, max_size=40), st.integers(1, 4))
@settings(max_examples=80, deadline=None)
def test_dilate_matches_window_oracle(bits, m):
    y = np.array(bits)
    if m >= y.size:
        return
    mk = build_mask_1d(y, m, 0.1)
    assert mk.shape == (y.size - m,)
    assert np.array_equal(mk.values, _dilation_oracle(y, m))


def test_signed_rule_can_keep_rows():
    y = np.zeros(10)
    y[4] = y[5] = 1
    dil = build_mask_1d(y, 1, 0.1)
    sig = build_mask_1d(y, 1, 0.1, rule="signed")
    assert dil.values[4] == 0 and sig.values[4] == 1
    assert sig.zeros() < dil.zeros()


def test_mask_validation():
    with pytest.raises(ValueError):
        build_mask_1d(np.zeros(5), 0, 0.1)
    with pytest.raises(ValueError):
        build_mask_1d(np.zeros(5), 1, 0.1, rule="other")
    with pytest.raises(ValueError):
        build_mask_1d(np.zeros((3, 3)), 1, 0.1)
    with pytest.raises(ValueError):
        RegularizationMask(np.array([0, 3]), 1, 0.1)


def test_mask_2d_shapes_and_axes():
    n = 9
    bx = np.zeros((n, n))
    bx[4, 2] = 1
    mx, my = build_mask_2d(bx, np.zeros((n, n)), 2, 0.1)
    assert mx.shape == (n - 2, n) and my.shape == (n, n - 2)
    assert my.zeros() == 0
    assert set(zip(*np.nonzero(mx.values == 0))) == {(2, 2), (3, 2), (4, 2)}
    with pytest.raises(ValueError):
        build_mask_2d(np.zeros((3, 4)), np.zeros((3, 4)), 1, 0.1)


def test_align_right_limit_and_seam():
    y = np.zeros(9, dtype=np.uint8)
    y[[0, 4, 8]] = 1
    b = BinaryEdgeMap(y, 0.2)
    assert np.nonzero(align_edges(b).indicator)[0].tolist() == [3]
    assert np.nonzero(align_edges(b, alignment="point").indicator)[0].tolist() == [4]
    kept = align_edges(b, alignment="point", ignore_seam=False)
    assert np.nonzero(kept.indicator)[0].tolist() == [0, 4, 8]
    assert align_edges(b).tau == 0.2
    with pytest.raises(ValueError):
        align_edges(b, alignment="nearest")


def test_align_2d_axis():
    y = np.zeros((5, 5), dtype=np.uint8)
    y[2, 3] = 1
    assert align_edges(y, axis=1).indicator[2, 2] == 1
    assert align_edges(y, axis=0).indicator[1, 3] == 1


@pytest.mark.parametrize("level, dest", [(0.5, 4), (0.9, 4), (0.1, 6), (0.3, 6)])
def test_refine_moves_flag_away_from_jump(level, dest):
    g = np.r_[np.zeros(5), level, np.ones(5)]
    y = np.zeros(11, dtype=np.uint8)
    y[5] = 1
    out = refine_edges(y, g)
    assert np.nonzero(out.indicator)[0].tolist() == [dest]


def test_refine_leaves_clusters_and_flat_spans():
    g = np.r_[np.zeros(5), 0.5, np.ones(5)]
    y = np.zeros(11, dtype=np.uint8)
    y[[5, 6]] = 1
    assert np.array_equal(refine_edges(y, g).indicator, y)
    flat = np.zeros(11)
    y1 = np.zeros(11, dtype=np.uint8)
    y1[5] = 1
    assert np.array_equal(refine_edges(y1, flat).indicator, y1)
    with pytest.raises(ValueError):
        refine_edges(y1, np.zeros(10))


def test_refine_2d_columns():
    n = 7
    g = np.zeros((n, n))
    g[4:, :] = 1.0
    g[3, :] = 0.8
    y = np.zeros((n, n), dtype=np.uint8)
    y[3, 1] = 1
    out = refine_edges(y, g, axis=0)
    assert np.nonzero(out.indicator) == (np.array([2]), np.array([1]))


def test_ideal_map_rounds_to_nearest():
    grid = SpatialGrid.from_size(9, 1)  # spacing 1/4
    b = ideal_edge_map_1d([0.0, 0.3, -0.6, 1.0], grid)
    # 0 -> index 4, 0.3 -> 0.25 (index 5), -0.6 -> -0.5 (index 2), the seam flags both ends
    assert np.nonzero(b.indicator)[0].tolist() == [0, 2, 4, 5, 8]
    tie = ideal_edge_map_1d([0.125], grid)
    assert np.nonzero(tie.indicator)[0].tolist() == [5]
