import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gwrboost.errors import InvalidBandwidthError
from gwrboost.weights import (SpatialWeightScheme, distance_matrix, kernel_weight, pairwise_distance,
                              weight_matrix, weight_vector)


def test_pairwise_distance_examples():
    assert pairwise_distance((0, 0), (0, 0)) == 0
    assert pairwise_distance((0, 0), (3, 4)) == 5
    assert pairwise_distance((1, 1), (25, 25)) == pytest.approx(math.sqrt(2) * 24, rel=1e-15)
    assert pairwise_distance((2, 7), (-1, 3)) == pairwise_distance((-1, 3), (2, 7))


@pytest.mark.parametrize("d, expected", [(0, 1.0), (10, 0.0), (5, 0.5625), (12, 0.0)])
def test_bisquare_values(d, expected):
    assert kernel_weight(d, 10, "bisquare") == expected


def test_gaussian_values():
    assert kernel_weight(0, 3, "gaussian") == 1.0
    assert kernel_weight(3, 3, "gaussian") == pytest.approx(math.exp(-0.5))


@pytest.mark.parametrize("h", [0, -1, float("nan")])
def test_invalid_bandwidth(h):
    with pytest.raises(InvalidBandwidthError):
        kernel_weight(1.0, h)


@pytest.mark.parametrize("kernel", ["bisquare", "gaussian"])
@given(d1=st.floats(0, 50), d2=st.floats(0, 50), h=st.floats(0.01, 40))
def test_kernel_bounded_and_monotone(kernel, d1, d2, h):
    w1, w2 = kernel_weight(d1, h, kernel), kernel_weight(d2, h, kernel)
    assert 0 <= w1 <= 1 and 0 <= w2 <= 1
    if d1 <= d2:
        assert w1 >= w2


@given(d=st.floats(0, 50), h=st.floats(0.01, 40))
def test_bisquare_compact_support(d, h):
    assert (kernel_weight(d, h, "bisquare") == 0) == (d >= h)


def test_weight_vector_single_point():
    w = weight_vector((3.0, 4.0), [(3.0, 4.0)], SpatialWeightScheme.fixed(1.0))
    np.testing.assert_array_equal(w, [1.0])


def test_weight_vector_collinear_fixed():
    coords = [(0, 0), (1, 0), (2, 0)]
    w = weight_vector((0, 0), coords, SpatialWeightScheme.fixed(2.0))
    np.testing.assert_array_equal(w, [1.0, 0.5625, 0.0])


def test_weight_vector_adaptive_unit_square():
    coords = [(0, 0), (1, 0), (0, 1), (1, 1)]
    w = weight_vector((0, 0), coords, SpatialWeightScheme.adaptive(2))
    np.testing.assert_array_equal(w, [1.0, 0.0, 0.0, 0.0])


def test_adaptive_k_too_large():
    coords = [(0, 0), (1, 0), (0, 1)]
    with pytest.raises(InvalidBandwidthError):
        weight_vector((0, 0), coords, SpatialWeightScheme.adaptive(3))
    with pytest.raises(InvalidBandwidthError):
        weight_matrix(coords, SpatialWeightScheme.adaptive(3))


def test_scheme_validation():
    with pytest.raises(InvalidBandwidthError):
        SpatialWeightScheme(kernel="bisquare")
    with pytest.raises(InvalidBandwidthError):
        SpatialWeightScheme.fixed(-2.0)
    with pytest.raises(InvalidBandwidthError):
        SpatialWeightScheme(bandwidth=1.0, neighbors=3)
    with pytest.raises(ValueError):
        SpatialWeightScheme.fixed(1.0, kernel="tricube")


def test_duplicate_coordinates_get_full_weight():
    coords = [(0, 0), (0, 0), (2, 0)]
    w = weight_vector((0, 0), coords, SpatialWeightScheme.fixed(1.0), target_index=0)
    np.testing.assert_array_equal(w, [1.0, 1.0, 0.0])


def test_scaled_scheme():
    assert SpatialWeightScheme.fixed(2.0).scaled(1.5).bandwidth == 3.0
    assert SpatialWeightScheme.adaptive(10).scaled(1.2).neighbors == 12


coords_strategy = st.lists(st.tuples(st.integers(0, 12), st.integers(0, 12)), min_size=5, max_size=25, unique=True)


@settings(max_examples=50, deadline=None)
@given(coords=coords_strategy, k=st.integers(1, 4), kernel=st.sampled_from(["bisquare", "gaussian"]))
def test_weight_matrix_rows_match_weight_vector(coords, k, kernel):
    coords = np.array(coords, dtype=float)
    scheme = SpatialWeightScheme.adaptive(k, kernel)
    W = weight_matrix(coords, scheme)
    for i, c in enumerate(coords):
        np.testing.assert_array_equal(W[i], weight_vector(c, coords, scheme, target_index=i))
        assert W[i, i] == 1.0
    assert np.all((W >= 0) & (W <= 1))


@settings(max_examples=50, deadline=None)
@given(coords=coords_strategy, k=st.integers(1, 4))
def test_adaptive_support(coords, k):
    coords = np.array(coords, dtype=float)
    D = distance_matrix(coords)
    for kernel in ("gaussian", "bisquare"):
        W = weight_matrix(coords, SpatialWeightScheme.adaptive(k, kernel))
        for i in range(len(coords)):
            others = np.delete(D[i], i)
            h = np.sort(others)[k - 1]
            positive_others = np.count_nonzero(np.delete(W[i], i) > 0)
            if kernel == "gaussian":
                assert positive_others >= k
            else:
                assert positive_others == np.count_nonzero(others < h)


@settings(max_examples=30, deadline=None)
@given(coords=coords_strategy, seed=st.integers(0, 2**16))
def test_permutation_equivariance(coords, seed):
    coords = np.array(coords, dtype=float)
    perm = np.random.default_rng(seed).permutation(len(coords))
    for scheme in (SpatialWeightScheme.fixed(3.5), SpatialWeightScheme.adaptive(3, "gaussian")):
        W = weight_matrix(coords, scheme)
        Wp = weight_matrix(coords[perm], scheme)
        np.testing.assert_array_equal(Wp, W[np.ix_(perm, perm)])
