import numpy as np
import pytest

from rccdbg.cluster.distance import distance_matrix


def test_identical_heatmaps_have_zero_distance():
    dm = distance_matrix(["a", "b"], [np.array([1.0, 2.0]), np.array([1.0, 2.0])])
    assert dm.d[0, 1] == 0.0


def test_three_four_five_triangle():
    dm = distance_matrix(["a", "b"], [np.array([0.0, 0.0]), np.array([3.0, 4.0])])
    assert dm.d[0, 1] == 5.0


def test_matrix_is_symmetric_with_zero_diagonal():
    rng = np.random.default_rng(0)
    dm = distance_matrix([f"i{k}" for k in range(8)], list(rng.uniform(size=(8, 5))))
    dm.validate()  # exact symmetry, zero diagonal, finite, non-negative


def test_parallel_equals_sequential_bitwise():
    rng = np.random.default_rng(1)
    ids = [f"i{k}" for k in range(20)]
    vectors = list(rng.uniform(size=(20, 16)))
    seq = distance_matrix(ids, vectors, workers=1)
    par = distance_matrix(ids, vectors, workers=4)
    assert np.array_equal(seq.d, par.d)


def test_length_mismatch_names_both_ids():
    with pytest.raises(ValueError) as err:
        distance_matrix(["short", "long"], [np.zeros(3), np.zeros(5)])
    assert "short" in str(err.value) and "long" in str(err.value)


def test_fewer_than_two_rejected():
    with pytest.raises(ValueError, match="at least 2"):
        distance_matrix(["only"], [np.zeros(3)])


def test_triangle_inequality_holds():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n = int(rng.integers(3, 9))
        dm = distance_matrix([f"i{k}" for k in range(n)], list(rng.uniform(size=(n, 4))))
        d = dm.d
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    assert d[i, j] <= d[i, k] + d[k, j] + 1e-9
