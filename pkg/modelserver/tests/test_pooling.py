import numpy as np
import pytest

from modelserver.pooling import AllMasked, mean_pool


def test_arithmetic_mean():
    assert mean_pool([(1, 3), (3, 1)], [1, 1]).tolist() == [2.0, 2.0]


def test_mask_selects_subset():
    assert mean_pool([(1, 3), (3, 1)], [1, 0]).tolist() == [1.0, 3.0]


def test_all_masked():
    with pytest.raises(AllMasked):
        mean_pool([(1, 3), (3, 1)], [0, 0])


def test_mask_length_mismatch():
    with pytest.raises(ValueError):
        mean_pool([(1, 2)], [1, 0])


def test_copies_of_same_vector_pool_to_it():
    v = np.array([0.5, -1.5, 2.0])
    stacked = np.stack([v] * 5)
    for mask in ([1, 1, 1, 1, 1], [0, 1, 0, 1, 0], [1, 0, 0, 0, 0]):
        assert mean_pool(stacked, mask) == pytest.approx(v)


def test_permutation_invariant_over_selected_positions():
    rng = np.random.default_rng(3)
    vectors = rng.standard_normal((6, 4))
    mask = [1, 0, 1, 1, 0, 1]
    base = mean_pool(vectors, mask)
    order = [2, 5, 0, 3]
    shuffled = np.stack([vectors[i] for i in order])
    assert mean_pool(shuffled, [1, 1, 1, 1]) == pytest.approx(base)
