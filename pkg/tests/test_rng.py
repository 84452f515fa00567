import numpy as np
import pytest

from cbnorm.rng import RandomSource


def test_same_stream_same_vectors():
    a = RandomSource(7, 3).gaussian_vectors(2, 50)
    b = RandomSource(7, 3).gaussian_vectors(2, 50)
    assert np.array_equal(a, b)


def test_streams_and_seeds_differ():
    base = RandomSource(7, 3).gaussian_vectors(1, 50)
    assert not np.array_equal(base, RandomSource(7, 4).gaussian_vectors(1, 50))
    assert not np.array_equal(base, RandomSource(8, 3).gaussian_vectors(1, 50))


def test_prefix_stable_in_count():
    # drawing more vectors does not change the first ones
    few = RandomSource(1, 9).gaussian_vectors(2, 30)
    many = RandomSource(1, 9).gaussian_vectors(5, 30)
    assert np.array_equal(few, many[:2])


def test_moments_look_standard_normal():
    x = np.concatenate([RandomSource(11, i).gaussian_vectors(1, 1000).ravel() for i in range(200)])
    assert abs(x.mean()) < 0.01
    assert abs(x.var() - 1.0) < 0.01


def test_cross_stream_correlation_small():
    a = np.array([RandomSource(2, i).gaussian_vectors(1, 1)[0, 0] for i in range(20000)])
    b = np.array([RandomSource(2, i + 1).gaussian_vectors(1, 1)[0, 0] for i in range(20000)])
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.03


def test_spawn_and_validation():
    assert RandomSource(5).spawn(2) == RandomSource(5, 2)
    with pytest.raises(ValueError):
        RandomSource(-1)
