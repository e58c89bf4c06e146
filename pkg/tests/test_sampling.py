import numpy as np
import pytest

from wassreg.sampling import SeedSpec, as_generator, sample_directions


def test_one_dimensional_directions_are_signs():
    th = sample_directions(1, 4, SeedSpec(0))
    assert th.shape == (4, 1)
    assert set(np.abs(th).ravel()) == {1.0}


def test_unit_norm():
    th = sample_directions(3, 100, SeedSpec(1))
    np.testing.assert_allclose(np.linalg.norm(th, axis=1), 1.0, atol=1e-12)


def test_rotational_symmetry():
    th = sample_directions(2, 100_000, SeedSpec(2))
    assert np.all(np.abs(th.mean(axis=0)) < 0.02)


def test_streams_are_deterministic_and_distinct():
    a = sample_directions(5, 10, SeedSpec(7, 3))
    np.testing.assert_array_equal(a, sample_directions(5, 10, SeedSpec(7, 3)))
    assert not np.array_equal(a, sample_directions(5, 10, SeedSpec(7, 4)))
    assert not np.array_equal(a, sample_directions(5, 10, SeedSpec(8, 3)))


def test_as_generator_accepts_ints_and_generators():
    g = np.random.default_rng(0)
    assert as_generator(g) is g
    assert as_generator(5).random() == as_generator(SeedSpec(5)).random()


@pytest.mark.parametrize("d, L", [(0, 3), (3, 0)])
def test_bad_sizes(d, L):
    with pytest.raises(ValueError):
        sample_directions(d, L, SeedSpec(0))
