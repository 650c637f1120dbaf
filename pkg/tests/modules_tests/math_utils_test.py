"""Tests of the shared numerical helpers."""

import json

import numpy as np
import pytest

from apf_poisson.modules.math_utils import (
    bootstrap_quantile_stderr,
    config_hash,
    derive_rng,
    derive_seed,
    dump_json,
    map_chunks,
    monotone_inverse,
    numerical_gradient,
    quantile_type7,
    symmetrize_matrix,
    wilson_interval,
)
from tests.conftest import TEST_DECIMALS_ACCURACY, TEST_SEED


def test_symmetrize_matrix() -> None:
    """Test symmetrizing a square matrix."""
    # Arrange
    matrix = np.array([[1.0, 2.0], [0.0, 3.0]])

    # Act
    symmetric = symmetrize_matrix(matrix)

    # Assert
    np.testing.assert_array_equal(symmetric, [[1.0, 1.0], [1.0, 3.0]])


def test_symmetrize_matrix_nonsquare() -> None:
    """Test that non-square matrices are rejected."""
    # Act / Assert
    with np.testing.assert_raises(ValueError):
        _ = symmetrize_matrix(np.ones((3, 2)))


def test_numerical_gradient_of_quadratic() -> None:
    """Test central differences on a quadratic form."""
    # Arrange
    matrix = np.array([[2.0, 0.5], [0.5, 1.0]])
    x = np.array([1.5, -2.0])

    def fun(y: np.ndarray) -> float:
        return float(0.5 * y @ matrix @ y)

    # Act
    gradient = numerical_gradient(fun, x)

    # Assert
    np.testing.assert_array_almost_equal(
        gradient, matrix @ x, decimal=TEST_DECIMALS_ACCURACY
    )


@pytest.mark.parametrize(
    ("target", "expected"), [(2.0, 1.0), (10.0, 2.0), (-30.0, -3.0)]
)
def test_monotone_inverse_scalar(target: float, expected: float) -> None:
    """Test inverting ``x + x^3`` at scalar targets."""
    # Act
    x = monotone_inverse(lambda y: y + y**3, lambda y: 1.0 + 3.0 * y**2, target)

    # Assert
    assert isinstance(x, float)
    np.testing.assert_allclose(x, expected, atol=1e-10)


def test_monotone_inverse_keeps_shape() -> None:
    """Test that array targets keep their shape."""
    # Arrange
    targets = np.array([[0.0, 2.0], [10.0, 68.0]])

    # Act
    x = monotone_inverse(lambda y: y + y**3, lambda y: 1.0 + 3.0 * y**2, targets)

    # Assert
    np.testing.assert_allclose(x, [[0.0, 1.0], [2.0, 4.0]], atol=1e-10)


def test_monotone_inverse_resolves_flat_functions() -> None:
    """Test that the argument is accurate where the function is nearly flat."""
    # Arrange
    scale = 1e-7
    targets = scale * np.array([2.0, 10.0, 68.0])

    # Act
    x = monotone_inverse(
        lambda y: scale * (y + y**3), lambda y: scale * (1.0 + 3.0 * y**2), targets
    )

    # Assert
    np.testing.assert_allclose(x, [1.0, 2.0, 4.0], atol=1e-10)


def test_monotone_inverse_unbracketable_target() -> None:
    """Test that targets outside the range are reported."""
    # Act / Assert
    with pytest.raises(ValueError, match="bracket"):
        _ = monotone_inverse(np.tanh, lambda y: 1.0 - np.tanh(y) ** 2, 2.0, max_iter=50)


def test_derive_rng_is_deterministic() -> None:
    """Test that equal keys give equal streams and different keys do not."""
    # Act
    first = derive_rng(TEST_SEED, 3).random(5)
    again = derive_rng(TEST_SEED, 3).random(5)
    other = derive_rng(TEST_SEED, 4).random(5)

    # Assert
    np.testing.assert_array_equal(first, again)
    assert not np.allclose(first, other)


def test_derive_rng_rejects_negative_seed() -> None:
    """Test that seeds must be non-negative."""
    # Act / Assert
    with pytest.raises(ValueError):
        _ = derive_rng(-1)


def test_derive_seed() -> None:
    """Test derived child seeds."""
    # Act
    seeds = [derive_seed(TEST_SEED, ii) for ii in range(10)]

    # Assert
    assert seeds == [derive_seed(TEST_SEED, ii) for ii in range(10)]
    assert len(set(seeds)) == 10
    assert all(0 <= seed < 2**64 for seed in seeds)


@pytest.mark.parametrize("threads", [1, 3])
def test_map_chunks_keeps_order(threads: int) -> None:
    """Test that chunk results come back in index order."""
    # Act
    chunks = map_chunks(lambda start, stop: list(range(start, stop)), 23, 5, threads)

    # Assert
    assert len(chunks) == 5
    assert [item for chunk in chunks for item in chunk] == list(range(23))


def test_quantile_type7() -> None:
    """Test linearly interpolated quantiles."""
    # Act
    quantiles = quantile_type7(np.array([4.0, 1.0, 3.0, 2.0]), [0.25, 0.5, 1.0])

    # Assert
    np.testing.assert_allclose(quantiles, [1.75, 2.5, 4.0])


def test_bootstrap_stderr_of_constant_sample() -> None:
    """Test that a constant sample has no quantile uncertainty."""
    # Act
    stderr = bootstrap_quantile_stderr(
        np.full(50, 2.0), [0.5, 0.9], derive_rng(TEST_SEED), resamples=20
    )

    # Assert
    np.testing.assert_array_equal(stderr, [0.0, 0.0])


def test_bootstrap_stderr_of_median() -> None:
    """Test the bootstrap standard error of a normal median against its asymptote."""
    # Arrange
    sample = derive_rng(TEST_SEED, 1).standard_normal(2000)
    asymptote = np.sqrt(np.pi / 2.0 / 2000)

    # Act
    stderr = bootstrap_quantile_stderr(sample, [0.5], derive_rng(TEST_SEED, 2))

    # Assert
    assert 0.6 * asymptote < stderr[0] < 1.5 * asymptote


def test_wilson_interval() -> None:
    """Test the Wilson interval of a proportion."""
    # Act
    low, high = wilson_interval(5, 100)
    zero_low, zero_high = wilson_interval(0, 100)

    # Assert
    assert low < 0.05 < high
    np.testing.assert_allclose((low, high), (0.02154, 0.11175), atol=1e-4)
    assert zero_low == pytest.approx(0.0, abs=1e-12)
    assert zero_high > 0.0


def test_wilson_interval_without_trials() -> None:
    """Test that an interval needs trials."""
    # Act / Assert
    with pytest.raises(ValueError):
        _ = wilson_interval(0, 0)


def test_config_hash_ignores_key_order() -> None:
    """Test the canonical form of the configuration digest."""
    # Act
    first = config_hash({"a": 1, "b": [1.0, 2.0]})
    second = config_hash({"b": [1.0, 2.0], "a": 1})
    other = config_hash({"a": 2, "b": [1.0, 2.0]})

    # Assert
    assert first == second
    assert first != other


def test_dump_json_handles_numpy_types() -> None:
    """Test serializing numpy scalars and arrays."""
    # Act
    text = dump_json(
        {"i": np.int64(3), "x": np.float64(0.5), "b": np.bool_(True), "a": np.eye(2)}
    )

    # Assert
    assert text.endswith("\n")
    assert json.loads(text) == {
        "i": 3,
        "x": 0.5,
        "b": True,
        "a": [[1.0, 0.0], [0.0, 1.0]],
    }
