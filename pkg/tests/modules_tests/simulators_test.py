"""Tests of the trajectory simulator and the empirical mean function."""

import numpy as np
import pytest
from scipy.special import ndtr
from scipy.stats import kstest

from apf_poisson.data_classes.intensity import (
    GaussianBase,
    LogisticBase,
    ShiftScaleParams,
)
from apf_poisson.modules.family import family_mean
from apf_poisson.modules.math_utils import derive_rng
from apf_poisson.modules.simulators import (
    bimodal_alternative,
    empirical_mean,
    sample_dataset,
    sample_trajectory,
)
from apf_poisson.modules.statistic import cvm_statistic
from tests.conftest import GAUSS2_MASS, TEST_SEED, THETA_NULL


def test_sample_trajectory_is_sorted(logistic5: LogisticBase) -> None:
    """Test that simulated events are sorted and finite."""
    # Act
    trajectory = sample_trajectory(logistic5, THETA_NULL, derive_rng(TEST_SEED, 0))

    # Assert
    assert np.all(np.diff(trajectory.events) >= 0.0)
    assert np.all(np.isfinite(trajectory.events))


def test_mean_event_count(gauss2: GaussianBase) -> None:
    """Test that the mean count per trajectory is ``beta * Lambda0(inf)``."""
    # Arrange
    n = 2000
    expected = THETA_NULL.beta * GAUSS2_MASS

    # Act
    dataset = sample_dataset(gauss2, THETA_NULL, n, TEST_SEED)

    # Assert
    mean_count = dataset.total_events / n
    assert abs(mean_count - expected) < 4.0 * np.sqrt(expected / n)


def test_event_distribution(gauss2: GaussianBase) -> None:
    """Test that pooled events at ``(0, 1)`` follow the normal distribution."""
    # Act
    dataset = sample_dataset(gauss2, ShiftScaleParams(0.0, 1.0), 20_000, TEST_SEED)

    # Assert
    assert dataset.total_events > 90_000
    assert kstest(dataset.pooled_events, ndtr).statistic < 0.01


def test_count_variance_is_poisson(gauss2: GaussianBase) -> None:
    """Test that the count at the shift has variance equal to its mean."""
    # Arrange
    expected = float(family_mean(gauss2, THETA_NULL, THETA_NULL.alpha))

    # Act
    dataset = sample_dataset(gauss2, THETA_NULL, 20_000, TEST_SEED)
    counts = np.array([traj.count(THETA_NULL.alpha) for traj in dataset.trajectories])

    # Assert
    np.testing.assert_allclose(counts.mean(), expected, rtol=0.03)
    np.testing.assert_allclose(counts.var(ddof=1), expected, rtol=0.05)


def test_dataset_does_not_depend_on_threads(logistic5: LogisticBase) -> None:
    """Test that the worker count leaves the dataset unchanged."""
    # Act
    serial = sample_dataset(logistic5, THETA_NULL, 200, TEST_SEED, threads=1)
    threaded = sample_dataset(logistic5, THETA_NULL, 200, TEST_SEED, threads=3)

    # Assert
    assert serial.n == threaded.n == 200
    for first, second in zip(serial.trajectories, threaded.trajectories, strict=True):
        np.testing.assert_array_equal(first.events, second.events)


def test_seeds_give_different_datasets(gauss2: GaussianBase) -> None:
    """Test that different seeds give different data."""
    # Act
    first = sample_dataset(gauss2, THETA_NULL, 50, 1)
    second = sample_dataset(gauss2, THETA_NULL, 50, 2)

    # Assert
    assert first.seed == 1
    assert first.theta_true == THETA_NULL
    assert not np.array_equal(first.pooled_events, second.pooled_events)


def test_faint_intensity_gives_empty_trajectories() -> None:
    """Test that a vanishing mass yields empty trajectories the statistics accept."""
    # Arrange
    faint = GaussianBase(model_id="faint", amplitude=1e-14)
    theta = ShiftScaleParams(0.0, 1.0)
    n = 8

    # Act
    trajectory = sample_trajectory(faint, theta, derive_rng(TEST_SEED, 0))
    dataset = sample_dataset(faint, theta, n, TEST_SEED)
    value = cvm_statistic(faint, dataset, theta)
    means = empirical_mean(dataset, np.array([-1.0, 0.0, 1.0]))

    # Assert
    assert trajectory.events.shape == (0,)
    assert dataset.total_events == 0
    assert np.isfinite(value.delta)
    np.testing.assert_allclose(value.delta, n * faint.Lambda0_total**3 / 3.0)
    np.testing.assert_array_equal(means, np.zeros(3))
    assert empirical_mean(dataset, 0.0) == 0.0

@pytest.mark.parametrize("n", [0, -3])
def test_sample_dataset_needs_trajectories(gauss2: GaussianBase, n: int) -> None:
    """Test that at least one trajectory is required."""
    # Act / Assert
    with pytest.raises(ValueError):
        _ = sample_dataset(gauss2, THETA_NULL, n, TEST_SEED)


def test_empirical_mean(tiny_dataset) -> None:
    """Test the right-continuous empirical mean function."""
    # Act
    scalar = empirical_mean(tiny_dataset, 2.0)
    values = empirical_mean(tiny_dataset, np.array([0.0, 1.0, 2.5, 3.0]))

    # Assert
    assert isinstance(scalar, float)
    assert scalar == 1.0
    np.testing.assert_array_equal(values, [0.0, 0.5, 1.0, 1.5])


def test_empirical_mean_is_unbiased(gauss2: GaussianBase) -> None:
    """Test the empirical mean against the family mean."""
    # Arrange
    n, t = 4000, 2.5
    expected = float(family_mean(gauss2, THETA_NULL, t))

    # Act
    dataset = sample_dataset(gauss2, THETA_NULL, n, TEST_SEED + 1)

    # Assert
    assert abs(empirical_mean(dataset, t) - expected) < 4.0 * np.sqrt(expected / n)


def test_bimodal_alternative() -> None:
    """Test the two-bump alternative intensity."""
    # Act
    model = bimodal_alternative()

    # Assert
    assert model.model_id == "bimodal"
    np.testing.assert_allclose(model.lambda0(np.array([0.0, 6.0])), 1.0, rtol=1e-6)
    assert model.lambda0(3.0) < 0.03
    np.testing.assert_allclose(
        model.Lambda0_total, 2.0 * np.sqrt(2.0 * np.pi), rtol=1e-5
    )
