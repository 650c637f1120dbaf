"""Tests of the log-likelihood, its maximization and the Fisher matrix."""

import numpy as np
import pytest

from apf_poisson.data_classes.dataset import Dataset, Trajectory
from apf_poisson.data_classes.errors import (
    EmptyDatasetError,
    NonConvergenceError,
    SingularFisherError,
)
from apf_poisson.data_classes.intensity import (
    BaseIntensityModel,
    GaussianBase,
    LogisticBase,
    ShiftScaleParams,
    ThetaBox,
)
from apf_poisson.data_classes.results import FitOptions
from apf_poisson.modules.estimate import fisher_star, fit_mle, log_likelihood, score
from apf_poisson.modules.math_utils import (
    derive_rng,
    derive_seed,
    numerical_gradient,
)
from apf_poisson.modules.simulators import sample_dataset
from apf_poisson.modules.testkit import mle_covariance_study
from tests.conftest import (
    GAUSS2_FISHER_DIAG,
    GAUSS2_MASS,
    TEST_RTOL,
    TEST_SEED,
    THETA_NULL,
    empty_dataset,
    gumbel_table,
)

EULER_GAMMA = 0.5772156649015329


class FlatScoreBase(GaussianBase):
    """Gaussian base whose log-derivative is reported as zero."""

    def dlog_lambda0(self, s):
        """Return zeros."""
        return np.zeros_like(np.asarray(s, dtype=float))


def test_log_likelihood_without_events(gauss2: GaussianBase) -> None:
    """Test that only the compensator remains without events."""
    # Act
    value = log_likelihood(gauss2, THETA_NULL, empty_dataset(3))

    # Assert
    np.testing.assert_allclose(
        value, -3 * THETA_NULL.beta * GAUSS2_MASS, rtol=TEST_RTOL
    )


def test_log_likelihood_single_event(gauss2: GaussianBase) -> None:
    """Test one event at the shift with unit scale."""
    # Arrange
    dataset = Dataset(trajectories=(Trajectory(np.array([0.3])),), model_id="gauss2")

    # Act
    value = log_likelihood(gauss2, ShiftScaleParams(0.3, 1.0), dataset)

    # Assert
    np.testing.assert_allclose(value, np.log(2.0) - GAUSS2_MASS, rtol=1e-12)


def test_log_likelihood_is_shift_invariant(logistic5: LogisticBase) -> None:
    """Test that shifting data and parameter together keeps the likelihood."""
    # Arrange
    dataset = sample_dataset(logistic5, THETA_NULL, 40, TEST_SEED)
    offset = 3.25
    moved = ShiftScaleParams(THETA_NULL.alpha + offset, THETA_NULL.beta)

    # Act
    original = log_likelihood(logistic5, THETA_NULL, dataset)
    shifted = log_likelihood(logistic5, moved, dataset.shifted(offset))

    # Assert
    np.testing.assert_allclose(shifted, original, rtol=1e-10)


def test_score_without_events(gauss2: GaussianBase) -> None:
    """Test the score of a dataset without events."""
    # Act
    value = score(gauss2, THETA_NULL, empty_dataset(4))

    # Assert
    np.testing.assert_allclose(value, [0.0, -4 * GAUSS2_MASS], atol=1e-12)


def test_gaussian_score_closed_form(
    gauss2: GaussianBase, tiny_dataset: Dataset
) -> None:
    """Test the Gaussian score ``(sum s / beta, sum s**2 / beta - n * L)``."""
    # Arrange
    s = (tiny_dataset.pooled_events - THETA_NULL.alpha) / THETA_NULL.beta
    expected = [
        np.sum(s) / THETA_NULL.beta,
        np.sum(s**2) / THETA_NULL.beta - tiny_dataset.n * GAUSS2_MASS,
    ]

    # Act
    value = score(gauss2, THETA_NULL, tiny_dataset)

    # Assert
    np.testing.assert_allclose(value, expected, rtol=1e-12)


@pytest.mark.parametrize("model_cls", [GaussianBase, LogisticBase])
def test_score_matches_finite_differences(model_cls: type[BaseIntensityModel]) -> None:
    """Test the analytic score against the numerical gradient at random parameters."""
    # Arrange
    model = model_cls()
    dataset = sample_dataset(model, THETA_NULL, 30, TEST_SEED)
    rng = derive_rng(TEST_SEED, 99)

    for _ in range(20):
        theta = ShiftScaleParams(rng.uniform(0.0, 4.0), rng.uniform(0.8, 2.5))

        # Act
        analytic = score(model, theta, dataset)
        numeric = numerical_gradient(
            lambda x: log_likelihood(model, ShiftScaleParams(x[0], x[1]), dataset),
            theta.as_array(),
        )

        # Assert
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-4)


def test_fit_recovers_the_parameter(gauss2: GaussianBase) -> None:
    """Test the estimate on a large simulated dataset."""
    # Arrange
    dataset = sample_dataset(gauss2, THETA_NULL, 2000, TEST_SEED)

    # Act
    fit = fit_mle(gauss2, dataset)

    # Assert
    np.testing.assert_allclose(
        fit.theta_hat.as_array(), THETA_NULL.as_array(), atol=0.15
    )
    assert fit.score_norm <= 1e-6 * (1.0 + abs(fit.loglik))
    assert not fit.boundary_hit
    assert fit.starts_tried == FitOptions().num_starts


def test_fit_is_shift_equivariant(logistic5: LogisticBase) -> None:
    """Test that shifting data and box shifts the estimate."""
    # Arrange
    dataset = sample_dataset(logistic5, THETA_NULL, 200, TEST_SEED)
    box = ThetaBox((-5.0, 5.0), (0.3, 5.0))
    offset = 3.25

    # Act
    original = fit_mle(logistic5, dataset, box)
    shifted = fit_mle(logistic5, dataset.shifted(offset), box.shifted(offset))

    # Assert
    np.testing.assert_allclose(
        shifted.theta_hat.alpha, original.theta_hat.alpha + offset, atol=1e-6
    )
    np.testing.assert_allclose(
        shifted.theta_hat.beta, original.theta_hat.beta, atol=1e-6
    )


def test_fit_rejects_datasets_without_events(gauss2: GaussianBase) -> None:
    """Test that the likelihood of an empty dataset is not maximized."""
    # Act / Assert
    with pytest.raises(EmptyDatasetError):
        _ = fit_mle(gauss2, empty_dataset(5))


def test_fit_reports_non_convergence(gauss2: GaussianBase) -> None:
    """Test that an exhausted iteration cap is an error."""
    # Arrange
    dataset = sample_dataset(gauss2, THETA_NULL, 100, TEST_SEED)

    # Act / Assert
    with pytest.raises(NonConvergenceError):
        _ = fit_mle(gauss2, dataset, options=FitOptions(max_iter=2))


def test_fit_flags_boundary_estimates(gauss2: GaussianBase) -> None:
    """Test that an estimate pinned to the box edge is flagged."""
    # Arrange
    dataset = sample_dataset(gauss2, THETA_NULL, 200, TEST_SEED)
    box = ThetaBox((-1.0, 1.0), (0.2, 8.0))

    # Act
    fit = fit_mle(gauss2, dataset, box)

    # Assert
    assert fit.boundary_hit
    np.testing.assert_allclose(fit.theta_hat.alpha, 1.0, atol=1e-4)


def test_gaussian_fisher_star(gauss2: GaussianBase) -> None:
    """Test the Fisher matrix of the Gaussian base, ``L * diag(1, 3)``."""
    # Act
    fisher = fisher_star(gauss2)

    # Assert
    np.testing.assert_allclose(
        np.diag(fisher.matrix), GAUSS2_FISHER_DIAG, rtol=TEST_RTOL
    )
    np.testing.assert_allclose(fisher.matrix[0, 1], 0.0, atol=1e-10)
    np.testing.assert_allclose(fisher.det, 24.0 * np.pi, rtol=TEST_RTOL)


def test_symmetric_base_has_diagonal_fisher_star(logistic5: LogisticBase) -> None:
    """Test that a symmetric base decouples shift and scale."""
    # Act
    fisher = fisher_star(logistic5)

    # Assert
    np.testing.assert_allclose(fisher.matrix[0, 1], 0.0, atol=1e-10)
    np.testing.assert_allclose(fisher.matrix[0, 0], 5.0 / 3.0, rtol=TEST_RTOL)
    assert fisher.det > 0.0


def test_asymmetric_base_couples_shift_and_scale() -> None:
    """Test the Fisher matrix of the tabulated Gumbel base."""
    # Act
    fisher = fisher_star(gumbel_table())

    # Assert
    np.testing.assert_allclose(fisher.matrix[0, 0], 3.0, rtol=1e-3)
    np.testing.assert_allclose(
        fisher.matrix[0, 1], 3.0 * (EULER_GAMMA - 1.0), rtol=1e-3
    )
    np.testing.assert_array_equal(fisher.matrix, fisher.matrix.T)


def test_singular_fisher_star() -> None:
    """Test that a base without parameter information is rejected."""
    # Act / Assert
    with pytest.raises(SingularFisherError):
        _ = fisher_star(FlatScoreBase())


@pytest.mark.slow
def test_estimation_error_covariance(gauss2: GaussianBase) -> None:
    """Test that the normalized estimation error has covariance ``I*^-1``."""
    # Act
    study = mle_covariance_study(
        gauss2, THETA_NULL, n=2000, replicates=500, seed=TEST_SEED, threads=4
    )

    # Assert
    assert study.boundary_hits == 0
    assert study.relative_frobenius < 0.15
    assert 0.85 < study.second_moment_ratio < 1.15


@pytest.mark.slow
def test_estimate_is_consistent(gauss2: GaussianBase) -> None:
    """Test that the median estimation error shrinks as the sample size grows."""
    # Arrange
    replicates = 200
    truth = THETA_NULL.as_array()

    def median_error(n: int) -> float:
        errors = []
        for i in range(replicates):
            seed = derive_seed(TEST_SEED, n, i)
            fit = fit_mle(gauss2, sample_dataset(gauss2, THETA_NULL, n, seed))
            errors.append(np.linalg.norm(fit.theta_hat.as_array() - truth))
        return float(np.median(errors))

    # Act
    small = median_error(200)
    large = median_error(2000)

    # Assert
    assert large < 0.5 * small
