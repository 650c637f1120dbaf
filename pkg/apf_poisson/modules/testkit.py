"""Goodness of fit test pipeline and the replicated studies built on it."""

from typing import Any

import numpy as np
from loguru import logger
from scipy.stats import ks_2samp

from apf_poisson.data_classes.dataset import Dataset
from apf_poisson.data_classes.errors import (
    InvalidEpsilonError,
    MissingEpsilonError,
    ModelMismatchError,
)
from apf_poisson.data_classes.intensity import (
    BaseIntensityModel,
    ShiftScaleParams,
    ThetaBox,
)
from apf_poisson.data_classes.results import (
    ApfResult,
    CovarianceStudy,
    FitOptions,
    SimpleTestReport,
    StudyResult,
    TestReport,
    ThresholdTable,
)
from apf_poisson.modules.estimate import fisher_star, fit_mle
from apf_poisson.modules.limit import sample_limit_batch
from apf_poisson.modules.math_utils import (
    config_hash,
    derive_seed,
    map_chunks,
    wilson_interval,
)
from apf_poisson.modules.simulators import sample_dataset
from apf_poisson.modules.statistic import cvm_simple, cvm_statistic
from config.definitions import (
    APF_DATASET_STREAM,
    CONFIDENCE_LEVEL,
    DATASET_CHUNK,
    DEFAULT_GRID_POINTS,
    DEFAULT_REPLICATES,
    LOG_DECIMALS,
    MIN_APF_REPLICATES,
    MIN_STUDY_REPLICATES,
    SIMPLE_TABLE_ID,
)


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 < epsilon < 1.0:
        msg = f"The test level must lie in (0, 1), got {epsilon}."
        logger.error(msg)
        raise InvalidEpsilonError(msg)


def _lookup_threshold(table: ThresholdTable, model_id: str, epsilon: float) -> float:
    """Return ``c_eps`` from a table calibrated for ``model_id``."""
    if table.model_id != model_id:
        msg = f"Threshold table is for '{table.model_id}', not '{model_id}'."
        logger.error(msg)
        raise ModelMismatchError(msg)
    threshold = table.threshold(epsilon)
    if threshold is None:
        msg = (
            f"Level {epsilon} is not in the table; "
            f"available levels: {table.epsilons}."
        )
        logger.error(msg)
        raise MissingEpsilonError(msg)
    return threshold


def run_test(
    model: BaseIntensityModel,
    dataset: Dataset,
    epsilon: float,
    table: ThresholdTable,
    theta_box: ThetaBox | None = None,
    options: FitOptions | None = None,
) -> TestReport:
    """Test whether the data come from some member of the shift/scale family.

    Fits the parameters, evaluates the statistic at the estimate and rejects when it
    exceeds the calibrated threshold.

    :param model: Base intensity model of the null family
    :param dataset: Observed trajectories
    :param epsilon: Test level
    :param table: Thresholds calibrated for ``model``
    :param theta_box: Admissible parameter box
    :param options: Search settings of the fit
    :return: Test report
    """
    c_epsilon = _lookup_threshold(table, model.model_id, epsilon)
    fit = fit_mle(model, dataset, theta_box, options)
    delta_hat = cvm_statistic(model, dataset, fit.theta_hat)
    warnings = ("boundary_hit",) if fit.boundary_hit else ()
    reject = delta_hat.delta > c_epsilon
    logger.debug(
        f"Statistic {round(delta_hat.delta, LOG_DECIMALS)} vs threshold "
        f"{round(c_epsilon, LOG_DECIMALS)}: {'reject' if reject else 'accept'}."
    )
    return TestReport(
        delta_hat=delta_hat,
        theta_hat=fit,
        epsilon=epsilon,
        c_epsilon=c_epsilon,
        reject=reject,
        warnings=warnings,
    )


def run_simple_test(
    model: BaseIntensityModel,
    dataset: Dataset,
    theta0: ShiftScaleParams,
    epsilon: float,
    table: ThresholdTable,
) -> SimpleTestReport:
    """Test whether the data come from the family member at the known ``theta0``."""
    c_epsilon = _lookup_threshold(table, SIMPLE_TABLE_ID, epsilon)
    delta_tilde = cvm_simple(dataset, model, theta0)
    return SimpleTestReport(
        delta_tilde=delta_tilde,
        theta0=theta0,
        epsilon=epsilon,
        c_epsilon=c_epsilon,
        reject=delta_tilde.delta > c_epsilon,
    )


def _rejection_study(
    model: BaseIntensityModel,
    data_model: BaseIntensityModel,
    data_params: ShiftScaleParams,
    n: int,
    replicates: int,
    epsilon: float,
    seed: int,
    table: ThresholdTable,
    theta_box: ThetaBox,
    options: FitOptions,
    scenario: dict[str, Any],
    threads: int,
) -> StudyResult:
    """Run the test on ``replicates`` datasets drawn from ``data_model``."""
    if replicates < MIN_STUDY_REPLICATES:
        msg = (
            f"A study needs at least {MIN_STUDY_REPLICATES} replicates, "
            f"got {replicates}."
        )
        logger.error(msg)
        raise ValueError(msg)
    _check_epsilon(epsilon)
    _lookup_threshold(table, model.model_id, epsilon)

    seeds = tuple(derive_seed(seed, i) for i in range(replicates))

    def _run_chunk(start: int, stop: int) -> list[tuple[bool, bool]]:
        outcomes = []
        for dataset_seed in seeds[start:stop]:
            dataset = sample_dataset(data_model, data_params, n, dataset_seed)
            report = run_test(model, dataset, epsilon, table, theta_box, options)
            outcomes.append((report.reject, bool(report.warnings)))
        return outcomes

    logger.info(f"Running {scenario['kind']} study with {replicates} replicates.")
    chunks = map_chunks(_run_chunk, replicates, DATASET_CHUNK, threads)
    outcomes = np.array([outcome for chunk in chunks for outcome in chunk], dtype=bool)
    rejects, boundary = outcomes[:, 0], outcomes[:, 1]

    interior = ~boundary
    rate_interior = float(np.mean(rejects[interior])) if interior.any() else None
    num_rejects = int(np.sum(rejects))
    result = StudyResult(
        scenario=scenario,
        replicates=replicates,
        rejects=num_rejects,
        rejection_rate=num_rejects / replicates,
        wilson_interval=wilson_interval(num_rejects, replicates, CONFIDENCE_LEVEL),
        boundary_hits=int(np.sum(boundary)),
        rejection_rate_interior=rate_interior,
        seeds=seeds,
        config_hash=config_hash(scenario),
    )
    logger.info(
        f"Rejection rate {round(result.rejection_rate, LOG_DECIMALS)} "
        f"({result.boundary_hits} boundary hits)."
    )
    return result


def _study_scenario(
    kind: str,
    model: BaseIntensityModel,
    n: int,
    replicates: int,
    epsilon: float,
    seed: int,
    table: ThresholdTable,
    theta_box: ThetaBox,
    options: FitOptions,
) -> dict[str, Any]:
    return {
        "kind": kind,
        "model_id": model.model_id,
        "n": n,
        "replicates": replicates,
        "epsilon": epsilon,
        "seed": seed,
        "table": {"M": table.M, "K": table.K, "seed": table.seed},
        "theta_box": theta_box.as_dict(),
        "fit_options": options.as_dict(),
        "independent_seeds": independent_seeds,
    }


def size_study(
    model: BaseIntensityModel,
    theta0: ShiftScaleParams,
    n: int,
    replicates: int,
    epsilon: float,
    seed: int,
    table: ThresholdTable,
    theta_box: ThetaBox | None = None,
    options: FitOptions | None = None,
    threads: int = 1,
) -> StudyResult:
    """Estimate the rejection rate of the test when the null hypothesis holds.

    Replicate ``i`` draws its dataset with the seed derived from ``(seed, i)``.

    :param model: Base intensity model
    :param theta0: True parameter of the simulated data
    :param n: Trajectories per dataset
    :param replicates: Number of datasets
    :param epsilon: Test level
    :param seed: Root seed
    :param table: Thresholds calibrated for ``model``
    :param theta_box: Admissible parameter box
    :param options: Search settings of the fit
    :param threads: Worker count
    :return: Rejection rate with its Wilson interval
    """
    theta_box = theta_box or ThetaBox()
    options = options or FitOptions()
    scenario = _study_scenario(
        "size", model, n, replicates, epsilon, seed, table, theta_box, options
    )
    scenario["theta0"] = theta0.as_list()
    return _rejection_study(
        model,
        data_model=model,
        data_params=theta0,
        n=n,
        replicates=replicates,
        epsilon=epsilon,
        seed=seed,
        table=table,
        theta_box=theta_box,
        options=options,
        scenario=scenario,
        threads=threads,
    )


def power_study(
    model_null: BaseIntensityModel,
    alt_model: BaseIntensityModel,
    n: int,
    replicates: int,
    epsilon: float,
    seed: int,
    table: ThresholdTable,
    alt_params: ShiftScaleParams | None = None,
    theta_box: ThetaBox | None = None,
    options: FitOptions | None = None,
    threads: int = 1,
) -> StudyResult:
    """Estimate the rejection rate when the data follow another intensity.

    The alternative intensity is ``alt_model`` placed at ``alt_params``, by default
    unshifted and unscaled.

    :param model_null: Base intensity model of the null family
    :param alt_model: Intensity of the simulated data
    :param n: Trajectories per dataset
    :param replicates: Number of datasets
    :param epsilon: Test level
    :param seed: Root seed
    :param table: Thresholds calibrated for ``model_null``
    :param alt_params: Shift and scale applied to the alternative
    :param theta_box: Admissible parameter box
    :param options: Search settings of the fit
    :param threads: Worker count
    :return: Rejection rate with its Wilson interval
    """
    alt_params = alt_params or ShiftScaleParams(0.0, 1.0)
    theta_box = theta_box or ThetaBox()
    options = options or FitOptions()
    scenario = _study_scenario(
        "power", model_null, n, replicates, epsilon, seed, table, theta_box, options
    )
    scenario["alternative"] = {
        "model_id": alt_model.model_id,
        "params": alt_params.as_list(),
    }
    return _rejection_study(
        model_null,
        data_model=alt_model,
        data_params=alt_params,
        n=n,
        replicates=replicates,
        epsilon=epsilon,
        seed=seed,
        table=table,
        theta_box=theta_box,
        options=options,
        scenario=scenario,
        threads=threads,
    )


def _statistic_samples(
    model: BaseIntensityModel,
    thetas: list[ShiftScaleParams],
    n: int,
    replicates: int,
    seed: int,
    theta_box: ThetaBox,
    options: FitOptions,
    threads: int,
    independent_seeds: bool = False,
) -> list[np.ndarray]:
    """Fitted statistic of replicate ``i`` at every parameter.

    All parameters share the dataset seed ``(seed, i)`` of replicate ``i`` unless
    ``independent_seeds`` gives parameter ``k`` the substream
    ``(APF_DATASET_STREAM, k, i)``.
    """

    def _run_chunk(start: int, stop: int) -> list[list[float]]:
        rows = []
        for i in range(start, stop):
            row = []
            for k, theta in enumerate(thetas):
                key = (APF_DATASET_STREAM, k, i) if independent_seeds else (i,)
                dataset_seed = derive_seed(seed, *key)
                dataset = sample_dataset(model, theta, n, dataset_seed)
                fit = fit_mle(model, dataset, theta_box, options)
                row.append(cvm_statistic(model, dataset, fit.theta_hat).delta)
            rows.append(row)
        return rows

    chunks = map_chunks(_run_chunk, replicates, DATASET_CHUNK, threads)
    table = np.array([row for chunk in chunks for row in chunk])
    return [table[:, k] for k in range(len(thetas))]


def apf_check(
    model: BaseIntensityModel,
    theta_list: list[ShiftScaleParams],
    n: int,
    replicates: int,
    seed: int,
    M: int = DEFAULT_REPLICATES,
    K: int = DEFAULT_GRID_POINTS,
    theta_box: ThetaBox | None = None,
    options: FitOptions | None = None,
    threads: int = 1,
    independent_seeds: bool = False,
) -> ApfResult:
    """Compare the laws of the fitted statistic at several true parameters.

    Every pair of parameters gets a two-sample Kolmogorov-Smirnov test, and every
    sample is compared with ``M`` draws of the limit variable.

    By default replicate ``i`` draws its datasets from the same seed at every
    parameter. The samples are then dependent, so the pairwise p-values, which
    assume independent samples, are conservative; a pure shift gives two nearly
    identical samples. ``independent_seeds`` draws every parameter from its own
    substream and makes the pairwise p-values exact.

    :param model: Base intensity model
    :param theta_list: At least two true parameters
    :param n: Trajectories per dataset
    :param replicates: Datasets per parameter
    :param seed: Root seed
    :param M: Number of limit draws
    :param K: Grid cells per limit draw
    :param theta_box: Admissible parameter box
    :param options: Search settings of the fit
    :param threads: Worker count
    :param independent_seeds: Draw every parameter from its own substream
    :return: Distance and p-value matrices
    """
    if len(theta_list) < 2:
        msg = f"The comparison needs at least 2 parameters, got {len(theta_list)}."
        logger.error(msg)
        raise ValueError(msg)
    if replicates < MIN_APF_REPLICATES:
        msg = (
            f"The comparison needs at least {MIN_APF_REPLICATES} replicates, "
            f"got {replicates}."
        )
        logger.error(msg)
        raise ValueError(msg)
    theta_box = theta_box or ThetaBox()
    options = options or FitOptions()

    logger.info(f"Sampling the statistic at {len(theta_list)} parameters.")
    samples = _statistic_samples(
        model,
        theta_list,
        n,
        replicates,
        seed,
        theta_box,
        options,
        threads,
        independent_seeds,
    )
    limit_sample = sample_limit_batch(model, K, M, seed, threads)

    size = len(theta_list)
    ks_distance, ks_pvalue = np.zeros((size, size)), np.ones((size, size))
    limit_distance, limit_pvalue = np.zeros(size), np.zeros(size)
    for a in range(size):
        for b in range(a + 1, size):
            test = ks_2samp(samples[a], samples[b])
            ks_distance[a, b] = ks_distance[b, a] = test.statistic
            ks_pvalue[a, b] = ks_pvalue[b, a] = test.pvalue
        test = ks_2samp(samples[a], limit_sample)
        limit_distance[a], limit_pvalue[a] = test.statistic, test.pvalue

    scenario = {
        "kind": "apf",
        "model_id": model.model_id,
        "thetas": [theta.as_list() for theta in theta_list],
        "n": n,
        "replicates": replicates,
        "seed": seed,
        "M": M,
        "K": K,
        "theta_box": theta_box.as_dict(),
        "fit_options": options.as_dict(),
    }
    return ApfResult(
        thetas=tuple(theta_list),
        ks_distance=ks_distance,
        ks_pvalue=ks_pvalue,
        limit_distance=limit_distance,
        limit_pvalue=limit_pvalue,
        samples=tuple(samples),
        config_hash=config_hash(scenario),
    )


def mle_covariance_study(
    model: BaseIntensityModel,
    theta0: ShiftScaleParams,
    n: int,
    replicates: int,
    seed: int,
    theta_box: ThetaBox | None = None,
    options: FitOptions | None = None,
    threads: int = 1,
) -> CovarianceStudy:
    """Compare the spread of ``sqrt(n / beta0) * (theta_hat - theta0)`` with ``I*^-1``.

    :param model: Base intensity model
    :param theta0: True parameter
    :param n: Trajectories per dataset
    :param replicates: Number of fits
    :param seed: Root seed
    :param theta_box: Admissible parameter box
    :param options: Search settings of the fit
    :param threads: Worker count
    :return: Empirical and limit covariances with their distance
    """
    if replicates < MIN_STUDY_REPLICATES:
        msg = (
            f"A study needs at least {MIN_STUDY_REPLICATES} replicates, "
            f"got {replicates}."
        )
        logger.error(msg)
        raise ValueError(msg)
    theta_box = theta_box or ThetaBox()
    options = options or FitOptions()
    scale = np.sqrt(n / theta0.beta)

    def _run_chunk(start: int, stop: int) -> list[tuple[np.ndarray, bool]]:
        outcomes = []
        for i in range(start, stop):
            dataset = sample_dataset(model, theta0, n, derive_seed(seed, i))
            fit = fit_mle(model, dataset, theta_box, options)
            error = scale * (fit.theta_hat.as_array() - theta0.as_array())
            outcomes.append((error, fit.boundary_hit))
        return outcomes

    chunks = map_chunks(_run_chunk, replicates, DATASET_CHUNK, threads)
    outcomes = [outcome for chunk in chunks for outcome in chunk]
    errors = np.array([error for error, _ in outcomes])
    limit_covariance = fisher_star(model).inverse
    empirical = np.cov(errors, rowvar=False)
    distance = np.linalg.norm(empirical - limit_covariance) / np.linalg.norm(
        limit_covariance
    )
    return CovarianceStudy(
        empirical_covariance=empirical,
        limit_covariance=limit_covariance,
        relative_frobenius=float(distance),
        second_moment_ratio=float(
            np.mean(np.sum(errors**2, axis=1)) / np.trace(limit_covariance)
        ),
        replicates=replicates,
        boundary_hits=sum(hit for _, hit in outcomes),
    )
