"""Monte Carlo simulation of the limit variables and calibration of test thresholds."""

from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from loguru import logger

from apf_poisson.data_classes.errors import InvalidEpsilonError
from apf_poisson.data_classes.intensity import BaseIntensityModel
from apf_poisson.data_classes.results import LimitDraw, ThresholdRow, ThresholdTable
from apf_poisson.modules.estimate import fisher_star
from apf_poisson.modules.family import integrate, mean_gradient_base
from apf_poisson.modules.math_utils import (
    bootstrap_quantile_stderr,
    derive_rng,
    map_chunks,
    quantile_type7,
)
from config.definitions import (
    BOOTSTRAP_STREAM,
    DEFAULT_EPSILONS,
    DEFAULT_GRID_POINTS,
    DEFAULT_REPLICATES,
    DRAW_CHUNK,
    LIMIT_STREAM,
    LOG_DECIMALS,
    MIN_CALIBRATION_REPLICATES,
    SIMPLE_LIMIT_STREAM,
    SIMPLE_TABLE_ID,
)


@dataclass(frozen=True, eq=False)
class LimitGrid:
    """Discretization of ``[0, Lambda0(inf)]`` shared by all draws of one model.

    ``weights[:, i]`` is ``-(lambda0'/lambda0)(s_i) * (1, s_i)`` and
    ``gradients[:, i]`` the mean gradient at the cell midpoint ``s_i``.
    """

    dr: float
    weights: np.ndarray
    gradients: np.ndarray
    fisher_inverse: np.ndarray

    @property
    def cells(self) -> int:
        """Number of grid cells ``K``."""
        return self.weights.shape[1]


def _check_grid_size(K: int) -> None:
    if K < 2:
        msg = f"The limit grid needs K >= 2 cells, got K={K}."
        logger.error(msg)
        raise ValueError(msg)


@lru_cache(maxsize=8)
def limit_grid(model: BaseIntensityModel, K: int) -> LimitGrid:
    """Build the grid of ``K`` uniform cells in ``r`` for the model.

    :param model: Base intensity model
    :param K: Number of cells
    :return: Grid with score weights, mean gradients and ``I*^-1``
    """
    _check_grid_size(K)
    dr = model.Lambda0_total / K
    s = np.asarray(model.Lambda0_inv((np.arange(K) + 0.5) * dr), dtype=float)
    dlog = model.dlog_lambda0(s)
    return LimitGrid(
        dr=dr,
        weights=np.stack((-dlog, -dlog * s)),
        gradients=mean_gradient_base(model, s),
        fisher_inverse=fisher_star(model).inverse,
    )


def _draw(grid: LimitGrid, rng: np.random.Generator) -> LimitDraw:
    increments = rng.normal(0.0, np.sqrt(grid.dr), size=grid.cells)
    path = np.cumsum(increments)
    zeta = grid.fisher_inverse @ (grid.weights @ increments)
    gap = path - zeta @ grid.gradients
    return LimitDraw(
        delta0=float(np.sum(gap**2) * grid.dr), zeta=zeta, w_end=float(path[-1])
    )


def sample_limit_delta0(
    model: BaseIntensityModel, K: int, rng: np.random.Generator
) -> LimitDraw:
    """Draw the limit variable ``int (W(r) - <zeta, grad Lambda0(s(r))>)**2 dr`` once.

    The Wiener increments on ``K`` cells drive both the path ``W``, read at the right
    cell ends, and the Gaussian vector ``zeta``, which gets the matching correlation
    with ``W``.

    :param model: Base intensity model
    :param K: Number of cells
    :param rng: Generator of this draw
    :return: The draw with ``zeta`` and the terminal path value
    """
    return _draw(limit_grid(model, K), rng)


def sample_limit_draws(
    model: BaseIntensityModel, K: int, M: int, seed: int, threads: int = 1
) -> list[LimitDraw]:
    """Draw ``M`` independent copies of the limit variable.

    Draw ``i`` uses substream ``(LIMIT_STREAM, i)`` of ``seed``; the result does not
    depend on ``threads``.
    """
    grid = limit_grid(model, K)

    def _draw_chunk(start: int, stop: int) -> list[LimitDraw]:
        return [
            _draw(grid, derive_rng(seed, LIMIT_STREAM, i)) for i in range(start, stop)
        ]

    chunks = map_chunks(_draw_chunk, M, DRAW_CHUNK, threads)
    return [draw for chunk in chunks for draw in chunk]


def sample_limit_batch(
    model: BaseIntensityModel, K: int, M: int, seed: int, threads: int = 1
) -> np.ndarray:
    """Draw ``M`` values of the limit variable as an array."""
    draws = sample_limit_draws(model, K, M, seed, threads)
    return np.array([draw.delta0 for draw in draws])


def sample_limit_simple(K: int, rng: np.random.Generator) -> float:
    """Draw the Riemann sum of a squared Wiener path over ``K`` cells of ``[0, 1]``.

    :param K: Number of cells
    :param rng: Generator of this draw
    :return: Non-negative draw
    """
    _check_grid_size(K)
    path = np.cumsum(rng.normal(0.0, np.sqrt(1.0 / K), size=K))
    return float(np.sum(path**2) / K)


def sample_limit_simple_batch(
    K: int, M: int, seed: int, threads: int = 1
) -> np.ndarray:
    """Draw ``M`` values of the simple limit.

    Draw ``i`` uses substream ``(SIMPLE_LIMIT_STREAM, i)`` of ``seed``.
    """

    def _draw_chunk(start: int, stop: int) -> list[float]:
        return [
            sample_limit_simple(K, derive_rng(seed, SIMPLE_LIMIT_STREAM, i))
            for i in range(start, stop)
        ]

    chunks = map_chunks(_draw_chunk, M, DRAW_CHUNK, threads)
    return np.array([value for chunk in chunks for value in chunk])


def _check_calibration(epsilons: Sequence[float], M: int) -> list[float]:
    """Validate the calibration request and return the sorted distinct levels."""
    if M < MIN_CALIBRATION_REPLICATES:
        msg = f"Calibration needs M >= {MIN_CALIBRATION_REPLICATES} draws, got M={M}."
        logger.error(msg)
        raise ValueError(msg)
    levels = sorted({float(eps) for eps in epsilons})
    if not levels:
        msg = "Calibration needs at least one test level."
        logger.error(msg)
        raise InvalidEpsilonError(msg)
    for eps in levels:
        if not 0.0 < eps < 1.0:
            msg = f"Test levels must lie in (0, 1), got {eps}."
            logger.error(msg)
            raise InvalidEpsilonError(msg)
    return levels


def _threshold_table(
    sample: np.ndarray, levels: list[float], model_id: str, K: int, seed: int
) -> ThresholdTable:
    """Turn a Monte Carlo sample into upper quantiles with bootstrap standard errors."""
    probs = 1.0 - np.array(levels)
    thresholds = quantile_type7(sample, probs)
    rng = derive_rng(seed, BOOTSTRAP_STREAM)
    stderr = bootstrap_quantile_stderr(sample, probs, rng)
    rows = tuple(
        ThresholdRow(epsilon=eps, c=float(c), stderr=float(err))
        for eps, c, err in zip(levels, thresholds, stderr, strict=True)
    )
    for row in rows:
        logger.info(
            f"'{model_id}': c({row.epsilon}) = {round(row.c, LOG_DECIMALS)} "
            f"+/- {round(row.stderr, LOG_DECIMALS)}"
        )
    return ThresholdTable(model_id=model_id, rows=rows, M=len(sample), K=K, seed=seed)


def calibrate_threshold(
    model: BaseIntensityModel,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    M: int = DEFAULT_REPLICATES,
    K: int = DEFAULT_GRID_POINTS,
    seed: int = 0,
    threads: int = 1,
) -> ThresholdTable:
    """Estimate ``c_eps`` with ``P(Delta0 > c_eps) = eps`` for each level.

    ``c_eps`` is the type 7 ``(1 - eps)`` quantile of ``M`` limit draws and its
    standard error comes from 200 bootstrap resamples of the same draws.

    :param model: Base intensity model
    :param epsilons: Test levels in (0, 1)
    :param M: Number of limit draws
    :param K: Grid cells per draw
    :param seed: Root seed
    :param threads: Worker count
    :return: Threshold table
    """
    levels = _check_calibration(epsilons, M)
    logger.info(f"Calibrating '{model.model_id}' with M={M}, K={K}, seed={seed}.")
    sample = sample_limit_batch(model, K, M, seed, threads)
    return _threshold_table(sample, levels, model.model_id, K, seed)


def calibrate_simple_threshold(
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    M: int = DEFAULT_REPLICATES,
    K: int = DEFAULT_GRID_POINTS,
    seed: int = 0,
    threads: int = 1,
) -> ThresholdTable:
    """Estimate the thresholds of the simple hypothesis test, valid for every model."""
    levels = _check_calibration(epsilons, M)
    logger.info(f"Calibrating the simple hypothesis with M={M}, K={K}, seed={seed}.")
    sample = sample_limit_simple_batch(K, M, seed, threads)
    return _threshold_table(sample, levels, SIMPLE_TABLE_ID, K, seed)


def expected_delta0(model: BaseIntensityModel) -> float:
    """Compute the mean of the limit variable by quadrature.

    ``E[W(r) zeta] = I*^-1 grad Lambda0(s(r))``, so the mean integrand is
    ``Lambda0(s) - v' I*^-1 v`` with ``v`` the mean gradient, against ``lambda0(s) ds``.

    :param model: Base intensity model
    :return: Mean of the limit variable
    """
    inverse = fisher_star(model).inverse
    lo, hi = model.effective_support()

    def integrand(s: float) -> float:
        v = mean_gradient_base(model, s)
        return float((model.Lambda0(s) - v @ inverse @ v) * model.lambda0(s))

    return integrate(integrand, lo, hi)
