"""Poisson log-likelihood of the shift/scale family and its maximization."""

import numpy as np
from loguru import logger
from scipy.optimize import OptimizeResult, minimize

from apf_poisson.data_classes.dataset import Dataset
from apf_poisson.data_classes.errors import (
    EmptyDatasetError,
    NonConvergenceError,
    NonFiniteError,
    SingularFisherError,
)
from apf_poisson.data_classes.intensity import (
    BaseIntensityModel,
    ShiftScaleParams,
    ThetaBox,
)
from apf_poisson.data_classes.results import FisherStar, FitOptions, FitResult
from apf_poisson.modules.family import integrate
from apf_poisson.modules.math_utils import symmetrize_matrix
from config.definitions import LOG_DECIMALS, SINGULAR_FISHER_RTOL


def log_likelihood(
    model: BaseIntensityModel, params: ShiftScaleParams, dataset: Dataset
) -> float:
    """Compute ``sum_events ln lambda0((t - alpha) / beta) - n * beta * Lambda0(inf)``.

    :param model: Base intensity model
    :param params: Shift and scale
    :param dataset: Observed trajectories
    :return: Log-likelihood up to a parameter free constant
    """
    s = (dataset.pooled_events - params.alpha) / params.beta
    compensator = dataset.n * params.beta * model.Lambda0_total
    return float(np.sum(model.log_lambda0(s)) - compensator)


def score(
    model: BaseIntensityModel, params: ShiftScaleParams, dataset: Dataset
) -> np.ndarray:
    """Gradient of the log-likelihood in ``(alpha, beta)``.

    :param model: Base intensity model
    :param params: Shift and scale
    :param dataset: Observed trajectories
    :return: Score vector
    """
    s = (dataset.pooled_events - params.alpha) / params.beta
    weights = -model.dlog_lambda0(s)
    return np.array(
        [
            np.sum(weights) / params.beta,
            np.sum(weights * s) / params.beta - dataset.n * model.Lambda0_total,
        ]
    )


def _start_grid(box: ThetaBox, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Cell midpoints of a ``size x size`` partition of the box."""
    lower, upper = box.lower(), box.upper()
    fractions = (np.arange(size) + 0.5) / size
    alphas = lower[0] + fractions * (upper[0] - lower[0])
    betas = lower[1] + fractions * (upper[1] - lower[1])
    alpha_grid, beta_grid = np.meshgrid(alphas, betas, indexing="ij")
    return alpha_grid.ravel(), beta_grid.ravel()


def _is_on_boundary(theta: np.ndarray, box: ThetaBox, tol: float) -> bool:
    """Check whether a point lies within ``tol`` box widths of the boundary."""
    lower, upper = box.lower(), box.upper()
    margin = tol * (upper - lower)
    return bool(np.any(theta - lower <= margin) or np.any(upper - theta <= margin))


def fit_mle(
    model: BaseIntensityModel,
    dataset: Dataset,
    theta_box: ThetaBox | None = None,
    options: FitOptions | None = None,
) -> FitResult:
    """Maximize the log-likelihood over the box by a multi-start polytope search.

    The log-likelihood is evaluated at the cell midpoints of a coarse grid over the
    box; Nelder-Mead, clamped to the box, then refines the best ``num_starts`` grid
    points. Ties are broken by the smaller ``beta``, then the smaller ``alpha``.

    :param model: Base intensity model
    :param dataset: Observed trajectories
    :param theta_box: Admissible parameter box
    :param options: Search settings
    :return: Estimate with diagnostics
    """
    if theta_box is None:
        theta_box = ThetaBox()
    if options is None:
        options = FitOptions()
    if dataset.total_events == 0:
        msg = (
            "Cannot fit a dataset without events; "
            "the likelihood degenerates at the boundary."
        )
        logger.error(msg)
        raise EmptyDatasetError(msg)

    events = dataset.total_events

    def objective(x: np.ndarray) -> float:
        return -log_likelihood(model, ShiftScaleParams(x[0], x[1]), dataset) / events

    alphas, betas = _start_grid(theta_box, options.grid_size)
    values = np.array(
        [objective(np.array(point)) for point in zip(alphas, betas, strict=True)]
    )
    order = np.lexsort((alphas, betas, values))[: options.num_starts]

    cell = (theta_box.upper() - theta_box.lower()) / options.grid_size
    bounds = list(zip(theta_box.lower(), theta_box.upper(), strict=True))
    runs: list[OptimizeResult] = []
    for idx in order:
        x0 = np.array([alphas[idx], betas[idx]])
        simplex = np.array([x0, x0 + [0.5 * cell[0], 0.0], x0 + [0.0, 0.5 * cell[1]]])
        run = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            bounds=bounds,
            options={
                "maxiter": options.max_iter,
                "xatol": options.xatol,
                "fatol": options.fatol,
                "initial_simplex": simplex,
            },
        )
        logger.debug(
            f"Start {np.round(x0, LOG_DECIMALS)} -> {np.round(run.x, LOG_DECIMALS)}, "
            f"objective {run.fun:.12g}, {run.nit} iterations."
        )
        runs.append(run)

    best = min(runs, key=lambda run: (run.fun, run.x[1], run.x[0]))
    if not best.success:
        msg = (
            f"Likelihood refinement stopped early ({best.message}), "
            f"cap {options.max_iter}."
        )
        logger.error(msg)
        raise NonConvergenceError(msg)

    theta_hat = ShiftScaleParams(float(best.x[0]), float(best.x[1]))
    boundary_hit = _is_on_boundary(best.x, theta_box, options.boundary_tol)
    if boundary_hit:
        logger.warning(
            f"Estimate {theta_hat.as_list()} lies on the boundary of "
            f"{theta_box.as_dict()}."
        )
    return FitResult(
        theta_hat=theta_hat,
        loglik=log_likelihood(model, theta_hat, dataset),
        score_norm=float(np.linalg.norm(score(model, theta_hat, dataset))),
        iterations=int(best.nit),
        boundary_hit=boundary_hit,
        starts_tried=len(runs),
    )


def fisher_star(model: BaseIntensityModel) -> FisherStar:
    """Compute the parameter free Fisher matrix of the base model.

    Entry ``(j, k)`` is the integral of ``s**(j + k) * lambda0'(s)**2 / lambda0(s)``
    over the effective support; the Fisher matrix at ``theta`` is ``I* / beta``.

    :param model: Base intensity model
    :return: Positive definite ``I*``
    """
    lo, hi = model.effective_support()

    def moment(power: int) -> float:
        def integrand(s: float) -> float:
            return float(s**power * model.lambda0(s) * model.dlog_lambda0(s) ** 2)

        return integrate(integrand, lo, hi)

    m0, m1, m2 = moment(0), moment(1), moment(2)
    matrix = symmetrize_matrix(np.array([[m0, m1], [m1, m2]]))
    if not np.all(np.isfinite(matrix)):
        msg = f"Fisher matrix of '{model.model_id}' is not finite: {matrix.tolist()}."
        logger.error(msg)
        raise NonFiniteError(msg)
    det = float(np.linalg.det(matrix))
    if det <= SINGULAR_FISHER_RTOL * m0 * m2:
        msg = f"Fisher matrix of '{model.model_id}' is singular (det={det:.3e})."
        logger.error(msg)
        raise SingularFisherError(msg)
    return FisherStar(matrix)
