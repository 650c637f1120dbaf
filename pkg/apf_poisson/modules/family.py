"""Shift/scale family built on a base intensity, and checks of its regularity."""

import json
import os
import warnings
from collections.abc import Callable
from pathlib import Path

import numpy as np
from loguru import logger
from scipy.integrate import IntegrationWarning, quad

from apf_poisson.data_classes.errors import NonFiniteError, UnknownModelError
from apf_poisson.data_classes.intensity import (
    BaseIntensityModel,
    ConditionReport,
    GaussianBase,
    GridSpec,
    LogisticBase,
    ShiftScaleParams,
    TabulatedBase,
)
from config.definitions import (
    DIVERGENCE_RTOL,
    MASS_COVERAGE,
    QUAD_EPSREL,
    QUAD_LIMIT,
    REGISTRY_ENV_VAR,
)

BUNDLED_MODELS: dict[str, Callable[[], BaseIntensityModel]] = {
    "gauss2": GaussianBase,
    "logistic5": LogisticBase,
}


def base_coordinate(params: ShiftScaleParams, t: float | np.ndarray) -> np.ndarray:
    """Map time ``t`` to the base coordinate ``s = (t - alpha) / beta``."""
    return (np.asarray(t, dtype=float) - params.alpha) / params.beta


def family_mean(
    model: BaseIntensityModel, params: ShiftScaleParams, t: float | np.ndarray
) -> float | np.ndarray:
    """Evaluate the mean function ``beta * Lambda0((t - alpha) / beta)``.

    :param model: Base intensity model
    :param params: Shift and scale
    :param t: Time or array of times
    :return: Expected number of events up to ``t``
    """
    return params.beta * model.Lambda0(base_coordinate(params, t))


def family_intensity(
    model: BaseIntensityModel, params: ShiftScaleParams, t: float | np.ndarray
) -> float | np.ndarray:
    """Evaluate the intensity ``lambda0((t - alpha) / beta)``, the slope of the mean.

    :param model: Base intensity model
    :param params: Shift and scale
    :param t: Time or array of times
    :return: Events per unit time
    """
    return model.lambda0(base_coordinate(params, t))


def mean_gradient_base(model: BaseIntensityModel, s: float | np.ndarray) -> np.ndarray:
    """Gradient of the family mean in ``(alpha, beta)`` at base coordinate ``s``.

    The components are ``-lambda0(s)`` and ``Lambda0(s) - s * lambda0(s)``.

    :param model: Base intensity model
    :param s: Base coordinate or array of coordinates
    :return: Array of shape ``(2,) + shape(s)``
    """
    s = np.asarray(s, dtype=float)
    lam = model.lambda0(s)
    return np.stack((-lam, model.Lambda0(s) - s * lam))


def score_vector_base(model: BaseIntensityModel, s: float | np.ndarray) -> np.ndarray:
    """Evaluate ``l(s) = -lambda0'(s) * (1, s)``.

    :param model: Base intensity model
    :param s: Base coordinate or array of coordinates
    :return: Array of shape ``(2,) + shape(s)``
    """
    s = np.asarray(s, dtype=float)
    prime = model.lambda0_prime(s)
    return np.stack((-prime, -s * prime))


def integrate(
    integrand: Callable[[float], float],
    lo: float,
    hi: float,
    epsrel: float = QUAD_EPSREL,
) -> float:
    """Integrate a smooth function over ``[lo, hi]`` with adaptive quadrature.

    The range is split at -1, 0 and 1 when they fall inside it, which keeps the
    adaptive scheme resolving the bulk of bell shaped integrands on wide ranges.

    :param integrand: Scalar function
    :param lo: Lower limit
    :param hi: Upper limit
    :param epsrel: Relative tolerance per piece
    :return: Integral value
    """
    cuts = [lo, *[p for p in (-1.0, 0.0, 1.0) if lo < p < hi], hi]
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        for a, b in zip(cuts[:-1], cuts[1:], strict=True):
            value, _ = quad(
                integrand, a, b, limit=QUAD_LIMIT, epsabs=0.0, epsrel=epsrel
            )
            total += value
    return total


def _condition_integrands(
    model: BaseIntensityModel,
) -> dict[str, Callable[[float], float]]:
    """Integrands of the moment conditions on the base intensity."""

    def second_moment(s: float) -> float:
        return s**2 * model.lambda0(s)

    def fourth_moment_prime(s: float) -> float:
        return s**4 * abs(model.lambda0_prime(s))

    def mean_gradient_norm(s: float) -> float:
        gradient = mean_gradient_base(model, s)
        return float(np.sum(gradient**2)) * model.lambda0(s)

    return {
        "c3_second_moment": second_moment,
        "c3_fourth_moment_prime": fourth_moment_prime,
        "c4_bound": mean_gradient_norm,
    }


def validate_conditions(
    model: BaseIntensityModel,
    grid_spec: GridSpec | None = None,
    raise_on_failure: bool = True,
) -> ConditionReport:
    """Check positivity and the moment conditions of a base intensity numerically.

    Each moment integral is computed over ``[-R, R]`` and ``[-2R, 2R]``; a change of
    more than ``DIVERGENCE_RTOL`` flags the integral as divergent. The limit-type
    continuity conditions on the family are not certified by any finite procedure
    and are not checked here.

    :param model: Base intensity model
    :param grid_spec: Symmetric range and node count for the positivity scan
    :param raise_on_failure: Raise ``NonFiniteError`` on a failing report
    :return: Condition report
    """
    if grid_spec is None:
        grid_spec = GridSpec()
    if grid_spec.half_width is None:
        lo, hi = model.effective_support()
        half_width = max(abs(lo), abs(hi))
    else:
        half_width = float(grid_spec.half_width)

    total = model.Lambda0_total
    covered = float(model.Lambda0(half_width) - model.Lambda0(-half_width))
    if covered < MASS_COVERAGE * total:
        msg = (
            f"Range [-{half_width}, {half_width}] covers {covered / total:.6f} of the "
            f"mass of '{model.model_id}', need at least {MASS_COVERAGE}."
        )
        logger.error(msg)
        raise ValueError(msg)

    nodes = np.linspace(-half_width, half_width, grid_spec.nodes)
    values = model.lambda0(nodes)
    r1_positive = bool(np.all(np.isfinite(values)) and np.all(values > 0.0))

    results: dict[str, float] = {}
    failures: list[str] = []
    for name, integrand in _condition_integrands(model).items():
        narrow = integrate(integrand, -half_width, half_width)
        wide = integrate(integrand, -2.0 * half_width, 2.0 * half_width)
        results[name] = narrow
        finite = np.isfinite(narrow) and np.isfinite(wide)
        if not finite or abs(wide - narrow) > DIVERGENCE_RTOL * max(abs(wide), 1e-300):
            failures.append(name)
            logger.warning(
                f"'{model.model_id}': {name} changes from {narrow:.6g} to {wide:.6g} "
                "when the range doubles."
            )
    if not r1_positive:
        failures.insert(0, "r1_positive")

    report = ConditionReport(
        r1_positive=r1_positive,
        c3_second_moment=results["c3_second_moment"],
        c3_fourth_moment_prime=results["c3_fourth_moment_prime"],
        c4_bound=results["c4_bound"],
        all_finite=not failures,
        half_width=half_width,
        failures=failures,
    )
    if failures and raise_on_failure:
        msg = (
            f"Base model '{model.model_id}' fails the conditions: "
            f"{', '.join(failures)}."
        )
        logger.error(msg)
        raise NonFiniteError(msg)
    return report


def identifiability_gap(
    model: BaseIntensityModel, theta_a: ShiftScaleParams, theta_b: ShiftScaleParams
) -> float:
    """Compute the Hellinger-type distance between two family intensities.

    :param model: Base intensity model
    :param theta_a: First parameter
    :param theta_b: Second parameter
    :return: Integral of ``(sqrt(lambda_a) - sqrt(lambda_b))**2`` over time
    """
    lo, hi = model.effective_support()
    t_lo = min(theta_a.alpha + theta_a.beta * lo, theta_b.alpha + theta_b.beta * lo)
    t_hi = max(theta_a.alpha + theta_a.beta * hi, theta_b.alpha + theta_b.beta * hi)

    def integrand(t: float) -> float:
        root_a = np.sqrt(family_intensity(model, theta_a, t))
        root_b = np.sqrt(family_intensity(model, theta_b, t))
        return float((root_a - root_b) ** 2)

    return integrate(integrand, t_lo, t_hi)


def load_tabulated_model(path: str | Path) -> TabulatedBase:
    """Load a tabulated base model from JSON and check its conditions.

    :param path: File with ``{"model_id": ..., "grid": [[s, lambda0], ...]}``
    :return: The validated model
    """
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    model = TabulatedBase.from_dict(payload)
    validate_conditions(model)
    logger.info(f"Loaded tabulated model '{model.model_id}' from {path}.")
    return model


def resolve_model(
    model_id: str, registry_path: str | Path | None = None
) -> BaseIntensityModel:
    """Find a base model by identifier.

    Bundled models come first; otherwise ``<registry>/<model_id>.json`` is loaded,
    where the registry directory is ``registry_path`` or the directory named by the
    ``APF_POISSON_REGISTRY`` environment variable.

    :param model_id: Model identifier
    :param registry_path: Optional registry directory
    :return: The base model
    """
    if model_id in BUNDLED_MODELS:
        return BUNDLED_MODELS[model_id]()

    registry = registry_path or os.environ.get(REGISTRY_ENV_VAR)
    if registry is None:
        msg = f"Unknown model '{model_id}' and no registry configured."
        logger.error(msg)
        raise UnknownModelError(msg)
    path = Path(registry) / f"{model_id}.json"
    if not path.is_file():
        msg = f"Unknown model '{model_id}': {path} does not exist."
        logger.error(msg)
        raise UnknownModelError(msg)
    model = load_tabulated_model(path)
    if model.model_id != model_id:
        msg = f"Registry file {path} holds model '{model.model_id}', not '{model_id}'."
        logger.error(msg)
        raise UnknownModelError(msg)
    return model
