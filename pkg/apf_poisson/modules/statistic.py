"""Cramer-von Mises type statistics of the empirical mean function."""

import numpy as np

from apf_poisson.data_classes.dataset import Dataset
from apf_poisson.data_classes.intensity import BaseIntensityModel, ShiftScaleParams
from apf_poisson.data_classes.results import StatValue
from apf_poisson.modules.family import base_coordinate, integrate


def squared_gap_integral(
    jumps: np.ndarray, n: int, slope: float, upper: float
) -> float:
    """Integrate ``(S(r) - slope * r)**2`` over ``[0, upper]`` in closed form.

    ``S`` is the step function starting at 0 that rises by ``1/n`` at every jump. On a
    segment ``[a, b]`` with level ``c`` the integral equals
    ``(b - a) / 3 * (x**2 + x * y + y**2)`` with ``x = c - slope * a`` and
    ``y = c - slope * b``.

    :param jumps: Sorted jump locations inside ``[0, upper]``
    :param n: Number of trajectories
    :param slope: Slope of the compared line
    :param upper: Right end of the integration range
    :return: Value of the integral
    """
    edges = np.concatenate(([0.0], np.asarray(jumps, dtype=float), [upper]))
    levels = np.arange(len(edges) - 1) / n
    start, stop = edges[:-1], edges[1:]
    x = levels - slope * start
    y = levels - slope * stop
    return float(np.sum((stop - start) * (x * x + x * y + y * y)) / 3.0)


def mapped_events(
    model: BaseIntensityModel, dataset: Dataset, theta: ShiftScaleParams
) -> np.ndarray:
    """Map the pooled events to ``r = Lambda0((t - alpha) / beta)``.

    Values are clamped to ``[0, Lambda0(inf)]``.
    """
    r = model.Lambda0(base_coordinate(theta, dataset.pooled_events))
    return np.clip(np.asarray(r, dtype=float), 0.0, model.Lambda0_total)


def cvm_statistic(
    model: BaseIntensityModel, dataset: Dataset, theta: ShiftScaleParams
) -> StatValue:
    """Compute the statistic of the composite hypothesis at ``theta``.

    After the substitution ``r = Lambda0((t - alpha) / beta)`` the statistic becomes
    ``(n / beta) * int_0^L (S(r) - beta * r)**2 dr`` with ``S`` the empirical mean,
    which is integrated exactly segment by segment.

    :param model: Base intensity model
    :param dataset: Observed trajectories
    :param theta: Parameter plugged in, normally the maximum likelihood estimate
    :return: Statistic value
    """
    jumps = mapped_events(model, dataset, theta)
    integral = squared_gap_integral(jumps, dataset.n, theta.beta, model.Lambda0_total)
    return StatValue(
        delta=dataset.n / theta.beta * integral,
        method="exact_piecewise",
        n=dataset.n,
        theta_used=theta,
    )


def cvm_simple(
    dataset: Dataset, model: BaseIntensityModel, theta0_known: ShiftScaleParams
) -> StatValue:
    """Compute the statistic of the simple hypothesis ``theta = theta0_known``.

    The squared gap is integrated against the hypothesized mean ``u = Lambda(t)`` and
    normalized by ``Lambda(inf)**2``, so its limit is the integral of a squared
    Wiener process over ``[0, 1]`` whatever the model.

    :param dataset: Observed trajectories
    :param model: Base intensity model
    :param theta0_known: Hypothesized parameter
    :return: Statistic value without a fitted parameter
    """
    total = theta0_known.beta * model.Lambda0_total
    jumps = theta0_known.beta * mapped_events(model, dataset, theta0_known)
    integral = squared_gap_integral(jumps, dataset.n, 1.0, total)
    return StatValue(
        delta=dataset.n / total**2 * integral,
        method="exact_piecewise",
        n=dataset.n,
        theta_used=None,
    )


def cvm_plugin_statistic(
    model: BaseIntensityModel, dataset: Dataset, theta: ShiftScaleParams
) -> StatValue:
    """Compute the plug-in statistic normalized by the fitted total mass.

    Since ``Lambda(inf) = beta * Lambda0(inf)`` it equals the composite statistic
    divided by ``Lambda0(inf)**2``.
    """
    exact = cvm_statistic(model, dataset, theta)
    return StatValue(
        delta=exact.delta / model.Lambda0_total**2,
        method="plugin",
        n=dataset.n,
        theta_used=theta,
    )


def cvm_statistic_quadrature(
    model: BaseIntensityModel, dataset: Dataset, theta: ShiftScaleParams
) -> StatValue:
    """Integrate the time-domain form of the composite statistic by adaptive quadrature.

    The range is split at every event so each piece has a constant empirical mean.
    Slow, kept as an independent check of ``cvm_statistic``.
    """
    alpha, beta = theta.alpha, theta.beta
    events = dataset.pooled_events
    lo, hi = model.effective_support()
    t_lo, t_hi = alpha + beta * lo, alpha + beta * hi
    if len(events):
        t_lo, t_hi = min(t_lo, events[0]), max(t_hi, events[-1])
    edges = np.concatenate(([t_lo], events, [t_hi]))

    total = 0.0
    for k, (start, stop) in enumerate(zip(edges[:-1], edges[1:], strict=True)):
        if stop <= start:
            continue
        level = k / dataset.n

        def integrand(t: float, level: float = level) -> float:
            s = (t - alpha) / beta
            return float((level - beta * model.Lambda0(s)) ** 2 * model.lambda0(s))

        total += integrate(integrand, start, stop)
    return StatValue(
        delta=dataset.n / beta**2 * total,
        method="quadrature",
        n=dataset.n,
        theta_used=theta,
    )
