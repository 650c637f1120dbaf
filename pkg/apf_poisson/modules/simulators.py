"""Simulation of Poisson trajectories from the shift/scale family by inversion."""

import numpy as np
from loguru import logger

from apf_poisson.data_classes.dataset import Dataset, Trajectory
from apf_poisson.data_classes.intensity import (
    BaseIntensityModel,
    ShiftScaleParams,
    TabulatedBase,
)
from apf_poisson.modules.math_utils import derive_rng, map_chunks
from config.definitions import BIMODAL_GRID, DATASET_CHUNK


def sample_trajectory(
    model: BaseIntensityModel, params: ShiftScaleParams, rng: np.random.Generator
) -> Trajectory:
    """Draw one trajectory with mean function ``beta * Lambda0((t - alpha) / beta)``.

    The event count is Poisson with the total mass ``beta * Lambda0(inf)``; given the
    count, the events are i.i.d. with distribution ``Lambda0 / Lambda0(inf)`` in the
    base coordinate and are mapped to time by inversion.

    :param model: Base intensity model
    :param params: Shift and scale
    :param rng: Generator owned by this trajectory
    :return: Sorted trajectory
    """
    total = model.Lambda0_total
    count = int(rng.poisson(params.beta * total))
    if count == 0:
        return Trajectory(np.zeros(0))
    # Uniforms on the open interval so the inverse stays finite.
    tiny, epsneg = np.finfo(float).tiny, np.finfo(float).epsneg
    uniforms = np.clip(rng.random(count), tiny, 1.0 - epsneg)
    s = np.asarray(model.Lambda0_inv(uniforms * total), dtype=float)
    return Trajectory(np.sort(params.alpha + params.beta * s))


def sample_dataset(
    model: BaseIntensityModel,
    params: ShiftScaleParams,
    n: int,
    seed: int,
    threads: int = 1,
) -> Dataset:
    """Draw ``n`` independent trajectories.

    Trajectory ``j`` uses the generator of substream ``(j,)`` of ``seed``, so the
    dataset does not depend on ``threads``.

    :param model: Base intensity model
    :param params: Shift and scale
    :param n: Number of trajectories
    :param seed: Root seed
    :param threads: Worker count
    :return: Dataset with its provenance
    """
    if n < 1:
        msg = f"A dataset needs n >= 1 trajectories, got n={n}."
        logger.error(msg)
        raise ValueError(msg)

    def _sample_chunk(start: int, stop: int) -> list[Trajectory]:
        return [
            sample_trajectory(model, params, derive_rng(seed, j))
            for j in range(start, stop)
        ]

    chunks = map_chunks(_sample_chunk, n, DATASET_CHUNK, threads)
    trajectories = tuple(traj for chunk in chunks for traj in chunk)
    logger.debug(
        f"Sampled {n} trajectories of '{model.model_id}' at {params.as_list()} "
        f"with seed {seed}."
    )
    return Dataset(
        trajectories=trajectories, model_id=model.model_id, theta_true=params, seed=seed
    )


def empirical_mean(dataset: Dataset, t: float | np.ndarray) -> float | np.ndarray:
    """Evaluate the empirical mean function ``(1/n) * sum_j X_j(t)``.

    :param dataset: Observed trajectories
    :param t: Time or array of times
    :return: Right-continuous step function values
    """
    counts = np.searchsorted(dataset.pooled_events, t, side="right")
    if np.ndim(t) == 0:
        return float(counts) / dataset.n
    return counts / dataset.n


def bimodal_alternative(model_id: str = "bimodal") -> TabulatedBase:
    """Tabulate the two-bump intensity ``exp(-t**2 / 2) + exp(-(t - 6)**2 / 2)``.

    No shift or scale of the Gaussian base produces two modes, so data drawn from it
    at ``alpha = 0, beta = 1`` lie outside the Gaussian null family.

    :param model_id: Identifier of the tabulated model
    :return: Tabulated intensity
    """
    start, stop, nodes = BIMODAL_GRID
    t = np.linspace(start, stop, int(nodes))
    values = np.exp(-0.5 * t**2) + np.exp(-0.5 * (t - 6.0) ** 2)
    return TabulatedBase(model_id=model_id, s_grid=t, lambda_grid=values)
