"""Observed trajectories of the Poisson processes and their file format."""

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger

from apf_poisson.data_classes.intensity import ShiftScaleParams
from apf_poisson.modules.math_utils import dump_json


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sorted event times of one Poisson process; ``X(t)`` counts events ``<= t``."""

    events: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        """Store the events as a float array and check that they are sorted."""
        events = np.asarray(self.events, dtype=float).reshape(-1)
        if not np.all(np.isfinite(events)):
            msg = "Event times must be finite."
            logger.error(msg)
            raise ValueError(msg)
        if np.any(np.diff(events) < 0.0):
            msg = "Event times of a trajectory must be sorted."
            logger.error(msg)
            raise ValueError(msg)
        object.__setattr__(self, "events", events)

    def __len__(self) -> int:
        """Return the number of events."""
        return len(self.events)

    def count(self, t: float | np.ndarray) -> np.ndarray:
        """Evaluate the counting process ``X(t)``."""
        return np.searchsorted(self.events, t, side="right")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations ``X^n``: ``n`` independent trajectories and their provenance."""

    trajectories: tuple[Trajectory, ...]
    model_id: str
    theta_true: ShiftScaleParams | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        """Require at least one trajectory."""
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        if len(self.trajectories) < 1:
            msg = "A dataset needs at least one trajectory."
            logger.error(msg)
            raise ValueError(msg)

    @property
    def n(self) -> int:
        """Number of observed trajectories."""
        return len(self.trajectories)

    @cached_property
    def pooled_events(self) -> np.ndarray:
        """All event times of all trajectories, sorted."""
        if self.total_events == 0:
            return np.zeros(0)
        return np.sort(np.concatenate([traj.events for traj in self.trajectories]))

    @cached_property
    def total_events(self) -> int:
        """Total number of events over all trajectories."""
        return int(sum(len(traj) for traj in self.trajectories))

    def shifted(self, offset: float) -> "Dataset":
        """Translate every event time by ``offset``."""
        theta = self.theta_true
        if theta is not None:
            theta = ShiftScaleParams(theta.alpha + offset, theta.beta)
        return Dataset(
            trajectories=tuple(
                Trajectory(t.events + offset) for t in self.trajectories
            ),
            model_id=self.model_id,
            theta_true=theta,
            seed=self.seed,
        )

    def as_dict(self) -> dict[str, Any]:
        """Represent the dataset in its JSON file layout."""
        return {
            "model_id": self.model_id,
            "theta_true": (
                None if self.theta_true is None else self.theta_true.as_list()
            ),
            "seed": self.seed,
            "n": self.n,
            "trajectories": [traj.events.tolist() for traj in self.trajectories],
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "Dataset":
        """Build a dataset from its JSON layout, validating sortedness and ``n``."""
        try:
            trajectories = tuple(
                Trajectory(np.asarray(t)) for t in payload["trajectories"]
            )
            theta = payload.get("theta_true")
            theta_true = (
                None if theta is None else ShiftScaleParams.from_sequence(theta)
            )
            dataset = cls(
                trajectories=trajectories,
                model_id=str(payload["model_id"]),
                theta_true=theta_true,
                seed=payload.get("seed"),
            )
        except (KeyError, TypeError) as err:
            msg = f"Malformed dataset: {err}"
            logger.error(msg)
            raise ValueError(msg) from err
        declared = payload.get("n", dataset.n)
        if declared != dataset.n:
            msg = f"Dataset declares n={declared} but holds {dataset.n} trajectories."
            logger.error(msg)
            raise ValueError(msg)
        return dataset


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset to a JSON file.

    :param dataset: Dataset to write
    :param path: Destination file
    :return: None
    """
    Path(path).write_text(dump_json(dataset.as_dict()), encoding="utf-8")
    logger.info(f"Wrote {dataset.n} trajectories to {path}.")


def load_dataset(path: str | Path) -> Dataset:
    """Read a dataset from a JSON file.

    :param path: Source file
    :return: The validated dataset
    """
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return Dataset.from_dict(payload)
