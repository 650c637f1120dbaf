"""Results of fits, statistics, limit simulations and studies."""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger

from apf_poisson.data_classes.errors import InvalidEpsilonError
from apf_poisson.data_classes.intensity import ShiftScaleParams
from apf_poisson.modules.math_utils import dump_json
from config.definitions import (
    BOUNDARY_TOL,
    MLE_FATOL,
    MLE_GRID_SIZE,
    MLE_MAX_ITER,
    MLE_NUM_STARTS,
    MLE_XATOL,
    QUANTILE_METHOD,
    STDERR_METHOD,
)


@dataclass(frozen=True)
class FitOptions:
    """Settings of the multi-start maximum likelihood search."""

    grid_size: int = MLE_GRID_SIZE
    num_starts: int = MLE_NUM_STARTS
    max_iter: int = MLE_MAX_ITER
    xatol: float = MLE_XATOL
    fatol: float = MLE_FATOL
    boundary_tol: float = BOUNDARY_TOL

    def as_dict(self) -> dict[str, Any]:
        """Represent the options for JSON output."""
        return asdict(self)


@dataclass(frozen=True)
class FitResult:
    """Maximum likelihood estimate with optimizer diagnostics."""

    theta_hat: ShiftScaleParams
    loglik: float
    score_norm: float
    iterations: int
    boundary_hit: bool
    starts_tried: int

    def as_dict(self) -> dict[str, Any]:
        """Represent the fit for JSON output."""
        return {
            "theta_hat": self.theta_hat.as_list(),
            "loglik": float(self.loglik),
            "score_norm": float(self.score_norm),
            "iterations": int(self.iterations),
            "boundary_hit": bool(self.boundary_hit),
            "starts_tried": int(self.starts_tried),
        }


@dataclass(frozen=True, eq=False)
class FisherStar:
    """Parameter free Fisher matrix ``I*`` of the base model."""

    matrix: np.ndarray

    @property
    def det(self) -> float:
        """Determinant of ``I*``."""
        return float(np.linalg.det(self.matrix))

    @property
    def inverse(self) -> np.ndarray:
        """Covariance ``I*^-1`` of the limit vector ``zeta``."""
        return np.linalg.inv(self.matrix)

    def as_dict(self) -> dict[str, Any]:
        """Represent the matrix for JSON output."""
        return {"matrix": self.matrix.tolist(), "det": self.det}


@dataclass(frozen=True)
class StatValue:
    """Value of a Cramer-von Mises type statistic and how it was computed."""

    delta: float
    method: str
    n: int
    theta_used: ShiftScaleParams | None

    def __post_init__(self) -> None:
        """Statistics are integrals of squares."""
        if self.delta < 0.0:
            msg = f"A statistic cannot be negative, got {self.delta}."
            logger.error(msg)
            raise ValueError(msg)

    def as_dict(self) -> dict[str, Any]:
        """Represent the statistic for JSON output."""
        return {
            "delta": float(self.delta),
            "method": self.method,
            "n": int(self.n),
            "theta_used": (
                None if self.theta_used is None else self.theta_used.as_list()
            ),
        }


@dataclass(frozen=True, eq=False)
class LimitDraw:
    """One draw of the limit variable together with its Gaussian ingredients."""

    delta0: float
    zeta: np.ndarray
    w_end: float


@dataclass(frozen=True)
class ThresholdRow:
    """Calibrated threshold for one test level."""

    epsilon: float
    c: float
    stderr: float


@dataclass(frozen=True)
class ThresholdTable:
    """Monte Carlo quantiles of the limit variable with their provenance."""

    model_id: str
    rows: tuple[ThresholdRow, ...]
    M: int
    K: int
    seed: int
    quantile_method: str = QUANTILE_METHOD
    stderr_method: str = STDERR_METHOD

    def __post_init__(self) -> None:
        """Check level range and that thresholds fall as the level grows."""
        rows = tuple(sorted(self.rows, key=lambda row: row.epsilon))
        object.__setattr__(self, "rows", rows)
        for row in rows:
            if not 0.0 < row.epsilon < 1.0:
                msg = f"Test levels must lie in (0, 1), got {row.epsilon}."
                logger.error(msg)
                raise InvalidEpsilonError(msg)
        thresholds = np.array([row.c for row in rows])
        if np.any(np.diff(thresholds) >= 0.0):
            msg = f"Thresholds must strictly decrease with the level, got {thresholds}."
            logger.error(msg)
            raise ValueError(msg)

    @property
    def epsilons(self) -> list[float]:
        """Calibrated test levels in increasing order."""
        return [row.epsilon for row in self.rows]

    def threshold(self, epsilon: float, rtol: float = 1e-9) -> float | None:
        """Look up the threshold for a level, or ``None`` when it is absent."""
        for row in self.rows:
            if abs(row.epsilon - epsilon) <= rtol * max(abs(epsilon), 1.0):
                return row.c
        return None

    def as_dict(self) -> dict[str, Any]:
        """Represent the table in its JSON file layout."""
        return {
            "model_id": self.model_id,
            "K": int(self.K),
            "M": int(self.M),
            "seed": int(self.seed),
            "quantile_method": self.quantile_method,
            "stderr_method": self.stderr_method,
            "rows": [
                {"epsilon": row.epsilon, "c": row.c, "stderr": row.stderr}
                for row in self.rows
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "ThresholdTable":
        """Build a table from its JSON layout; extra keys are ignored."""
        try:
            rows = tuple(
                ThresholdRow(
                    float(row["epsilon"]), float(row["c"]), float(row["stderr"])
                )
                for row in payload["rows"]
            )
            return cls(
                model_id=str(payload["model_id"]),
                rows=rows,
                M=int(payload["M"]),
                K=int(payload["K"]),
                seed=int(payload["seed"]),
                quantile_method=payload.get("quantile_method", QUANTILE_METHOD),
                stderr_method=payload.get("stderr_method", STDERR_METHOD),
            )
        except (KeyError, TypeError) as err:
            msg = f"Malformed threshold table: {err}"
            logger.error(msg)
            raise ValueError(msg) from err


def load_threshold_table(path: str | Path) -> ThresholdTable:
    """Read a threshold table from a JSON file."""
    return ThresholdTable.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_threshold_table(
    table: ThresholdTable, path: str | Path, config: dict[str, Any] | None = None
) -> None:
    """Write a threshold table, optionally with the configuration that produced it."""
    payload = table.as_dict()
    if config is not None:
        payload["config"] = config
    Path(path).write_text(dump_json(payload), encoding="utf-8")


@dataclass(frozen=True)
class TestReport:
    """Outcome of the goodness of fit test on one dataset."""

    __test__ = False

    delta_hat: StatValue
    theta_hat: FitResult
    epsilon: float
    c_epsilon: float
    reject: bool
    warnings: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, Any]:
        """Represent the report for JSON output."""
        return {
            "delta_hat": self.delta_hat.as_dict(),
            "theta_hat": self.theta_hat.as_dict(),
            "epsilon": float(self.epsilon),
            "c_epsilon": float(self.c_epsilon),
            "reject": bool(self.reject),
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class SimpleTestReport:
    """Outcome of the test of a fully specified intensity on one dataset."""

    __test__ = False

    delta_tilde: StatValue
    theta0: ShiftScaleParams
    epsilon: float
    c_epsilon: float
    reject: bool

    def as_dict(self) -> dict[str, Any]:
        """Represent the report for JSON output."""
        return {
            "delta_tilde": self.delta_tilde.as_dict(),
            "theta0": self.theta0.as_list(),
            "epsilon": float(self.epsilon),
            "c_epsilon": float(self.c_epsilon),
            "reject": bool(self.reject),
        }


@dataclass(frozen=True)
class StudyResult:
    """Rejection rate of the test over replicated datasets."""

    scenario: dict[str, Any]
    replicates: int
    rejects: int
    rejection_rate: float
    wilson_interval: tuple[float, float]
    boundary_hits: int
    rejection_rate_interior: float | None
    seeds: tuple[int, ...]
    config_hash: str

    def as_dict(self) -> dict[str, Any]:
        """Represent the study for JSON output."""
        return {
            "scenario": self.scenario,
            "replicates": int(self.replicates),
            "rejects": int(self.rejects),
            "rejection_rate": float(self.rejection_rate),
            "wilson_interval": [float(v) for v in self.wilson_interval],
            "boundary_hits": int(self.boundary_hits),
            "rejection_rate_interior": self.rejection_rate_interior,
            "seeds": list(self.seeds),
            "config_hash": self.config_hash,
        }


@dataclass(frozen=True, eq=False)
class ApfResult:
    """Pairwise comparisons of statistic samples drawn at different parameters."""

    thetas: tuple[ShiftScaleParams, ...]
    ks_distance: np.ndarray
    ks_pvalue: np.ndarray
    limit_distance: np.ndarray
    limit_pvalue: np.ndarray
    samples: tuple[np.ndarray, ...] = field(default=())
    config_hash: str = ""

    def as_dict(self) -> dict[str, Any]:
        """Represent the comparison for JSON output (samples are omitted)."""
        return {
            "thetas": [theta.as_list() for theta in self.thetas],
            "ks_distance": self.ks_distance.tolist(),
            "ks_pvalue": self.ks_pvalue.tolist(),
            "limit_distance": self.limit_distance.tolist(),
            "limit_pvalue": self.limit_pvalue.tolist(),
            "config_hash": self.config_hash,
        }


@dataclass(frozen=True, eq=False)
class CovarianceStudy:
    """Spread of the normalized estimation error over replicated fits."""

    empirical_covariance: np.ndarray
    limit_covariance: np.ndarray
    relative_frobenius: float
    second_moment_ratio: float
    replicates: int
    boundary_hits: int

    def as_dict(self) -> dict[str, Any]:
        """Represent the study for JSON output."""
        return {
            "empirical_covariance": self.empirical_covariance.tolist(),
            "limit_covariance": self.limit_covariance.tolist(),
            "relative_frobenius": float(self.relative_frobenius),
            "second_moment_ratio": float(self.second_moment_ratio),
            "replicates": int(self.replicates),
            "boundary_hits": int(self.boundary_hits),
        }
