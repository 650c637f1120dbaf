"""Base intensity models and the shift/scale parameters built on them."""

from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from loguru import logger
from scipy.interpolate import PchipInterpolator
from scipy.special import expit, logit, ndtr, ndtri

from apf_poisson.modules.math_utils import monotone_inverse
from config.definitions import (
    DEFAULT_ALPHA_BOUNDS,
    DEFAULT_BETA_BOUNDS,
    GAUSS2_AMPLITUDE,
    LOGISTIC5_AMPLITUDE,
    POSITIVITY_NODES,
    SUPPORT_DELTA,
    TABULATED_MIN_TAIL_RATE,
)


class BaseIntensityModel(ABC):
    """A known positive base intensity with finite total mass.

    Subclasses supply the intensity, its derivative and its cumulative; the inverse
    cumulative falls back to safeguarded root finding unless a closed form exists.
    All methods are vectorized over ``s`` and instances are never mutated.
    """

    def __init__(self, model_id: str):
        self.model_id = model_id

    def __repr__(self) -> str:
        """Return a short description of the model."""
        return f"{type(self).__name__}(model_id={self.model_id!r})"

    @abstractmethod
    def lambda0(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the base intensity."""

    @abstractmethod
    def lambda0_prime(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the derivative of the base intensity."""

    @abstractmethod
    def Lambda0(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the cumulative base intensity from minus infinity to ``s``."""

    @property
    @abstractmethod
    def Lambda0_total(self) -> float:
        """Total mass of the base intensity."""

    def log_lambda0(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the logarithm of the base intensity."""
        return np.log(self.lambda0(s))

    def dlog_lambda0(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the log-derivative of the base intensity."""
        return self.lambda0_prime(s) / self.lambda0(s)

    def Lambda0_inv(self, r: float | np.ndarray) -> float | np.ndarray:
        """Invert the cumulative base intensity on (0, total mass)."""
        return monotone_inverse(self.Lambda0, self.lambda0, r)

    def effective_support(self, delta: float = SUPPORT_DELTA) -> tuple[float, float]:
        """Return the interval that leaves mass ``delta * total`` in each tail.

        :param delta: Fraction of the total mass cut from each tail
        :return: Lower and upper end of the quadrature range
        """
        total = self.Lambda0_total
        lo = self.Lambda0_inv(delta * total)
        hi = self.Lambda0_inv((1.0 - delta) * total)
        return float(lo), float(hi)


class GaussianBase(BaseIntensityModel):
    """Gaussian-shaped base intensity ``a * exp(-s**2 / 2)``."""

    def __init__(self, model_id: str = "gauss2", amplitude: float = GAUSS2_AMPLITUDE):
        super().__init__(model_id)
        self.amplitude = amplitude

    def lambda0(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the base intensity."""
        return self.amplitude * np.exp(-0.5 * np.square(s))

    def lambda0_prime(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the derivative of the base intensity."""
        return -np.asarray(s) * self.lambda0(s)

    def Lambda0(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the cumulative base intensity."""
        return self.Lambda0_total * ndtr(s)

    @property
    def Lambda0_total(self) -> float:
        """Total mass ``a * sqrt(2 pi)``."""
        return self.amplitude * np.sqrt(2.0 * np.pi)

    def log_lambda0(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the logarithm of the base intensity."""
        return np.log(self.amplitude) - 0.5 * np.square(s)

    def dlog_lambda0(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the log-derivative ``-s``."""
        return -np.asarray(s, dtype=float)

    def Lambda0_inv(self, r: float | np.ndarray) -> float | np.ndarray:
        """Invert the cumulative with the normal quantile function."""
        return ndtri(np.asarray(r) / self.Lambda0_total)


class LogisticBase(BaseIntensityModel):
    """Logistic-density base intensity ``a * e^-s / (1 + e^-s)**2``."""

    def __init__(
        self, model_id: str = "logistic5", amplitude: float = LOGISTIC5_AMPLITUDE
    ):
        super().__init__(model_id)
        self.amplitude = amplitude

    def lambda0(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the base intensity."""
        return self.amplitude * expit(s) * expit(-np.asarray(s))

    def lambda0_prime(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the derivative of the base intensity."""
        return self.lambda0(s) * self.dlog_lambda0(s)

    def Lambda0(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the cumulative base intensity."""
        return self.amplitude * expit(s)

    @property
    def Lambda0_total(self) -> float:
        """Total mass ``a``."""
        return float(self.amplitude)

    def log_lambda0(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the logarithm of the base intensity without overflow."""
        abs_s = np.abs(s)
        return np.log(self.amplitude) - abs_s - 2.0 * np.log1p(np.exp(-abs_s))

    def dlog_lambda0(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the log-derivative ``-tanh(s / 2)``."""
        return -np.tanh(0.5 * np.asarray(s, dtype=float))

    def Lambda0_inv(self, r: float | np.ndarray) -> float | np.ndarray:
        """Invert the cumulative with the logit function."""
        return logit(np.asarray(r) / self.amplitude)


class TabulatedBase(BaseIntensityModel):
    """User supplied base intensity interpolated from an ``(s, lambda0)`` table.

    Inside the table the intensity is the monotone cubic (PCHIP) interpolant. Beyond
    either end it continues as an exponential tail that matches the end value and
    decays at least at rate ``min_tail_rate``, which keeps the intensity positive and
    the total mass finite.
    """

    def __init__(
        self,
        model_id: str,
        s_grid: np.ndarray,
        lambda_grid: np.ndarray,
        min_tail_rate: float = TABULATED_MIN_TAIL_RATE,
    ):
        super().__init__(model_id)
        s_grid = np.asarray(s_grid, dtype=float)
        lambda_grid = np.asarray(lambda_grid, dtype=float)
        if s_grid.ndim != 1 or s_grid.shape != lambda_grid.shape or len(s_grid) < 2:
            msg = f"Model '{model_id}' needs matching 1-D grids with at least 2 nodes."
            logger.error(msg)
            raise ValueError(msg)
        if np.any(np.diff(s_grid) <= 0.0):
            msg = f"Model '{model_id}' grid nodes must be strictly increasing."
            logger.error(msg)
            raise ValueError(msg)
        if not np.all(np.isfinite(lambda_grid)) or np.any(lambda_grid <= 0.0):
            msg = f"Model '{model_id}' intensity values must be finite and positive."
            logger.error(msg)
            raise ValueError(msg)

        self.s_grid = s_grid
        self.lambda_grid = lambda_grid
        self._interp = PchipInterpolator(s_grid, lambda_grid, extrapolate=False)
        self._interp_prime = self._interp.derivative()
        self._interp_cum = self._interp.antiderivative()

        self._s_lo, self._s_hi = float(s_grid[0]), float(s_grid[-1])
        self._lam_lo, self._lam_hi = float(lambda_grid[0]), float(lambda_grid[-1])
        slope_lo = float(self._interp_prime(self._s_lo))
        slope_hi = float(self._interp_prime(self._s_hi))
        self._rate_lo = max(slope_lo / self._lam_lo, min_tail_rate)
        self._rate_hi = max(-slope_hi / self._lam_hi, min_tail_rate)
        self._mass_lo = self._lam_lo / self._rate_lo
        self._mass_hi = self._lam_hi / self._rate_hi
        self._cum_lo = float(self._interp_cum(self._s_lo))
        inner = float(self._interp_cum(self._s_hi)) - self._cum_lo
        self._total = self._mass_lo + inner + self._mass_hi

    def _inside(self, s: np.ndarray) -> np.ndarray:
        """Clip arguments into the table so the interpolant is always defined."""
        return np.clip(s, self._s_lo, self._s_hi)

    def lambda0(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the base intensity."""
        return np.exp(self.log_lambda0(s))

    def log_lambda0(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the logarithm of the base intensity."""
        s = np.asarray(s, dtype=float)
        left = np.log(self._lam_lo) + self._rate_lo * (s - self._s_lo)
        right = np.log(self._lam_hi) - self._rate_hi * (s - self._s_hi)
        middle = np.log(self._interp(self._inside(s)))
        return np.where(s < self._s_lo, left, np.where(s > self._s_hi, right, middle))

    def lambda0_prime(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the derivative of the base intensity."""
        return self.lambda0(s) * self.dlog_lambda0(s)

    def dlog_lambda0(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the log-derivative of the base intensity."""
        s = np.asarray(s, dtype=float)
        inside = self._inside(s)
        middle = self._interp_prime(inside) / self._interp(inside)
        return np.where(
            s < self._s_lo,
            self._rate_lo,
            np.where(s > self._s_hi, -self._rate_hi, middle),
        )

    def Lambda0(self, s: float | np.ndarray) -> float | np.ndarray:
        """Evaluate the cumulative base intensity."""
        s = np.asarray(s, dtype=float)
        left = self._mass_lo * np.exp(self._rate_lo * np.minimum(s - self._s_lo, 0.0))
        right = self._total - self._mass_hi * np.exp(
            -self._rate_hi * np.maximum(s - self._s_hi, 0.0)
        )
        middle = self._mass_lo + self._interp_cum(self._inside(s)) - self._cum_lo
        return np.where(s < self._s_lo, left, np.where(s > self._s_hi, right, middle))

    @property
    def Lambda0_total(self) -> float:
        """Total mass of the table plus both exponential tails."""
        return self._total

    def as_dict(self) -> dict[str, Any]:
        """Represent the model in its JSON file layout."""
        return {
            "model_id": self.model_id,
            "grid": np.column_stack((self.s_grid, self.lambda_grid)).tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "TabulatedBase":
        """Build a model from ``{"model_id": ..., "grid": [[s, lambda0], ...]}``."""
        try:
            grid = np.asarray(payload["grid"], dtype=float)
            model_id = str(payload["model_id"])
        except (KeyError, TypeError, ValueError) as err:
            msg = f"Malformed tabulated model: {err}"
            logger.error(msg)
            raise ValueError(msg) from err
        if grid.ndim != 2 or grid.shape[1] != 2:
            msg = f"Model '{model_id}' grid must be a list of [s, lambda0] pairs."
            logger.error(msg)
            raise ValueError(msg)
        return cls(model_id=model_id, s_grid=grid[:, 0], lambda_grid=grid[:, 1])


@dataclass(frozen=True)
class ShiftScaleParams:
    """Shift ``alpha`` and scale ``beta`` of the family, both in time units."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        """Reject non-finite values and non-positive scales."""
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            msg = (
                f"Parameters must be finite, got alpha={self.alpha}, "
                f"beta={self.beta}."
            )
            logger.error(msg)
            raise ValueError(msg)
        if self.beta <= 0.0:
            msg = f"The scale parameter must be positive, got beta={self.beta}."
            logger.error(msg)
            raise ValueError(msg)

    def as_array(self) -> np.ndarray:
        """Return ``(alpha, beta)`` as a numpy vector."""
        return np.array([self.alpha, self.beta])

    def as_list(self) -> list[float]:
        """Return ``[alpha, beta]`` for JSON output."""
        return [float(self.alpha), float(self.beta)]

    @classmethod
    def from_sequence(cls, values: Any) -> "ShiftScaleParams":
        """Build parameters from any two-element sequence."""
        alpha, beta = (float(v) for v in values)
        return cls(alpha=alpha, beta=beta)

    @classmethod
    def parse(cls, text: str) -> "ShiftScaleParams":
        """Parse the command line form ``"alpha,beta"``."""
        parts = text.split(",")
        if len(parts) != 2:
            msg = f"Expected 'alpha,beta', got '{text}'."
            logger.error(msg)
            raise ValueError(msg)
        return cls.from_sequence(parts)


@dataclass(frozen=True)
class ThetaBox:
    """Admissible parameter box ``(a1, a2) x (b1, b2)`` with ``b1 > 0``."""

    alpha_bounds: tuple[float, float] = DEFAULT_ALPHA_BOUNDS
    beta_bounds: tuple[float, float] = DEFAULT_BETA_BOUNDS

    def __post_init__(self) -> None:
        """Validate the ordering of the bounds."""
        a1, a2 = self.alpha_bounds
        b1, b2 = self.beta_bounds
        if not (a1 < a2 and 0.0 < b1 < b2):
            msg = f"Invalid box: need a1 < a2 and 0 < b1 < b2, got {self.as_dict()}."
            logger.error(msg)
            raise ValueError(msg)

    def lower(self) -> np.ndarray:
        """Return the lower corner ``(a1, b1)``."""
        return np.array([self.alpha_bounds[0], self.beta_bounds[0]])

    def upper(self) -> np.ndarray:
        """Return the upper corner ``(a2, b2)``."""
        return np.array([self.alpha_bounds[1], self.beta_bounds[1]])

    def contains(self, params: ShiftScaleParams) -> bool:
        """Check whether the parameters lie in the open box."""
        a1, a2 = self.alpha_bounds
        b1, b2 = self.beta_bounds
        return a1 < params.alpha < a2 and b1 < params.beta < b2

    def shifted(self, offset: float) -> "ThetaBox":
        """Translate the shift bounds by ``offset``."""
        a1, a2 = self.alpha_bounds
        return ThetaBox((a1 + offset, a2 + offset), self.beta_bounds)

    def as_dict(self) -> dict[str, list[float]]:
        """Represent the box for JSON output."""
        return {"alpha": list(self.alpha_bounds), "beta": list(self.beta_bounds)}

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "ThetaBox":
        """Build a box from ``{"alpha": [a1, a2], "beta": [b1, b2]}``."""
        return cls(tuple(payload["alpha"]), tuple(payload["beta"]))


@dataclass(frozen=True)
class GridSpec:
    """Symmetric range ``[-half_width, half_width]`` used to check the conditions.

    ``half_width=None`` takes the widest end of the model's effective support.
    """

    half_width: float | None = None
    nodes: int = POSITIVITY_NODES


@dataclass
class ConditionReport:
    """Numerical evidence for the positivity and moment conditions on the base."""

    r1_positive: bool
    c3_second_moment: float
    c3_fourth_moment_prime: float
    c4_bound: float
    all_finite: bool
    half_width: float = 0.0
    failures: list[str] = field(default_factory=list)

    def as_dict(self) -> dict[str, Any]:
        """Represent the report for JSON output."""
        return asdict(self)
