"""Include argument definitions and shared fixtures for testing."""

import numpy as np
import pytest

from apf_poisson.data_classes.dataset import Dataset, Trajectory
from apf_poisson.data_classes.intensity import (
    BaseIntensityModel,
    GaussianBase,
    LogisticBase,
    ShiftScaleParams,
    TabulatedBase,
)

TEST_SEED = 7
TEST_DECIMALS_ACCURACY = 6
TEST_RTOL = 1e-6

GAUSS2_MASS = 2.0 * np.sqrt(2.0 * np.pi)
GAUSS2_FISHER_DIAG = (5.013257, 15.039772)
THETA_NULL = ShiftScaleParams(2.0, 1.5)


class CauchyBase(BaseIntensityModel):
    """Heavy tailed base whose second moment diverges."""

    def __init__(self) -> None:
        """Register under the identifier ``cauchy``."""
        super().__init__("cauchy")

    def lambda0(self, s):
        """Evaluate the Cauchy density."""
        return 1.0 / (np.pi * (1.0 + np.square(s)))

    def lambda0_prime(self, s):
        """Evaluate its derivative."""
        return -2.0 * np.asarray(s) / (np.pi * (1.0 + np.square(s)) ** 2)

    def Lambda0(self, s):
        """Evaluate the Cauchy distribution function."""
        return 0.5 + np.arctan(s) / np.pi

    @property
    def Lambda0_total(self) -> float:
        """Unit mass."""
        return 1.0

    def Lambda0_inv(self, r):
        """Evaluate the Cauchy quantile function."""
        return np.tan(np.pi * (np.asarray(r) - 0.5))


def tabulate(
    model: BaseIntensityModel, lo: float, hi: float, nodes: int
) -> TabulatedBase:
    """Tabulate a model on a uniform grid, keeping its identifier with a suffix."""
    s = np.linspace(lo, hi, nodes)
    return TabulatedBase(f"{model.model_id}_tab", s, model.lambda0(s))


def gumbel_table() -> TabulatedBase:
    """Asymmetric tabulated base ``3 * exp(-s - exp(-s))``."""
    s = np.linspace(-3.5, 12.0, 1551)
    return TabulatedBase("gumbel3", s, 3.0 * np.exp(-s - np.exp(-s)))


@pytest.fixture
def gauss2() -> GaussianBase:
    """Bundled Gaussian base."""
    return GaussianBase()


@pytest.fixture
def logistic5() -> LogisticBase:
    """Bundled logistic base."""
    return LogisticBase()


@pytest.fixture
def cauchy() -> CauchyBase:
    """Base that violates the moment conditions."""
    return CauchyBase()


@pytest.fixture
def tiny_dataset() -> Dataset:
    """Two trajectories with events {1, 2} and {3}."""
    return Dataset(
        trajectories=(Trajectory(np.array([1.0, 2.0])), Trajectory(np.array([3.0]))),
        model_id="gauss2",
    )


def empty_dataset(n: int = 1) -> Dataset:
    """Dataset of ``n`` trajectories without events."""
    trajectories = tuple(Trajectory() for _ in range(n))
    return Dataset(trajectories=trajectories, model_id="gauss2")
