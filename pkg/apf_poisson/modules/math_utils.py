"""Numerical helpers shared by the estimation, simulation and testing modules."""

import hashlib
import json
from collections.abc import Callable, Sequence
from typing import Any

import numpy as np
from joblib import Parallel, delayed
from loguru import logger
from scipy.stats import binomtest

from config.definitions import (
    BOOTSTRAP_RESAMPLES,
    CONFIDENCE_LEVEL,
    EPSILON,
    INVERSE_STEP_RTOL,
    INVERSE_MAX_ITER,
)


def symmetrize_matrix(matrix: np.ndarray) -> np.ndarray:
    """Symmetrize a matrix.

    :param matrix: A square matrix represented as a numpy array.
    :return: The average of the matrix and its transpose.
    """
    if np.shape(matrix)[0] != np.shape(matrix)[1]:
        dim = matrix.shape
        msg = f"Input matrix must be square. Matrix has dimensions: {dim[0]}x{dim[1]}."
        logger.error(msg)
        raise ValueError(msg)

    return (matrix + matrix.T) / 2


def central_difference(
    fun: Callable[[np.ndarray], float | np.ndarray],
    x: np.ndarray,
    x_idx: int,
    step: float = EPSILON,
) -> float | np.ndarray:
    """Compute the central finite difference of a function along one coordinate.

    The step is scaled by ``1 + |x[x_idx]|`` so large coordinates keep a usable
    relative perturbation.

    :param fun: Function of a 1-D parameter vector
    :param x: Point at which to differentiate
    :param x_idx: Index of the variable to differentiate
    :param step: Base step size
    :return: Derivative value
    """
    h = step * (1.0 + abs(float(x[x_idx])))
    x_copy1, x_copy2 = np.array(x, dtype=float), np.array(x, dtype=float)
    x_copy1[x_idx] = x_copy1[x_idx] - h
    x_copy2[x_idx] = x_copy2[x_idx] + h
    return (np.asarray(fun(x_copy2)) - np.asarray(fun(x_copy1))) / (2 * h)


def numerical_gradient(
    fun: Callable[[np.ndarray], float], x: np.ndarray, step: float = EPSILON
) -> np.ndarray:
    """Compute the gradient of a scalar function by central differences.

    :param fun: Scalar function of a 1-D parameter vector
    :param x: Point at which to differentiate
    :param step: Base step size
    :return: Gradient vector
    """
    return np.array(
        [float(central_difference(fun, x, idx, step)) for idx in range(len(x))]
    )


def monotone_inverse(
    fun: Callable[[np.ndarray], np.ndarray],
    deriv: Callable[[np.ndarray], np.ndarray],
    targets: float | np.ndarray,
    tol: float = INVERSE_STEP_RTOL,
    max_iter: int = INVERSE_MAX_ITER,
) -> float | np.ndarray:
    """Invert a strictly increasing function by safeguarded Newton iteration.

    Each target is first bracketed by doubling outward from [-1, 1]; afterwards a
    Newton step is taken whenever it stays inside the bracket and a bisection step
    otherwise.

    :param fun: Strictly increasing vectorized function
    :param deriv: Its derivative
    :param targets: Values to invert, inside the open range of ``fun``
    :param tol: Tolerance on the Newton step relative to ``1 + |x|``
    :param max_iter: Iteration cap for both the bracketing and the refinement
    :return: Arguments mapping onto the targets, same shape as ``targets``
    """
    r = np.atleast_1d(np.asarray(targets, dtype=float))
    lo = np.full_like(r, -1.0)
    hi = np.full_like(r, 1.0)

    for _ in range(max_iter):
        too_high = fun(lo) > r
        too_low = fun(hi) < r
        if not (too_high.any() or too_low.any()):
            break
        lo = np.where(too_high, 2.0 * lo, lo)
        hi = np.where(too_low, 2.0 * hi, hi)
    else:
        msg = "Could not bracket the inverse; targets may lie outside the range."
        logger.error(msg)
        raise ValueError(msg)

    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        residual = fun(x) - r
        lo = np.where(residual < 0.0, x, lo)
        hi = np.where(residual > 0.0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(residual == 0.0, 0.0, residual / deriv(x))
        newton = x - step
        outside = (newton <= lo) | (newton >= hi)
        unsafe = ~np.isfinite(newton) | (outside & (step != 0.0))
        x = np.where(unsafe, 0.5 * (lo + hi), newton)
        converged = ~unsafe & (np.abs(step) <= tol * (1.0 + np.abs(x)))
        if np.all(converged | (hi - lo <= 4.0 * np.spacing(np.abs(x) + 1.0))):
            break

    if np.ndim(targets) == 0:
        return float(x[0])
    return np.reshape(x, np.shape(targets))


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Create the PCG64 generator for the substream ``key`` of ``seed``.

    :param seed: Non-negative 64-bit root seed
    :param key: Substream path, e.g. ``(j,)`` for trajectory ``j``
    :return: Independent generator
    """
    if seed < 0:
        msg = f"Seeds must be non-negative integers, got {seed}."
        logger.error(msg)
        raise ValueError(msg)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def derive_seed(seed: int, *key: int) -> int:
    """Derive a 64-bit child seed for the substream ``key`` of ``seed``."""
    sequence = np.random.SeedSequence(seed, spawn_key=key)
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def map_chunks(
    fun: Callable[[int, int], Any], num_items: int, chunk: int, threads: int = 1
) -> list[Any]:
    """Apply ``fun(start, stop)`` over fixed index chunks, optionally in threads.

    The chunk partition depends only on ``num_items`` and ``chunk``; the results come
    back in index order for every worker count.

    :param fun: Work function for the half-open index range ``[start, stop)``
    :param num_items: Number of items to cover
    :param chunk: Items per chunk
    :param threads: Worker count
    :return: Per-chunk results in order
    """
    bounds = [
        (start, min(start + chunk, num_items)) for start in range(0, num_items, chunk)
    ]
    if threads <= 1 or len(bounds) <= 1:
        return [fun(start, stop) for start, stop in bounds]
    return Parallel(n_jobs=threads, prefer="threads")(
        delayed(fun)(start, stop) for start, stop in bounds
    )


def quantile_type7(
    sample: np.ndarray, probs: Sequence[float] | np.ndarray
) -> np.ndarray:
    """Return the linearly interpolated (type 7) sample quantiles."""
    return np.quantile(np.asarray(sample), np.asarray(probs), method="linear")


def bootstrap_quantile_stderr(
    sample: np.ndarray,
    probs: Sequence[float] | np.ndarray,
    rng: np.random.Generator,
    resamples: int = BOOTSTRAP_RESAMPLES,
) -> np.ndarray:
    """Estimate the standard error of type 7 quantiles by the nonparametric bootstrap.

    :param sample: Monte Carlo sample
    :param probs: Quantile levels
    :param rng: Generator driving the resampling
    :param resamples: Number of bootstrap resamples
    :return: One standard error per level
    """
    sample = np.asarray(sample)
    size = len(sample)
    estimates = np.empty((resamples, len(probs)))
    for ii in range(resamples):
        resample = sample[rng.integers(0, size, size=size)]
        estimates[ii] = quantile_type7(resample, probs)
    return np.std(estimates, axis=0, ddof=1)


def wilson_interval(
    successes: int, trials: int, confidence: float = CONFIDENCE_LEVEL
) -> tuple[float, float]:
    """Compute the Wilson score interval of a binomial proportion."""
    if trials <= 0:
        msg = "The Wilson interval needs at least one trial."
        logger.error(msg)
        raise ValueError(msg)
    interval = binomtest(successes, trials).proportion_ci(
        confidence_level=confidence, method="wilson"
    )
    return float(interval.low), float(interval.high)


def _to_builtin(value: Any) -> Any:
    """Convert numpy scalars and arrays for the JSON encoder."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    msg = f"Object of type {type(value).__name__} is not JSON serializable."
    raise TypeError(msg)


def dump_json(payload: dict[str, Any]) -> str:
    """Serialize a payload with a fixed layout so equal inputs give equal bytes."""
    return json.dumps(payload, indent=2, default=_to_builtin) + "\n"


def config_hash(config: dict[str, Any]) -> str:
    """Return the SHA-256 digest of a configuration in canonical JSON form."""
    canonical = json.dumps(
        config, sort_keys=True, separators=(",", ":"), default=_to_builtin
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
