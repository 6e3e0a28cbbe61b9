"""Seeded Monte Carlo plumbing shared by the statistical checks.

Trials are grouped into fixed-size blocks. Each block draws from its own
generator derived from ``(seed, block_index)`` and returns additive partial
sums, so the merged estimate does not depend on worker count.
"""

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TypeVar

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigurationError
from .seeding import block_sizes, make_rng

T = TypeVar("T")

DEFAULT_BLOCK = 4096


@dataclass(frozen=True)
class MeanEstimate:
    """Sample mean with its standard error, elementwise."""

    mean: NDArray[np.float64]
    stderr: NDArray[np.float64]

    def z_scores(self, target: float | NDArray[np.float64]) -> NDArray[np.float64]:
        """|mean - target| in units of standard error (inf where stderr is 0 and they differ)."""
        diff = np.abs(self.mean - target)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(self.stderr > 0, diff / self.stderr, np.where(diff > 0, np.inf, 0.0))
        return z

    def within(self, target: float | NDArray[np.float64], sigmas: float = 3.0) -> NDArray[np.bool_]:
        return self.z_scores(target) <= sigmas


class MomentSums:
    """Running first and second moment sums of a batch of samples."""

    def __init__(self) -> None:
        self.count = 0
        self.total: NDArray[np.float64] | None = None
        self.total_sq: NDArray[np.float64] | None = None

    def add_sums(self, count: int, total: NDArray[np.float64], total_sq: NDArray[np.float64]) -> None:
        self.count += count
        self.total = total if self.total is None else self.total + total
        self.total_sq = total_sq if self.total_sq is None else self.total_sq + total_sq

    def add(self, samples: NDArray[np.float64]) -> None:
        """Add samples stacked along axis 0."""
        self.add_sums(samples.shape[0], samples.sum(axis=0), np.square(samples).sum(axis=0))

    def estimate(self) -> MeanEstimate:
        if self.count == 0 or self.total is None or self.total_sq is None:
            raise ConfigurationError("no samples accumulated")
        mean = self.total / self.count
        var = np.maximum(self.total_sq / self.count - np.square(mean), 0.0)
        # var/(count-1) is the unbiased variance of the mean
        stderr = np.sqrt(var / max(self.count - 1, 1))
        return MeanEstimate(mean=np.asarray(mean, dtype=np.float64), stderr=np.asarray(stderr, dtype=np.float64))


def require_trials(trials: int, minimum: int, what: str) -> None:
    if trials < minimum:
        raise ConfigurationError(f"{what} needs at least {minimum} trials, got {trials}")


def run_blocks(
    seed: int,
    trials: int,
    block_fn: Callable[[np.random.Generator, int], T],
    block: int = DEFAULT_BLOCK,
    workers: int = 1,
) -> list[T]:
    """Run ``block_fn(rng, size)`` over all trial blocks, results in block order."""
    sizes = block_sizes(trials, block)

    def job(index: int) -> T:
        return block_fn(make_rng(seed, index), sizes[index])

    if workers <= 1 or len(sizes) <= 1:
        return [job(i) for i in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(len(sizes))))


def binomial_stderr(rate: float, trials: int) -> float:
    if trials <= 0:
        return float("nan")
    return float(np.sqrt(max(rate * (1.0 - rate), 0.0) / trials))
