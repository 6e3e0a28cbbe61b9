"""Measured coherence, row norms and Gram conditioning against their bounds.

Each probabilistic bound holds "with probability exceeding 1 - delta", so a
single violating seed is not a failure. Sweeps report violation frequencies
with binomial standard errors instead.
"""

import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TypeVar

import numpy as np
import scipy.linalg
from fastmcp.utilities.logging import get_logger
from numpy.typing import ArrayLike, NDArray

from .bases import Basis, BasisKind, build_basis
from .errors import ConfigurationError, ResourceLimitError
from .filters import FilterDistribution, sample_filter
from .measurement import (
    DENSE_LIMIT,
    BranchMode,
    MaskModel,
    MeasurementOperator,
    build_operator,
    full_mask,
    sample_mask,
)
from .montecarlo import binomial_stderr
from .seeding import STREAM_FILTER, STREAM_MASK, STREAM_SUPPORT, derive_seed, make_rng
from .spectral import check_dimension

logger = get_logger(__name__)

T = TypeVar("T")

CONDITIONING_BOUND = 0.5


@dataclass(frozen=True)
class BoundCheck:
    name: str
    measured: float
    bound: float
    context: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return bool(self.measured <= self.bound)

    def to_dict(self) -> dict:
        return {"name": self.name, "measured": self.measured, "bound": self.bound, "holds": self.holds,
                "context": self.context}


def coherence_bound(n: int, delta: float) -> float:
    """``sqrt(2 log(sqrt(2) n / (sqrt(pi) delta)))``, natural log."""
    if not 0 < delta < 1:
        raise ConfigurationError(f"delta must lie in (0, 1), got {delta}")
    return math.sqrt(2.0 * math.log(math.sqrt(2.0) * n / (math.sqrt(math.pi) * delta)))


def row_norm_limit(sparsity: int) -> float:
    return math.sqrt(8.0 * sparsity)


def coherence(H: ArrayLike, Psi: ArrayLike, delta: float, seed: int | None = None) -> BoundCheck:
    """Largest absolute entry of ``H @ Psi`` against the coherence bound.

    ``H`` may be the convolution branch alone (``n x n``) or a stacked
    operator; the bound always uses the signal dimension ``n``.
    """
    H = np.asarray(H, dtype=np.float64)
    Psi = np.asarray(Psi, dtype=np.float64)
    n = Psi.shape[0]
    if n > DENSE_LIMIT:
        raise ResourceLimitError(f"coherence needs the dense path, n={n} exceeds {DENSE_LIMIT}")
    measured = float(np.max(np.abs(H @ Psi)))
    return BoundCheck("coherence", measured, coherence_bound(n, delta),
                      {"n": n, "rows": int(H.shape[0]), "delta": delta, "seed": seed})


def _unmasked(op: MeasurementOperator, branch_mode: BranchMode = BranchMode.CONVOLUTION_ONLY) -> MeasurementOperator:
    return build_operator(op.filter, branch_mode, full_mask(branch_mode.total_rows(op.n)))


def operator_coherence(op: MeasurementOperator, basis: Basis, delta: float,
                       include_identity: bool = False) -> BoundCheck:
    """Coherence of the convolution branch with ``basis``; optionally over the whole stack."""
    if op.n > DENSE_LIMIT:
        raise ResourceLimitError(f"coherence needs the dense path, n={op.n} exceeds {DENSE_LIMIT}")
    mode = BranchMode.DUAL_BRANCH if include_identity else BranchMode.CONVOLUTION_ONLY
    product = _unmasked(op, mode).forward_columns(basis.to_dense())
    measured = float(np.max(np.abs(product)))
    return BoundCheck("coherence", measured, coherence_bound(op.n, delta),
                      {"n": op.n, "rows": int(product.shape[0]), "delta": delta, "seed": op.filter.seed,
                       "include_identity": include_identity})


def row_norm_bound(op: MeasurementOperator, basis: Basis, support: ArrayLike, delta: float = 0.1,
                   premise_c: float = 2.0) -> BoundCheck:
    """``v(G) = max_k ||r_k||_2`` over the rows of ``H Psi_G`` against ``sqrt(8 S)``."""
    support = np.asarray(support, dtype=np.int64)
    sparsity = int(support.size)
    if sparsity < 1:
        raise ConfigurationError("row_norm_bound needs a nonempty support")
    if op.n > DENSE_LIMIT:
        raise ResourceLimitError(f"row_norm_bound needs the dense path, n={op.n} exceeds {DENSE_LIMIT}")
    rows = _unmasked(op).forward_columns(basis.columns(support))
    measured = float(np.max(np.linalg.norm(rows, axis=1)))
    premise = premise_c * math.log(op.n / delta)
    if sparsity < premise:
        logger.debug("row-norm premise S >= C log(n/delta) fails: S=%d < %.2f", sparsity, premise)
    return BoundCheck("row_norm", measured, row_norm_limit(sparsity),
                      {"n": op.n, "S": sparsity, "delta": delta, "seed": op.filter.seed,
                       "premise_holds": sparsity >= premise})


def gram_conditioning(op: MeasurementOperator, basis: Basis, support: ArrayLike) -> BoundCheck:
    """Largest |eigenvalue| of ``(1/m) Phi_G^T Phi_G - I`` against 1/2.

    ``Phi = R_Omega H_c Psi`` in the operator's own branch mode. An empty mask
    yields a failed check with an infinite measurement.
    """
    support = np.asarray(support, dtype=np.int64)
    m = op.realized_m
    context = {"n": op.n, "m": m, "S": int(support.size), "seed": op.filter.seed,
               "mask_seed": op.mask.seed}
    if m == 0:
        return BoundCheck("gram_conditioning", float("inf"), CONDITIONING_BOUND, {**context, "empty_mask": True})
    phi = op.forward_columns(basis.columns(support))
    deviation = phi.T @ phi / m - np.eye(support.size)
    measured = float(np.max(np.abs(scipy.linalg.eigvalsh(deviation))))
    # expectation-side trend term sqrt(log|T|) / sqrt(m) * v, with v the largest sampled row norm
    v = float(np.max(np.linalg.norm(phi, axis=1)))
    context["trend_term"] = math.sqrt(math.log(max(support.size, 2))) / math.sqrt(m) * v
    return BoundCheck("gram_conditioning", measured, CONDITIONING_BOUND, context)


def side_conditions(m: int, v: float, mu: float) -> dict:
    """Check ``sqrt(m) <= v^2 / mu`` and ``v^2 <= 4 sqrt(m) / mu``; logged, never enforced."""
    first = math.sqrt(m) <= v * v / mu if mu > 0 else True
    second = v * v <= 4.0 * math.sqrt(m) / mu if mu > 0 else True
    if not (first and second):
        logger.info("side conditions at m=%d: sqrt(m) <= v^2/mu is %s, v^2 <= 4 sqrt(m)/mu is %s",
                    m, first, second)
    return {"sqrt_m_le_v2_over_mu": first, "v2_le_4sqrt_m_over_mu": second}


def _map_seeds(fn: Callable[[int], T], count: int, workers: int) -> list[T]:
    if workers <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


@dataclass(frozen=True)
class BoundSweep:
    """Violation frequency of one bound over seeded instances."""

    name: str
    n: int
    trials: int
    violations: int
    delta: float
    bound: float
    measured_mean: float
    measured_max: float
    context: dict = field(default_factory=dict)

    @property
    def rate(self) -> float:
        return self.violations / self.trials

    @property
    def stderr(self) -> float:
        return binomial_stderr(self.rate, self.trials)

    def tolerance(self, sigmas: float = 3.0) -> float:
        """``delta`` plus ``sigmas`` binomial standard errors evaluated at ``delta``."""
        return self.delta + sigmas * binomial_stderr(self.delta, self.trials)

    def holds(self, sigmas: float = 3.0) -> bool:
        return self.rate <= self.tolerance(sigmas)

    def to_dict(self) -> dict:
        return {"name": self.name, "n": self.n, "trials": self.trials, "violations": self.violations,
                "rate": self.rate, "stderr": self.stderr, "delta": self.delta, "bound": self.bound,
                "tolerance": self.tolerance(), "holds": self.holds(), "measured_mean": self.measured_mean,
                "measured_max": self.measured_max, "context": self.context}


def _sweep(name: str, n: int, delta: float, checks: Sequence[BoundCheck], context: dict) -> BoundSweep:
    measured = np.array([c.measured for c in checks])
    sweep = BoundSweep(name=name, n=n, trials=len(checks), violations=sum(not c.holds for c in checks),
                       delta=delta, bound=checks[0].bound, measured_mean=float(measured.mean()),
                       measured_max=float(measured.max()), context=context)
    logger.info("%s sweep n=%d: %d/%d violations (rate %.4f, tolerance %.4f)",
                name, n, sweep.violations, sweep.trials, sweep.rate, sweep.tolerance())
    return sweep


def coherence_sweep(dist: FilterDistribution, n: int, delta: float, seeds: int, root_seed: int,
                    basis_kind: BasisKind | str = BasisKind.IDENTITY, include_identity: bool = False,
                    workers: int = 1) -> BoundSweep:
    n = check_dimension(n)
    if seeds < 1:
        raise ConfigurationError("a sweep needs at least one seed")
    basis = build_basis(basis_kind, n)

    def one(i: int) -> BoundCheck:
        random_filter = sample_filter(n, dist, derive_seed(root_seed, i, STREAM_FILTER))
        op = build_operator(random_filter, BranchMode.CONVOLUTION_ONLY, full_mask(n))
        return operator_coherence(op, basis, delta, include_identity)

    checks = _map_seeds(one, seeds, workers)
    return _sweep("coherence", n, delta, checks,
                  {"basis": basis.kind.value, "include_identity": include_identity, "root_seed": root_seed})


def random_support(n: int, sparsity: int, seed: int) -> NDArray[np.int64]:
    if not 1 <= sparsity <= n:
        raise ConfigurationError(f"sparsity must lie in [1, {n}], got {sparsity}")
    return np.sort(make_rng(seed).choice(n, size=sparsity, replace=False)).astype(np.int64)


def row_norm_sweep(dist: FilterDistribution, n: int, sparsity: int, delta: float, seeds: int, root_seed: int,
                   basis_kind: BasisKind | str = BasisKind.IDENTITY, premise_c: float = 2.0,
                   workers: int = 1) -> BoundSweep:
    n = check_dimension(n)
    if seeds < 1:
        raise ConfigurationError("a sweep needs at least one seed")
    basis = build_basis(basis_kind, n)

    def one(i: int) -> BoundCheck:
        random_filter = sample_filter(n, dist, derive_seed(root_seed, i, STREAM_FILTER))
        op = build_operator(random_filter, BranchMode.CONVOLUTION_ONLY, full_mask(n))
        support = random_support(n, sparsity, derive_seed(root_seed, i, STREAM_SUPPORT))
        return row_norm_bound(op, basis, support, delta, premise_c)

    checks = _map_seeds(one, seeds, workers)
    premise = premise_c * math.log(n / delta)
    return _sweep("row_norm", n, delta, checks,
                  {"S": sparsity, "basis": basis.kind.value, "premise_holds": sparsity >= premise,
                   "root_seed": root_seed})


@dataclass(frozen=True)
class ConditioningPoint:
    m: int
    trials: int
    mean_deviation: float
    failures: int

    @property
    def failure_rate(self) -> float:
        return self.failures / self.trials

    @property
    def failure_stderr(self) -> float:
        return binomial_stderr(self.failure_rate, self.trials)


@dataclass(frozen=True)
class ConditioningTrend:
    """Gram deviation versus m, with the fitted log-log slope of its mean."""

    n: int
    sparsity: int
    points: tuple[ConditioningPoint, ...]
    slope: float

    def slope_within(self, target: float = -0.5, tolerance: float = 0.15) -> bool:
        return abs(self.slope - target) <= tolerance

    def failures_non_increasing(self, sigmas: float = 2.0) -> bool:
        for prev, cur in zip(self.points, self.points[1:]):
            slack = sigmas * math.hypot(prev.failure_stderr, cur.failure_stderr)
            if cur.failure_rate > prev.failure_rate + slack:
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "S": self.sparsity,
            "slope": self.slope,
            "points": [
                {"m": p.m, "trials": p.trials, "mean_deviation": p.mean_deviation,
                 "failure_rate": p.failure_rate, "failure_stderr": p.failure_stderr}
                for p in self.points
            ],
        }


def conditioning_trend(dist: FilterDistribution, n: int, sparsity: int, m_values: Sequence[int], seeds: int,
                       root_seed: int, basis_kind: BasisKind | str = BasisKind.IDENTITY,
                       branch_mode: BranchMode | str = BranchMode.DUAL_BRANCH,
                       mask_model: MaskModel | str = MaskModel.UNIFORM_SET, workers: int = 1) -> ConditioningTrend:
    """Mean ``||(1/m) Phi_G^T Phi_G - I||`` over seeds for each m, and its slope in m."""
    n = check_dimension(n)
    branch_mode = BranchMode(branch_mode)
    if len(m_values) < 2:
        raise ConfigurationError("a conditioning trend needs at least two values of m")
    if seeds < 1:
        raise ConfigurationError("a sweep needs at least one seed")
    basis = build_basis(basis_kind, n)
    total_rows = branch_mode.total_rows(n)
    points = []
    for j, m in enumerate(m_values):
        if not 1 <= m <= total_rows:
            raise ConfigurationError(f"m={m} outside [1, {total_rows}]")

        def one(i: int, m: int = m) -> BoundCheck:
            random_filter = sample_filter(n, dist, derive_seed(root_seed, i, STREAM_FILTER))
            mask = sample_mask(total_rows, m, mask_model, derive_seed(root_seed, i, STREAM_MASK, m))
            op = build_operator(random_filter, branch_mode, mask)
            support = random_support(n, sparsity, derive_seed(root_seed, i, STREAM_SUPPORT))
            return gram_conditioning(op, basis, support)

        checks = _map_seeds(one, seeds, workers)
        measured = np.array([c.measured for c in checks])
        point = ConditioningPoint(m=int(m), trials=seeds, mean_deviation=float(measured[np.isfinite(measured)].mean()),
                                  failures=int(np.sum(measured >= CONDITIONING_BOUND)))
        points.append(point)
        logger.debug("conditioning m=%d: mean deviation %.4f, trend term %.4f", m, point.mean_deviation,
                     float(np.mean([c.context.get("trend_term", np.nan) for c in checks])))
        if j == 0 and n <= DENSE_LIMIT:
            _log_side_conditions(dist, n, sparsity, m, root_seed, basis)

    slope = float(np.polyfit(np.log([p.m for p in points]), np.log([p.mean_deviation for p in points]), 1)[0])
    logger.info("conditioning trend n=%d S=%d: log-log slope %.3f", n, sparsity, slope)
    return ConditioningTrend(n=n, sparsity=sparsity, points=tuple(points), slope=slope)


def _log_side_conditions(dist: FilterDistribution, n: int, sparsity: int, m: int, root_seed: int,
                         basis: Basis) -> dict:
    random_filter = sample_filter(n, dist, derive_seed(root_seed, 0, STREAM_FILTER))
    op = build_operator(random_filter, BranchMode.CONVOLUTION_ONLY, full_mask(n))
    support = random_support(n, sparsity, derive_seed(root_seed, 0, STREAM_SUPPORT))
    mu = operator_coherence(op, basis, 0.5).measured
    v = row_norm_bound(op, basis, support).measured
    return side_conditions(m, v, mu)
