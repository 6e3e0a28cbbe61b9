"""Seeded Monte Carlo engine: single trials, phase-transition sweeps, diagnostic batches.

Trial seeds are split from the root seed by ``(S, m, trial index)``, so results
do not depend on worker count, execution order or how many trials a cell runs.
"""

import math
import time
from collections.abc import Iterator
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from fastmcp.utilities.logging import get_logger

from ..sensing.bases import Basis, build_basis
from ..sensing.diagnostics import coherence_sweep, conditioning_trend, operator_coherence, row_norm_sweep
from ..sensing.errors import ConfigurationError, SensingError
from ..sensing.filters import sample_filter
from ..sensing.measurement import MeasurementOperator, build_operator, sample_mask, to_dense
from ..sensing.recovery import (
    LinearMap,
    RecoveryResult,
    SparseSignal,
    certificate_for_map,
    composite_map,
    dense_map,
    sample_sparse_signal,
    solve_bp,
    solve_bp_dense,
)
from ..sensing.seeding import STREAM_FILTER, STREAM_MASK, STREAM_SIGNAL, derive_seed
from .config import ExperimentConfig, GateFormula, Pipeline

logger = get_logger(__name__)

RELATIVE_ERROR_LIMIT = 1e-6
SUCCESS_LEVEL = 0.9


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one seeded trial. ``wall_time`` is excluded from equality."""

    cell: tuple[int, int]
    seed: int
    realized_m: int
    recovered: bool
    certified: bool
    iterations: int
    residual_norm: float
    converged: bool
    relative_error: float
    coherence: float | None = None
    error: str | None = None
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        return {
            "S": self.cell[0],
            "m": self.cell[1],
            "seed": self.seed,
            "realized_m": self.realized_m,
            "recovered": self.recovered,
            "certified": self.certified,
            "iterations": self.iterations,
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "relative_error": self.relative_error,
            "coherence": self.coherence,
            "error": self.error,
            "wall_time": self.wall_time,
        }


@dataclass(frozen=True)
class TrialInstance:
    """The sampled objects of one trial, before solving."""

    operator: MeasurementOperator
    basis: Basis
    signal: SparseSignal
    measurements: np.ndarray


def trial_seed(config: ExperimentConfig, sparsity: int, m: int, index: int) -> int:
    return derive_seed(config.root_seed, sparsity, m, index)


def build_instance(config: ExperimentConfig, cell: tuple[int, int], seed: int) -> TrialInstance:
    """Sample filter, mask and sparse signal from ``seed`` and measure."""
    sparsity, m = cell
    if sparsity < 1:
        raise ConfigurationError(f"sparsity must be at least 1, got {sparsity}")
    random_filter = sample_filter(config.n, config.filter.distribution(), derive_seed(seed, STREAM_FILTER))
    mask = sample_mask(config.total_rows, m, config.mask_model, derive_seed(seed, STREAM_MASK))
    op = build_operator(random_filter, config.branch_mode, mask)
    basis = build_basis(config.basis_kind, config.n)
    signal = sample_sparse_signal(basis, sparsity, config.magnitude_law, derive_seed(seed, STREAM_SIGNAL))
    return TrialInstance(operator=op, basis=basis, signal=signal, measurements=op.forward(signal.signal))


def solve_instance(config: ExperimentConfig, instance: TrialInstance) -> tuple[RecoveryResult, LinearMap]:
    params = config.solver.params()
    if config.pipeline is Pipeline.DENSE:
        matrix = to_dense(instance.operator) @ instance.basis.to_dense()
        return solve_bp_dense(matrix, instance.measurements, params, instance.signal), dense_map(matrix)
    A = composite_map(instance.operator, instance.basis)
    return solve_bp(A, instance.measurements, params, instance.signal), A


def run_trial(config: ExperimentConfig, cell: tuple[int, int], trial_seed: int) -> TrialResult:
    """Measure, decode and certify one instance; numerical failures are recorded, not raised."""
    start = time.perf_counter()
    instance = build_instance(config, cell, trial_seed)
    truth = instance.signal
    mu = None
    if config.gate_formula is GateFormula.MU_SQUARED_LOG_SQUARED:
        mu = operator_coherence(instance.operator, instance.basis, config.delta).measured
    try:
        result, A = solve_instance(config, instance)
        certificate = certificate_for_map(A, truth.support, truth.signs, config.alpha_threshold)
    except (SensingError, np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        logger.warning("trial %d in cell %s failed: %s", trial_seed, cell, exc)
        return TrialResult(cell=cell, seed=trial_seed, realized_m=instance.operator.realized_m, recovered=False,
                           certified=False, iterations=0, residual_norm=float("inf"), converged=False,
                           relative_error=float("inf"), coherence=mu, error=str(exc),
                           wall_time=time.perf_counter() - start)
    relative_error = result.coefficient_error(truth.coefficients) / float(np.linalg.norm(truth.coefficients))
    recovered = bool(result.converged and result.support_exact and relative_error <= RELATIVE_ERROR_LIMIT)
    if not result.converged:
        logger.debug("solver did not converge for trial %d in cell %s", trial_seed, cell)
    return TrialResult(
        cell=cell, seed=trial_seed, realized_m=instance.operator.realized_m, recovered=recovered,
        certified=certificate.certified, iterations=result.iterations, residual_norm=result.residual_norm,
        converged=result.converged, relative_error=relative_error, coherence=mu,
        wall_time=time.perf_counter() - start,
    )


def run_cell(config: ExperimentConfig, cell: tuple[int, int]) -> list[TrialResult]:
    sparsity, m = cell
    return [run_trial(config, cell, trial_seed(config, sparsity, m, t)) for t in range(config.trials_per_cell)]


def gate_m(config: ExperimentConfig, sparsity: int) -> float:
    """``c0 S log(n / delta)``."""
    return config.c0 * sparsity * math.log(config.n / config.delta)


def secondary_gate(config: ExperimentConfig, mu: float | None = None) -> float:
    """``c0' log^3(n/delta)``, or ``c0' mu^2 log^2(n/delta)`` from measured coherence."""
    log_term = math.log(config.n / config.delta)
    if config.gate_formula is GateFormula.LOG_CUBED:
        return config.c0_prime * log_term**3
    if mu is None:
        return float("nan")
    return config.c0_prime * mu * mu * log_term**2


@dataclass(frozen=True)
class CellSummary:
    sparsity: int
    m: int
    trials: int
    successes: int
    certified: int
    mean_iterations: float
    gate_m: float
    root_seed: int
    secondary_gate: float = float("nan")
    mean_realized_m: float = float("nan")
    converged: int = 0

    CSV_FIELDS = ("S", "m", "trials", "successes", "success_rate", "cert_rate", "mean_iterations", "gate_m",
                  "root_seed")

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials

    @property
    def cert_rate(self) -> float:
        return self.certified / self.trials

    @property
    def success_stderr(self) -> float:
        p = self.success_rate
        return math.sqrt(p * (1.0 - p) / self.trials)

    def csv_row(self) -> list:
        return [self.sparsity, self.m, self.trials, self.successes, self.success_rate, self.cert_rate,
                self.mean_iterations, self.gate_m, self.root_seed]

    def to_dict(self) -> dict:
        row = dict(zip(self.CSV_FIELDS, self.csv_row()))
        row.update(secondary_gate=self.secondary_gate, mean_realized_m=self.mean_realized_m,
                   converged=self.converged)
        return row

    @classmethod
    def from_dict(cls, data: dict) -> "CellSummary":
        return cls(sparsity=int(data["S"]), m=int(data["m"]), trials=int(data["trials"]),
                   successes=int(data["successes"]), certified=round(float(data["cert_rate"]) * int(data["trials"])),
                   mean_iterations=float(data["mean_iterations"]), gate_m=float(data["gate_m"]),
                   root_seed=int(data["root_seed"]), secondary_gate=float(data.get("secondary_gate", "nan")),
                   mean_realized_m=float(data.get("mean_realized_m", "nan")),
                   converged=int(data.get("converged", 0)))


def summarize_cell(config: ExperimentConfig, cell: tuple[int, int], trials: list[TrialResult]) -> CellSummary:
    if not trials:
        raise ConfigurationError(f"cell {cell} has no trials")
    sparsity, m = cell
    coherences = [t.coherence for t in trials if t.coherence is not None]
    mu = float(np.mean(coherences)) if coherences else None
    return CellSummary(
        sparsity=sparsity, m=m, trials=len(trials), successes=sum(t.recovered for t in trials),
        certified=sum(t.certified for t in trials), mean_iterations=float(np.mean([t.iterations for t in trials])),
        gate_m=gate_m(config, sparsity), root_seed=config.root_seed, secondary_gate=secondary_gate(config, mu),
        mean_realized_m=float(np.mean([t.realized_m for t in trials])), converged=sum(t.converged for t in trials),
    )


def _cell_task(args: tuple[ExperimentConfig, tuple[int, int]]) -> list[TrialResult]:
    config, cell = args
    return run_cell(config, cell)


def iter_phase_cells(config: ExperimentConfig) -> Iterator[CellSummary]:
    """Yield cell summaries in grid order (S outer, m inner)."""
    cells = config.cells()
    if config.workers <= 1:
        for cell in cells:
            yield summarize_cell(config, cell, run_cell(config, cell))
        return
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        for cell, trials in zip(cells, pool.map(_cell_task, [(config, c) for c in cells])):
            yield summarize_cell(config, cell, trials)


@dataclass(frozen=True)
class PhaseTransitionResult:
    config: ExperimentConfig
    cells: tuple[CellSummary, ...]

    def cell(self, sparsity: int, m: int) -> CellSummary:
        for c in self.cells:
            if c.sparsity == sparsity and c.m == m:
                return c
        raise KeyError((sparsity, m))

    def by_sparsity(self, sparsity: int) -> list[CellSummary]:
        return sorted((c for c in self.cells if c.sparsity == sparsity), key=lambda c: c.m)

    def threshold(self, sparsity: int, level: float = SUCCESS_LEVEL) -> int | None:
        """Smallest grid m whose success rate reaches ``level``."""
        for c in self.by_sparsity(sparsity):
            if c.success_rate >= level:
                return c.m
        return None

    def thresholds(self, level: float = SUCCESS_LEVEL) -> dict[int, int | None]:
        return {s: self.threshold(s, level) for s in sorted({c.sparsity for c in self.cells})}

    def empirical_c0(self, level: float = SUCCESS_LEVEL) -> float | None:
        """``max_S m*(S) / (S log(n/delta))`` over the sparsities that reach ``level``."""
        log_term = math.log(self.config.n / self.config.delta)
        ratios = [m_star / (s * log_term) for s, m_star in self.thresholds(level).items() if m_star is not None]
        return max(ratios) if ratios else None

    def monotone_in_m(self, sigmas: float = 2.0) -> bool:
        for s in {c.sparsity for c in self.cells}:
            row = self.by_sparsity(s)
            for prev, cur in zip(row, row[1:]):
                slack = sigmas * math.hypot(prev.success_stderr, cur.success_stderr)
                if cur.success_rate < prev.success_rate - slack:
                    return False
        return True

    def calibration(self) -> dict:
        return {
            "level": SUCCESS_LEVEL,
            "thresholds": {str(s): m for s, m in self.thresholds().items()},
            "empirical_c0": self.empirical_c0(),
            "secondary_gate": secondary_gate(self.config) if self.config.gate_formula is GateFormula.LOG_CUBED
            else None,
        }


def run_phase_transition(config: ExperimentConfig) -> PhaseTransitionResult:
    """Run every (S, m) cell of the grid and summarize it."""
    log_term = math.log(config.n / config.delta)
    logger.info("phase sweep n=%d, %d cells x %d trials, root seed %d", config.n, len(config.cells()),
                config.trials_per_cell, config.root_seed)
    if config.gate_formula is GateFormula.LOG_CUBED:
        logger.info("secondary gate c0' log^3(n/delta) = %.2f (reference only)", secondary_gate(config))
    result = PhaseTransitionResult(config=config, cells=tuple(iter_phase_cells(config)))
    logger.info("calibrated thresholds %s, empirical C0 %s (S log(n/delta) unit %.2f)",
                result.thresholds(), result.empirical_c0(), log_term)
    return result


def run_diagnostics(config: ExperimentConfig) -> dict:
    """Coherence sweep, row-norm sweeps per S, and the conditioning trend if configured."""
    settings = config.diagnostics
    dist = config.filter.distribution()
    report: dict = {
        "n": config.n,
        "delta": config.delta,
        "root_seed": config.root_seed,
        "coherence": coherence_sweep(dist, config.n, config.delta, settings.seeds, config.root_seed,
                                     config.basis_kind, settings.include_identity, config.workers).to_dict(),
        "row_norm": [
            row_norm_sweep(dist, config.n, s, config.delta, settings.seeds, config.root_seed, config.basis_kind,
                           settings.premise_c, config.workers).to_dict()
            for s in config.sparsity_grid
        ],
    }
    if len(settings.conditioning_m) >= 2:
        trend = conditioning_trend(dist, config.n, config.sparsity_grid[0], settings.conditioning_m, settings.seeds,
                                   config.root_seed, config.basis_kind, config.branch_mode, config.mask_model,
                                   config.workers)
        report["conditioning"] = trend.to_dict()
    return report
