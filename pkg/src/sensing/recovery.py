"""Sparse signal model, basis pursuit decoder and dual-certificate test.

The decoder solves ``min ||alpha||_1  s.t.  A alpha = y`` for ``A = R_Omega H_c Psi``
using only forward and adjoint applications of ``A``.
"""

from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum
from itertools import combinations

import numpy as np
import scipy.linalg
import scipy.optimize
from fastmcp.utilities.logging import get_logger
from numpy.typing import ArrayLike, NDArray

from .bases import Basis
from .errors import ConfigurationError, InvalidDimensionError
from .measurement import MeasurementOperator
from .seeding import make_rng

logger = get_logger(__name__)

SUPPORT_RATIO = 1e-6
POWER_ITERATIONS = 100
POWER_TOLERANCE = 1e-10
STEP_FRACTION = 0.9
POLISH_THRESHOLD = 1e-3
KKT_SLACK = 1e-9


class MagnitudeLaw(StrEnum):
    UNIT = "unit"
    UNIFORM = "uniform"


@dataclass(frozen=True, eq=False)
class SparseSignal:
    """Coefficients supported on ``support`` with ``signs``, and ``signal = Psi @ coefficients``."""

    support: NDArray[np.int64]
    signs: NDArray[np.float64]
    coefficients: NDArray[np.float64]
    signal: NDArray[np.float64]
    seed: int

    @property
    def sparsity(self) -> int:
        return int(self.support.size)

    @property
    def n(self) -> int:
        return int(self.coefficients.size)


def sample_sparse_signal(basis: Basis, sparsity: int, magnitude_law: MagnitudeLaw | str = MagnitudeLaw.UNIT,
                         seed: int = 0) -> SparseSignal:
    """Uniform random support of size ``sparsity``, uniform random signs."""
    law = MagnitudeLaw(magnitude_law)
    n = basis.n
    if not 1 <= sparsity <= n:
        raise ConfigurationError(f"sparsity must lie in [1, {n}], got {sparsity}")
    rng = make_rng(seed)
    support = np.sort(rng.choice(n, size=sparsity, replace=False)).astype(np.int64)
    signs = rng.choice(np.array([-1.0, 1.0]), size=sparsity)
    magnitudes = np.ones(sparsity) if law is MagnitudeLaw.UNIT else rng.uniform(0.5, 1.5, size=sparsity)
    coefficients = np.zeros(n)
    coefficients[support] = signs * magnitudes
    return SparseSignal(support=support, signs=signs, coefficients=coefficients,
                        signal=basis.synthesize(coefficients), seed=int(seed))


def signal_from_coefficients(basis: Basis, coefficients: ArrayLike, seed: int = 0) -> SparseSignal:
    coefficients = np.asarray(coefficients, dtype=np.float64)
    support = np.flatnonzero(coefficients).astype(np.int64)
    return SparseSignal(support=support, signs=np.sign(coefficients[support]), coefficients=coefficients,
                        signal=basis.synthesize(coefficients), seed=int(seed))


@dataclass(frozen=True)
class LinearMap:
    """A matrix given by its action: ``forward`` maps R^n to R^m, ``adjoint`` back."""

    forward: Callable[[NDArray[np.float64]], NDArray[np.float64]]
    adjoint: Callable[[NDArray[np.float64]], NDArray[np.float64]]
    shape: tuple[int, int]
    columns_fn: Callable[[NDArray[np.int64]], NDArray[np.float64]] | None = None

    def columns(self, indices: ArrayLike) -> NDArray[np.float64]:
        idx = np.asarray(indices, dtype=np.int64)
        if self.columns_fn is not None:
            return self.columns_fn(idx)
        out = np.empty((self.shape[0], idx.size))
        for j, i in enumerate(idx):
            unit = np.zeros(self.shape[1])
            unit[i] = 1.0
            out[:, j] = self.forward(unit)
        return out

    def to_dense(self) -> NDArray[np.float64]:
        return self.columns(np.arange(self.shape[1]))


def composite_map(op: MeasurementOperator, basis: Basis) -> LinearMap:
    """``A = R_Omega H_c Psi`` applied matrix-free."""
    if basis.n != op.n:
        raise InvalidDimensionError(f"basis dimension {basis.n} differs from operator dimension {op.n}")
    return LinearMap(
        forward=lambda a: op.forward(basis.synthesize(a)),
        adjoint=lambda y: basis.analyze(op.adjoint(y)),
        shape=(op.realized_m, op.n),
        columns_fn=lambda idx: op.forward_columns(basis.columns(idx)),
    )


def dense_map(matrix: ArrayLike) -> LinearMap:
    A = np.asarray(matrix, dtype=np.float64)
    if A.ndim != 2:
        raise InvalidDimensionError(f"expected a matrix, got shape {A.shape}")
    return LinearMap(forward=lambda a: A @ a, adjoint=lambda y: A.T @ y, shape=A.shape,
                     columns_fn=lambda idx: A[:, idx])


@dataclass(frozen=True)
class SolverParams:
    tolerance: float = 1e-8
    max_iterations: int = 5000
    gap_tolerance: float = 1e-6
    penalty: float = 1.0
    relaxation: float = 1.0
    check_every: int = 25

    def __post_init__(self) -> None:
        if self.tolerance <= 0 or self.gap_tolerance <= 0:
            raise ConfigurationError("solver tolerances must be positive")
        if self.max_iterations < 1 or self.check_every < 1:
            raise ConfigurationError("solver iteration counts must be at least 1")
        if self.penalty <= 0 or not 0 < self.relaxation < 2:
            raise ConfigurationError("penalty must be positive and relaxation in (0, 2)")


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    solution: NDArray[np.float64]
    residual_norm: float
    l1_value: float
    iterations: int
    converged: bool
    support_exact: bool | None = None
    duality_gap: float = float("nan")
    polished: bool = False

    def coefficient_error(self, truth: ArrayLike) -> float:
        return float(np.linalg.norm(self.solution - np.asarray(truth, dtype=np.float64)))

    def to_dict(self) -> dict:
        return {
            "solution": [float(v) for v in self.solution],
            "residual_norm": self.residual_norm,
            "l1_value": self.l1_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "support_exact": self.support_exact,
            "duality_gap": self.duality_gap,
            "polished": self.polished,
        }


def support_matches(solution: ArrayLike, truth: SparseSignal) -> bool:
    """Signs agree on the true support and everything else is negligible."""
    sol = np.asarray(solution, dtype=np.float64)
    on = sol[truth.support]
    if on.size == 0:
        return bool(np.all(sol == 0))
    if np.any(np.sign(on) != truth.signs):
        return False
    off = np.delete(sol, truth.support)
    if off.size == 0:
        return True
    return bool(np.max(np.abs(off)) <= SUPPORT_RATIO * np.max(np.abs(on)))


def estimate_norm_squared(A: LinearMap, iterations: int = POWER_ITERATIONS, seed: int = 0) -> float:
    """Power iteration on ``A^T A``; returns an estimate of the largest eigenvalue."""
    v = make_rng(seed).standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(iterations):
        w = A.adjoint(A.forward(v))
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(norm - estimate) <= POWER_TOLERANCE * norm:
            return norm
        estimate = norm
    return estimate


def _soft(x: NDArray[np.float64], threshold: float) -> NDArray[np.float64]:
    return np.sign(x) * np.maximum(np.abs(x) - threshold, 0.0)


@dataclass
class _Polish:
    solution: NDArray[np.float64]
    residual_norm: float
    gap: float


def _polish(A: LinearMap, y: NDArray[np.float64], iterate: NDArray[np.float64],
            feasibility: float) -> _Polish | None:
    """Least squares on the detected support, accepted only with a KKT witness.

    The witness is the least-norm ``v`` with ``A_T^T v = sign(alpha_T)``; the
    polished point is optimal when ``|A^T v| <= 1`` everywhere.
    """
    peak = float(np.max(np.abs(iterate)))
    if peak == 0.0:
        return None
    support = np.flatnonzero(np.abs(iterate) > POLISH_THRESHOLD * peak)
    if support.size > A.shape[0]:
        return None
    A_T = A.columns(support)
    coef, _, rank, _ = scipy.linalg.lstsq(A_T, y)
    if rank < support.size:
        return None
    keep = np.abs(coef) > SUPPORT_RATIO * np.max(np.abs(coef))
    if not np.all(keep):
        # spurious entries picked up by the threshold come back as zeros
        support, A_T = support[keep], A_T[:, keep]
        coef = scipy.linalg.lstsq(A_T, y)[0]
    signs = np.sign(coef)
    if np.any(signs == 0):
        return None
    residual = float(np.linalg.norm(A_T @ coef - y))
    if residual > feasibility:
        return None
    v = scipy.linalg.lstsq(A_T.T, signs)[0]
    if float(np.max(np.abs(A.adjoint(v)))) > 1.0 + KKT_SLACK:
        return None
    solution = np.zeros(A.shape[1])
    solution[support] = coef
    gap = abs(float(np.sum(np.abs(coef)) - y @ v))
    return _Polish(solution=solution, residual_norm=residual, gap=gap)


def solve_bp(A: LinearMap, y: ArrayLike, params: SolverParams | None = None,
             truth: SparseSignal | None = None) -> RecoveryResult:
    """Basis pursuit by linearized ADMM.

    The problem is rescaled so that ``||A|| ~ 1`` (power iteration) and
    ``||A^T y||_inf = 1``, which makes the iterates equivariant under scaling of
    ``y``. Every ``check_every`` iterations the iterate is tested in original
    units and a support polish is attempted.
    """
    params = params or SolverParams()
    y = np.asarray(y, dtype=np.float64)
    m, n = A.shape
    if y.shape != (m,):
        raise InvalidDimensionError(f"expected {m} measurements, got shape {y.shape}")

    y_norm = float(np.linalg.norm(y))
    feasibility = params.tolerance * max(1.0, y_norm)

    def finish(solution: NDArray, residual: float, iterations: int, converged: bool,
               gap: float, polished: bool) -> RecoveryResult:
        exact = support_matches(solution, truth) if truth is not None else None
        return RecoveryResult(solution=solution, residual_norm=residual, l1_value=float(np.sum(np.abs(solution))),
                              iterations=iterations, converged=converged, support_exact=exact,
                              duality_gap=gap, polished=polished)

    if y_norm == 0.0:
        return finish(np.zeros(n), 0.0, 0, True, 0.0, False)

    norm_sq = estimate_norm_squared(A)
    if norm_sq == 0.0:
        return finish(np.zeros(n), y_norm, 0, False, float("inf"), False)
    a = np.sqrt(norm_sq)
    s = float(np.max(np.abs(A.adjoint(y)))) / norm_sq
    y_hat = y / (a * s)
    tau = STEP_FRACTION
    rho, relax = params.penalty, params.relaxation

    alpha = np.zeros(n)
    u = np.zeros(m)
    A_alpha = np.zeros(m)
    iterations = 0
    while iterations < params.max_iterations:
        iterations += 1
        grad = A.adjoint(A_alpha - y_hat + u) / a
        alpha = _soft(alpha - tau * grad, tau / rho)
        A_alpha = A.forward(alpha) / a
        u = u + relax * (A_alpha - y_hat)

        if iterations % params.check_every and iterations < params.max_iterations:
            continue
        candidate = s * alpha
        polished = _polish(A, y, candidate, feasibility)
        if polished is not None:
            return finish(polished.solution, polished.residual_norm, iterations, True, polished.gap, True)
        residual = float(np.linalg.norm(A.forward(candidate) - y))
        dual = -rho * u
        dual /= max(1.0, float(np.max(np.abs(A.adjoint(dual) / a))))
        l1 = float(np.sum(np.abs(candidate)))
        gap = abs(s * (float(np.sum(np.abs(alpha))) - float(y_hat @ dual)))
        if residual <= feasibility and gap <= params.gap_tolerance * max(1.0, l1):
            return finish(candidate, residual, iterations, True, gap, False)

    candidate = s * alpha
    residual = float(np.linalg.norm(A.forward(candidate) - y))
    logger.debug("basis pursuit stopped after %d iterations, residual %.3e", iterations, residual)
    return finish(candidate, residual, iterations, False, float("nan"), False)


def solve_bp_dense(A: ArrayLike, y: ArrayLike, params: SolverParams | None = None,
                   truth: SparseSignal | None = None) -> RecoveryResult:
    """Basis pursuit as a linear program over ``alpha = p - q``, ``p, q >= 0`` (HiGHS)."""
    params = params or SolverParams()
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    m, n = A.shape
    if y.shape != (m,):
        raise InvalidDimensionError(f"expected {m} measurements, got shape {y.shape}")
    result = scipy.optimize.linprog(
        c=np.ones(2 * n), A_eq=np.hstack([A, -A]), b_eq=y, bounds=(0, None), method="highs",
    )
    if result.x is None:
        solution = np.zeros(n)
    else:
        solution = result.x[:n] - result.x[n:]
    residual = float(np.linalg.norm(A @ solution - y))
    converged = bool(result.status == 0) and residual <= params.tolerance * max(1.0, float(np.linalg.norm(y)))
    return RecoveryResult(
        solution=solution, residual_norm=residual, l1_value=float(np.sum(np.abs(solution))),
        iterations=int(getattr(result, "nit", 0) or 0), converged=converged,
        support_exact=support_matches(solution, truth) if truth is not None else None,
        duality_gap=0.0 if converged else float("nan"),
    )


@dataclass(frozen=True, eq=False)
class ExhaustiveResult:
    solution: NDArray[np.float64] | None
    l1_value: float
    unique: bool
    supports_tried: int


def exhaustive_l1_search(A: ArrayLike, y: ArrayLike, max_support: int,
                         tolerance: float = 1e-9) -> ExhaustiveResult:
    """Minimum-l1 feasible point among all supports of size <= ``max_support``.

    Each support is solved by least squares and kept when the residual is
    within ``tolerance * max(1, ||y||)``. ``unique`` is false when a different
    feasible point reaches the same l1 value.
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    m, n = A.shape
    limit = tolerance * max(1.0, float(np.linalg.norm(y)))
    best: NDArray[np.float64] | None = np.zeros(n) if float(np.linalg.norm(y)) <= limit else None
    best_l1 = 0.0 if best is not None else np.inf
    ties: list[NDArray[np.float64]] = []
    tried = 0
    for size in range(1, min(max_support, m, n) + 1):
        for support in combinations(range(n), size):
            tried += 1
            cols = A[:, support]
            coef, _, rank, _ = scipy.linalg.lstsq(cols, y)
            if rank < size or np.linalg.norm(cols @ coef - y) > limit:
                continue
            candidate = np.zeros(n)
            candidate[list(support)] = coef
            l1 = float(np.sum(np.abs(candidate)))
            if best is None or l1 < best_l1 - 1e-9 * max(1.0, best_l1):
                best, best_l1, ties = candidate, l1, []
            elif abs(l1 - best_l1) <= 1e-9 * max(1.0, best_l1) and best is not None:
                if np.max(np.abs(candidate - best)) > 1e-9 * max(1.0, best_l1):
                    ties.append(candidate)
    return ExhaustiveResult(solution=best, l1_value=float(best_l1), unique=best is not None and not ties,
                            supports_tried=tried)


@dataclass(frozen=True, eq=False)
class CertificateReport:
    """Exact-recovery certificate for a support and sign pattern.

    ``pi_values[k]`` is ``|pi(gamma)|`` for ``gamma = complement[k]``.
    """

    full_rank: bool
    inverse_norm: float
    pi_values: NDArray[np.float64]
    complement: NDArray[np.int64]
    max_pi: float
    alpha_threshold: float
    certified: bool
    realized_m: int
    bounded_inverse: bool

    def certified_at(self, threshold: float) -> bool:
        return self.full_rank and self.max_pi < threshold

    def to_dict(self) -> dict:
        return {
            "full_rank": self.full_rank,
            "inverse_norm": self.inverse_norm,
            "max_pi": self.max_pi,
            "alpha_threshold": self.alpha_threshold,
            "certified": self.certified,
            "realized_m": self.realized_m,
            "bounded_inverse": self.bounded_inverse,
            "pi_values": {int(g): float(p) for g, p in zip(self.complement, self.pi_values)},
        }


def certificate_for_map(A: LinearMap, support: ArrayLike, signs: ArrayLike,
                        alpha_threshold: float = 0.5) -> CertificateReport:
    if not 0 < alpha_threshold <= 1:
        raise ConfigurationError(f"alpha threshold must lie in (0, 1], got {alpha_threshold}")
    support = np.asarray(support, dtype=np.int64)
    signs = np.asarray(signs, dtype=np.float64)
    m, n = A.shape
    complement = np.setdiff1d(np.arange(n), support)

    def rank_deficient() -> CertificateReport:
        return CertificateReport(full_rank=False, inverse_norm=float("inf"), pi_values=np.zeros(0),
                                 complement=np.zeros(0, dtype=np.int64), max_pi=float("inf"),
                                 alpha_threshold=alpha_threshold, certified=False, realized_m=m,
                                 bounded_inverse=False)

    if m < support.size or support.size == 0:
        return rank_deficient()
    phi = A.columns(support)
    gram = phi.T @ phi
    eigenvalues = scipy.linalg.eigh(gram, eigvals_only=True)
    if np.linalg.matrix_rank(phi) < support.size or eigenvalues[0] <= 0:
        return rank_deficient()
    inverse_norm = float(1.0 / eigenvalues[0])
    v = phi @ scipy.linalg.solve(gram, signs, assume_a="pos")
    pi = np.abs(A.adjoint(v))[complement]
    max_pi = float(np.max(pi)) if pi.size else 0.0
    return CertificateReport(
        full_rank=True, inverse_norm=inverse_norm, pi_values=pi, complement=complement, max_pi=max_pi,
        alpha_threshold=alpha_threshold, certified=max_pi < alpha_threshold, realized_m=m,
        bounded_inverse=inverse_norm <= 2.0 / m,
    )


def dual_certificate(op: MeasurementOperator, basis: Basis, signal: SparseSignal,
                     alpha_threshold: float = 0.5) -> CertificateReport:
    """``pi(gamma) = <(Phi_G^T Phi_G)^{-1} Phi_G^T phi_gamma, z>`` off the support."""
    return certificate_for_map(composite_map(op, basis), signal.support, signal.signs, alpha_threshold)
