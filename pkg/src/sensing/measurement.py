"""Random-convolution measurement operators.

The convolution branch is ``H = n^{-1/2} F* diag(spectrum) F``, a real circulant
with ``H[i, j] = sqrt(n) * taps[(i - j) mod n]``. The dual-branch operator stacks
``H`` (rows ``0..n-1``) above ``sqrt(n) I`` (rows ``n..2n-1``). A sampling mask
keeps a subset of those rows.
"""

from dataclasses import dataclass
from enum import StrEnum

import numpy as np
import scipy.fft
from fastmcp.utilities.logging import get_logger
from numpy.typing import ArrayLike, NDArray

from .errors import ConfigurationError, InvalidDimensionError, ResourceLimitError
from .filters import FilterDistribution, RandomFilter
from .montecarlo import MeanEstimate, MomentSums, require_trials, run_blocks
from .seeding import make_rng
from .spectral import (
    CirculantKernel,
    RealVector,
    check_dimension,
    circulant_apply,
    circulant_apply_adjoint,
    dft_inverse,
    drop_imaginary,
)

logger = get_logger(__name__)

DENSE_LIMIT = 4096
GRAM_CHECK_LIMIT = 64
MIN_GRAM_TRIALS = 1000
MIN_CORRELATION_TRIALS = 10_000
DENSE_CHUNK = 256


class BranchMode(StrEnum):
    CONVOLUTION_ONLY = "convolution_only"
    DUAL_BRANCH = "dual_branch"

    def total_rows(self, n: int) -> int:
        return n if self is BranchMode.CONVOLUTION_ONLY else 2 * n


class MaskModel(StrEnum):
    BERNOULLI = "bernoulli"
    UNIFORM_SET = "uniform_set"


@dataclass(frozen=True, eq=False)
class SamplingMask:
    """Retained row indices ``kept`` out of ``total_rows``.

    Under the bernoulli model each row is kept independently with probability
    ``target_m / total_rows``, so ``realized_m`` is random. ``branch_quota``
    fixes ``(convolution rows, identity rows)`` for a dual-branch stack.
    """

    model: MaskModel
    total_rows: int
    kept: NDArray[np.int64]
    target_m: int
    seed: int
    branch_quota: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        kept = np.asarray(self.kept, dtype=np.int64)
        if kept.ndim != 1:
            raise InvalidDimensionError("mask indices must form a 1-D array")
        if kept.size and (np.any(np.diff(kept) <= 0) or kept[0] < 0 or kept[-1] >= self.total_rows):
            raise ConfigurationError("mask indices must be strictly increasing and below total_rows")
        kept.setflags(write=False)
        object.__setattr__(self, "kept", kept)

    @property
    def realized_m(self) -> int:
        return int(self.kept.size)


def _choose(rng: np.random.Generator, population: int, count: int, offset: int = 0) -> NDArray[np.int64]:
    return offset + np.sort(rng.choice(population, size=count, replace=False)).astype(np.int64)


def _keep_each(rng: np.random.Generator, population: int, probability: float,
               offset: int = 0) -> NDArray[np.int64]:
    return offset + np.flatnonzero(rng.random(population) < probability).astype(np.int64)


def sample_mask(total_rows: int, target_m: int, model: MaskModel | str, seed: int,
                branch_quota: tuple[int, int] | None = None) -> SamplingMask:
    """Draw a sampling mask; deterministic in its arguments.

    With ``branch_quota`` the two halves of a ``2n``-row stack are sampled
    separately: exactly ``quota`` rows each under uniform_set, keep
    probability ``quota / n`` each under bernoulli.
    """
    model = MaskModel(model)
    if not 0 <= target_m <= total_rows:
        raise ConfigurationError(f"target m={target_m} outside [0, {total_rows}]")
    rng = make_rng(seed)
    if branch_quota is not None:
        if total_rows % 2:
            raise ConfigurationError("a branch quota needs a two-branch stack")
        half = total_rows // 2
        conv_rows, identity_rows = (int(q) for q in branch_quota)
        if conv_rows + identity_rows != target_m or not (0 <= conv_rows <= half and 0 <= identity_rows <= half):
            raise ConfigurationError(f"branch quota {branch_quota} does not split m={target_m} over {half}+{half} rows")
        if model is MaskModel.UNIFORM_SET:
            parts = [_choose(rng, half, conv_rows), _choose(rng, half, identity_rows, offset=half)]
        else:
            parts = [_keep_each(rng, half, conv_rows / half), _keep_each(rng, half, identity_rows / half, offset=half)]
        kept = np.concatenate(parts)
        quota: tuple[int, int] | None = (conv_rows, identity_rows)
    else:
        if model is MaskModel.UNIFORM_SET:
            kept = _choose(rng, total_rows, target_m)
        else:
            kept = _keep_each(rng, total_rows, target_m / total_rows)
        quota = None
    return SamplingMask(model=model, total_rows=total_rows, kept=kept, target_m=target_m,
                        seed=int(seed), branch_quota=quota)


def mask_from_indices(total_rows: int, kept: ArrayLike) -> SamplingMask:
    """Deterministic mask keeping exactly ``kept``."""
    kept = np.unique(np.asarray(kept, dtype=np.int64))
    return SamplingMask(model=MaskModel.UNIFORM_SET, total_rows=total_rows, kept=kept,
                        target_m=int(kept.size), seed=0)


def full_mask(total_rows: int) -> SamplingMask:
    return mask_from_indices(total_rows, np.arange(total_rows))


def convolution_kernel(random_filter: RandomFilter) -> CirculantKernel:
    """First row of ``n^{-1/2} F* diag(spectrum) F``, checked to be real."""
    n = random_filter.n
    taps = drop_imaginary(dft_inverse(random_filter.spectrum))
    first_row = np.sqrt(n) * taps[(-np.arange(n)) % n]
    return CirculantKernel(first_row)


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    """``R_Omega H`` or ``R_Omega [H; sqrt(n) I]``, applied matrix-free."""

    filter: RandomFilter
    branch_mode: BranchMode
    mask: SamplingMask
    n: int
    kernel: CirculantKernel

    @property
    def total_rows(self) -> int:
        return self.branch_mode.total_rows(self.n)

    @property
    def realized_m(self) -> int:
        return self.mask.realized_m

    def full_forward(self, x: RealVector) -> RealVector:
        conv = circulant_apply(self.kernel, x)
        if self.branch_mode is BranchMode.CONVOLUTION_ONLY:
            return conv
        return np.concatenate([conv, np.sqrt(self.n) * np.asarray(x, dtype=np.float64)])

    def forward(self, x: ArrayLike) -> RealVector:
        arr = np.asarray(x, dtype=np.float64)
        if arr.shape != (self.n,):
            raise InvalidDimensionError(f"expected a vector of length {self.n}, got shape {arr.shape}")
        return self.full_forward(arr)[self.mask.kept]

    def adjoint(self, y: ArrayLike) -> RealVector:
        arr = np.asarray(y, dtype=np.float64)
        if arr.shape != (self.realized_m,):
            raise InvalidDimensionError(
                f"expected a vector of length {self.realized_m}, got shape {arr.shape}"
            )
        full = np.zeros(self.total_rows)
        full[self.mask.kept] = arr
        out = circulant_apply_adjoint(self.kernel, full[: self.n])
        if self.branch_mode is BranchMode.DUAL_BRANCH:
            out += np.sqrt(self.n) * full[self.n:]
        return out

    def forward_columns(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        """Apply the operator to every column of an ``n x k`` matrix."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != self.n:
            raise InvalidDimensionError(f"expected an n x k matrix with n={self.n}, got {X.shape}")
        spec = np.conj(self.kernel.spectrum)[:, None]
        blocks = []
        for start in range(0, X.shape[1], DENSE_CHUNK):
            chunk = X[:, start:start + DENSE_CHUNK]
            conv = drop_imaginary(scipy.fft.ifft(spec * scipy.fft.fft(chunk, axis=0), axis=0))
            if self.branch_mode is BranchMode.DUAL_BRANCH:
                conv = np.vstack([conv, np.sqrt(self.n) * chunk])
            blocks.append(conv[self.mask.kept])
        if not blocks:
            return np.zeros((self.realized_m, 0))
        return np.hstack(blocks)


def build_operator(random_filter: RandomFilter, branch_mode: BranchMode | str,
                   mask: SamplingMask) -> MeasurementOperator:
    branch_mode = BranchMode(branch_mode)
    n = check_dimension(random_filter.n)
    expected = branch_mode.total_rows(n)
    if mask.total_rows != expected:
        raise ConfigurationError(
            f"{branch_mode.value} needs a mask over {expected} rows, got {mask.total_rows}"
        )
    kernel = convolution_kernel(random_filter)
    return MeasurementOperator(filter=random_filter, branch_mode=branch_mode, mask=mask, n=n, kernel=kernel)


def apply_forward(op: MeasurementOperator, x: ArrayLike) -> RealVector:
    return op.forward(x)


def apply_adjoint(op: MeasurementOperator, y: ArrayLike) -> RealVector:
    return op.adjoint(y)


def to_dense(op: MeasurementOperator) -> NDArray[np.float64]:
    """The ``|Omega| x n`` matrix, assembled column by column from basis vectors."""
    if op.n > DENSE_LIMIT:
        raise ResourceLimitError(f"dense path is limited to n <= {DENSE_LIMIT}, got {op.n}")
    return op.forward_columns(np.eye(op.n))


def composite_gram(op: MeasurementOperator) -> NDArray[np.float64]:
    """``A^T A`` of the masked operator, formed densely."""
    dense = to_dense(op)
    return dense.T @ dense


def _batched_convolution(taps: NDArray[np.float64]) -> NDArray[np.float64]:
    """Dense ``H`` for each row of ``taps``: ``H[b, i, j] = sqrt(n) taps[b, (i - j) mod n]``."""
    n = taps.shape[1]
    idx = np.arange(n)
    return np.sqrt(n) * taps[:, (idx[:, None] - idx[None, :]) % n]


def _gram_block(n: int) -> int:
    return max(16, (1 << 18) // (n * n))


@dataclass(frozen=True)
class GramExpectationReport:
    """Monte Carlo average of the dual-branch Gram matrix, by block.

    ``convolution`` estimates ``E(H^T H)``, ``cross`` estimates
    ``E(sqrt(n) H^T)`` and ``composite`` is ``convolution + n I``, the average
    of ``H_c^T H_c``. ``claimed`` is the value the composite is compared to.
    ``eigenvalues`` averages the spectrum of ``H^T H``, which is
    ``n |spectrum(w)|^2`` per frequency.
    """

    n: int
    trials: int
    convolution: MeanEstimate
    cross: MeanEstimate
    composite: MeanEstimate
    eigenvalues: MeanEstimate
    claimed: float

    def special_frequency_eigenvalues(self) -> dict[int, dict]:
        """Eigenvalue averages at the two purely real frequencies, reported apart."""
        within = self.eigenvalues.within(float(self.n))
        return {
            w: {"mean": float(self.eigenvalues.mean[w]), "stderr": float(self.eigenvalues.stderr[w]),
                "within": bool(within[w])}
            for w in (0, self.n // 2)
        }

    def generic_eigenvalues_within(self, sigmas: float = 3.0) -> bool:
        generic = np.ones(self.n, dtype=bool)
        generic[[0, self.n // 2]] = False
        return bool(np.all(self.eigenvalues.within(float(self.n), sigmas)[generic]))

    def _offdiag(self, est: MeanEstimate) -> tuple[NDArray, NDArray]:
        mask = ~np.eye(self.n, dtype=bool)
        return est.mean[mask], est.stderr[mask]

    @property
    def max_diagonal_deviation(self) -> float:
        return float(np.max(np.abs(np.diag(self.composite.mean) - self.claimed)))

    @property
    def max_offdiagonal(self) -> float:
        return float(np.max(np.abs(self._offdiag(self.composite)[0])))

    def convolution_diagonal_within(self, sigmas: float = 3.0) -> bool:
        diag = MeanEstimate(np.diag(self.convolution.mean), np.diag(self.convolution.stderr))
        return bool(np.all(diag.within(float(self.n), sigmas)))

    def offdiagonal_within(self, sigmas: float = 3.0) -> bool:
        mean, stderr = self._offdiag(self.composite)
        return bool(np.all(MeanEstimate(mean, stderr).within(0.0, sigmas)))

    def cross_term_within(self, sigmas: float = 3.0) -> bool:
        return bool(np.all(self.cross.within(0.0, sigmas)))

    def composite_claim_holds(self, sigmas: float = 3.0) -> bool:
        diag = MeanEstimate(np.diag(self.composite.mean), np.diag(self.composite.stderr))
        return bool(np.all(diag.within(self.claimed, sigmas))) and self.offdiagonal_within(sigmas)

    def summary(self) -> dict:
        return {
            "n": self.n,
            "trials": self.trials,
            "claimed_diagonal": self.claimed,
            "mean_composite_diagonal": float(np.mean(np.diag(self.composite.mean))),
            "max_diagonal_deviation": self.max_diagonal_deviation,
            "max_offdiagonal": self.max_offdiagonal,
            "max_offdiagonal_stderr": float(np.max(self._offdiag(self.composite)[1])),
            "convolution_diagonal_within": self.convolution_diagonal_within(),
            "offdiagonal_within": self.offdiagonal_within(),
            "cross_term_within": self.cross_term_within(),
            "composite_claim_holds": self.composite_claim_holds(),
            "generic_eigenvalues_within": self.generic_eigenvalues_within(),
            "special_frequencies": {str(w): v for w, v in self.special_frequency_eigenvalues().items()},
        }


def gram_expectation_check(dist: FilterDistribution, n: int, trials: int, seed: int,
                           workers: int = 1) -> GramExpectationReport:
    """Average ``H_c^T H_c`` over sampled filters and compare it to ``n I``."""
    n = check_dimension(n)
    require_trials(trials, MIN_GRAM_TRIALS, "gram_expectation_check")
    if n > GRAM_CHECK_LIMIT:
        raise ResourceLimitError(f"gram_expectation_check forms dense Grams; n={n} exceeds {GRAM_CHECK_LIMIT}")

    def block(rng: np.random.Generator, size: int) -> tuple:
        taps = dist.draw(rng, n, size)
        H = _batched_convolution(taps)
        gram = np.einsum("bij,bik->bjk", H, H)
        cross = np.sqrt(n) * np.transpose(H, (0, 2, 1))
        eig = n * np.abs(scipy.fft.fft(taps, axis=1)) ** 2
        return (size, (gram.sum(axis=0), np.square(gram).sum(axis=0)),
                (cross.sum(axis=0), np.square(cross).sum(axis=0)),
                (eig.sum(axis=0), np.square(eig).sum(axis=0)))

    gram_sums, cross_sums, eig_sums = MomentSums(), MomentSums(), MomentSums()
    for size, gram, cross, eig in run_blocks(seed, trials, block, block=_gram_block(n), workers=workers):
        gram_sums.add_sums(size, *gram)
        cross_sums.add_sums(size, *cross)
        eig_sums.add_sums(size, *eig)

    conv = gram_sums.estimate()
    composite = MeanEstimate(conv.mean + n * np.eye(n), conv.stderr)
    report = GramExpectationReport(n=n, trials=trials, convolution=conv, cross=cross_sums.estimate(),
                                   composite=composite, eigenvalues=eig_sums.estimate(), claimed=float(n))
    if not report.composite_claim_holds():
        logger.warning(
            "averaged H_c^T H_c diagonal is %.3f against the claimed %d; the convolution block alone averages %.3f",
            float(np.mean(np.diag(composite.mean))), n, float(np.mean(np.diag(conv.mean))),
        )
    return report


@dataclass(frozen=True)
class EntryCorrelationReport:
    """Second moments ``E{a_j a_j'}`` of the circulant's first row."""

    n: int
    trials: int
    moments: MeanEstimate
    exact_diagonal: float
    stated_diagonal: float
    envelope: float

    def diagonal(self) -> MeanEstimate:
        return MeanEstimate(np.diag(self.moments.mean), np.diag(self.moments.stderr))

    def pooled_diagonal(self) -> MeanEstimate:
        """Average of the diagonal; the entries of ``a`` are independent, so errors add in quadrature."""
        diag = self.diagonal()
        stderr = np.sqrt(np.sum(np.square(diag.stderr))) / self.n
        return MeanEstimate(np.asarray(np.mean(diag.mean)), np.asarray(stderr))

    def diagonal_matches_exact(self, sigmas: float = 3.0) -> bool:
        return bool(self.pooled_diagonal().within(self.exact_diagonal, sigmas))

    def diagonal_matches_stated(self, sigmas: float = 3.0) -> bool:
        return bool(self.pooled_diagonal().within(self.stated_diagonal, sigmas))

    @property
    def max_offdiagonal(self) -> float:
        off = ~np.eye(self.n, dtype=bool)
        return float(np.max(np.abs(self.moments.mean[off])))

    def offdiagonal_within_envelope(self, sigmas: float = 3.0) -> bool:
        off = ~np.eye(self.n, dtype=bool)
        limit = self.envelope + sigmas * self.moments.stderr[off]
        return bool(np.all(np.abs(self.moments.mean[off]) <= limit))

    def by_gap(self) -> dict[int, float]:
        """Average estimate for each wrapped index gap ``(j' - j) mod n``."""
        idx = np.arange(self.n)
        gaps = (idx[None, :] - idx[:, None]) % self.n
        return {int(g): float(np.mean(self.moments.mean[gaps == g])) for g in range(self.n)}

    def summary(self) -> dict:
        diag = self.diagonal()
        return {
            "n": self.n,
            "trials": self.trials,
            "mean_diagonal": float(np.mean(diag.mean)),
            "diagonal_stderr": float(self.pooled_diagonal().stderr),
            "exact_diagonal": self.exact_diagonal,
            "stated_diagonal": self.stated_diagonal,
            "diagonal_matches_exact": self.diagonal_matches_exact(),
            "diagonal_matches_stated": self.diagonal_matches_stated(),
            "max_offdiagonal": self.max_offdiagonal,
            "envelope": self.envelope,
            "offdiagonal_within_envelope": self.offdiagonal_within_envelope(),
            "max_gap_mean": max(abs(v) for g, v in self.by_gap().items() if g),
        }


def entry_correlation_check(dist: FilterDistribution, n: int, trials: int, seed: int,
                            workers: int = 1) -> EntryCorrelationReport:
    """Estimate ``E{a_j a_j'}`` for the first row ``a`` of ``H`` over sampled filters."""
    n = check_dimension(n)
    require_trials(trials, MIN_CORRELATION_TRIALS, "entry_correlation_check")
    if n > DENSE_LIMIT:
        raise ResourceLimitError(f"entry_correlation_check is limited to n <= {DENSE_LIMIT}")
    flip = (-np.arange(n)) % n

    def block(rng: np.random.Generator, size: int) -> tuple:
        a = np.sqrt(n) * dist.draw(rng, n, size)[:, flip]
        return size, a.T @ a, np.square(a).T @ np.square(a)

    sums = MomentSums()
    for size, s1, s2 in run_blocks(seed, trials, block, workers=workers):
        sums.add_sums(size, s1, s2)

    exact = n * dist.resolved_scale(n) ** 2
    report = EntryCorrelationReport(n=n, trials=trials, moments=sums.estimate(), exact_diagonal=float(exact),
                                    stated_diagonal=1.0 - 1.0 / n, envelope=1.0 / n)
    if not report.diagonal_matches_stated():
        logger.info(
            "E{a_j^2} estimated at %.5f; stated approximation 1 - 1/n = %.5f, exact value %.5f",
            float(np.mean(report.diagonal().mean)), report.stated_diagonal, exact,
        )
    return report
