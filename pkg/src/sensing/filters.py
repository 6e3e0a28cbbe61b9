"""Random filter generation and its frequency response.

Taps are i.i.d. zero-mean with variance ``scale**2``; the default scale is
``1/sqrt(n)`` so that ``E|spectrum(w)|^2 = 1`` at every frequency.
"""

from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import scipy.fft
from fastmcp.utilities.logging import get_logger
from numpy.typing import NDArray

from .errors import ConfigurationError, InvalidDimensionError
from .montecarlo import MeanEstimate, MomentSums, require_trials, run_blocks
from .seeding import make_rng
from .spectral import ComplexVector, RealVector, check_dimension, dft_forward, dft_inverse

logger = get_logger(__name__)

MIN_STATISTICS_TRIALS = 1000
MAX_STATISTICS_DIMENSION = 256


class FilterKind(StrEnum):
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class FilterDistribution:
    """Law of the filter taps. ``scale=None`` means ``1/sqrt(n)``."""

    kind: FilterKind = FilterKind.GAUSSIAN
    scale: float | None = None

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "kind", FilterKind(self.kind))
        except ValueError as exc:
            raise ConfigurationError(f"unsupported filter kind {self.kind!r}") from exc
        if self.scale is not None and not self.scale > 0:
            raise ConfigurationError(f"filter scale must be positive, got {self.scale}")

    def resolved_scale(self, n: int) -> float:
        return float(self.scale) if self.scale is not None else 1.0 / np.sqrt(n)

    def draw(self, rng: np.random.Generator, n: int, size: int | None = None) -> NDArray[np.float64]:
        """Draw taps of shape ``(n,)`` or ``(size, n)``."""
        shape = (n,) if size is None else (size, n)
        scale = self.resolved_scale(n)
        if self.kind is FilterKind.GAUSSIAN:
            return scale * rng.standard_normal(shape)
        if self.kind is FilterKind.BERNOULLI:
            return scale * (2.0 * rng.integers(0, 2, size=shape) - 1.0)
        # uniform on [-sqrt(3) scale, sqrt(3) scale] has variance scale^2
        bound = np.sqrt(3.0) * scale
        return rng.uniform(-bound, bound, size=shape)

    def as_dict(self, n: int) -> dict:
        return {"kind": self.kind.value, "scale": self.resolved_scale(n)}


@dataclass(frozen=True, eq=False)
class RandomFilter:
    """Filter taps sigma(t) together with their spectrum."""

    taps: RealVector
    spectrum: ComplexVector
    seed: int
    distribution: FilterDistribution = field(default_factory=FilterDistribution)

    @property
    def n(self) -> int:
        return int(self.taps.shape[0])

    def symmetry_deviation(self) -> float:
        """Largest violation of the real-signal spectral symmetries.

        Covers the imaginary parts at the two purely real frequencies and
        ``spectrum[w] == conj(spectrum[n - w])`` for the remaining ones.
        """
        n = self.n
        spec = self.spectrum
        special = max(abs(spec[0].imag), abs(spec[n // 2].imag))
        w = np.arange(1, n // 2)
        mirrored = float(np.max(np.abs(spec[n - w] - np.conj(spec[w])))) if w.size else 0.0
        return float(max(special, mirrored))

    def to_dict(self) -> dict:
        """Filter dump: n, distribution, seed and taps as full-precision floats."""
        return {
            "n": self.n,
            "distribution": self.distribution.as_dict(self.n),
            "seed": int(self.seed),
            "taps": [float(t) for t in self.taps],
        }


def filter_from_taps(taps: NDArray[np.float64], seed: int = 0,
                     distribution: FilterDistribution | None = None) -> RandomFilter:
    """Wrap explicit taps (deterministic filters, replays of dumped filters)."""
    arr = np.array(taps, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidDimensionError(f"taps must be a 1-D vector, got shape {arr.shape}")
    check_dimension(arr.shape[0])
    arr.setflags(write=False)
    spectrum = dft_forward(arr)
    spectrum.setflags(write=False)
    return RandomFilter(taps=arr, spectrum=spectrum, seed=int(seed),
                        distribution=distribution or FilterDistribution())


def sample_filter(n: int, dist: FilterDistribution, seed: int) -> RandomFilter:
    """Draw a filter of length ``n``; deterministic in ``(n, dist, seed)``."""
    n = check_dimension(n)
    taps = dist.draw(make_rng(seed), n)
    return filter_from_taps(taps, seed=seed, distribution=dist)


def frequency_response(random_filter: RandomFilter) -> ComplexVector:
    return random_filter.spectrum


def recovered_taps(random_filter: RandomFilter) -> ComplexVector:
    """Inverse transform of the stored spectrum; its imaginary part is round-off only."""
    return dft_inverse(random_filter.spectrum)


@dataclass(frozen=True)
class SpectrumStatistics:
    """Monte Carlo moments of the filter spectrum.

    Per-frequency arrays have length ``n``; cross-frequency matrices are
    ``n x n`` and indexed ``[w1, w2]``.
    """

    n: int
    trials: int
    distribution: FilterDistribution
    power: MeanEstimate  # <|s(w)|^2>
    real_mean: MeanEstimate
    imag_mean: MeanEstimate
    real_power: MeanEstimate
    imag_power: MeanEstimate
    real_imag: MeanEstimate  # <s_R(w) s_I(w)>
    cross_real: MeanEstimate  # <s(w1) s*(w2)>, real part
    cross_imag: MeanEstimate  # <s(w1) s*(w2)>, imaginary part
    cross_rr: MeanEstimate
    cross_ii: MeanEstimate
    cross_ri: MeanEstimate

    @property
    def special_frequencies(self) -> tuple[int, int]:
        """The two frequencies where the spectrum of a real filter is real."""
        return (0, self.n // 2)

    def cross_magnitude(self, w1: int, w2: int) -> tuple[float, float]:
        """|<s(w1) s*(w2)>| and its standard error."""
        re, im = self.cross_real, self.cross_imag
        value = float(np.hypot(re.mean[w1, w2], im.mean[w1, w2]))
        stderr = float(np.hypot(re.stderr[w1, w2], im.stderr[w1, w2]))
        return value, stderr

    def special_frequency_report(self) -> dict:
        """Compare the real/imaginary power split at the special frequencies to 1/2."""
        report = {}
        for w in self.special_frequencies:
            report[w] = {
                "real_power": float(self.real_power.mean[w]),
                "imag_power": float(self.imag_power.mean[w]),
                "power": float(self.power.mean[w]),
                "half_split_holds": bool(
                    self.real_power.within(0.5)[w] and self.imag_power.within(0.5)[w]
                ),
            }
        return report


def spectrum_statistics(dist: FilterDistribution, n: int, trials: int, seed: int,
                        workers: int = 1) -> SpectrumStatistics:
    """Estimate the first and second moments of the spectrum over ``trials`` filters."""
    n = check_dimension(n)
    require_trials(trials, MIN_STATISTICS_TRIALS, "spectrum_statistics")
    if n > MAX_STATISTICS_DIMENSION:
        raise ConfigurationError(
            f"spectrum_statistics builds n x n cross moments; n={n} exceeds {MAX_STATISTICS_DIMENSION}"
        )

    def block(rng: np.random.Generator, size: int) -> dict[str, tuple]:
        spec = scipy.fft.fft(dist.draw(rng, n, size), axis=1)
        re, im = spec.real, spec.imag
        power = re * re + im * im
        per_freq = np.stack([power, re, im, re * re, im * im, re * im], axis=1)
        # s(w1) s*(w2) = (R1 R2 + I1 I2) + j (I1 R2 - R1 I2)
        rr, ii, ri = re.T @ re, im.T @ im, re.T @ im
        rr2, ii2, ri2 = (re**2).T @ re**2, (im**2).T @ im**2, (re**2).T @ im**2
        ir2 = (im**2).T @ re**2
        cross_re = rr + ii
        cross_im = ri.T - ri
        # E(x+y)^2 = E x^2 + 2 E xy + E y^2 with x = R1R2, y = I1I2
        rrii = (re * im).T @ (re * im)
        cross_re_sq = rr2 + 2.0 * rrii + ii2
        cross_im_sq = ir2 - 2.0 * rrii + ri2
        return {
            "per_freq": (size, per_freq.sum(axis=0), np.square(per_freq).sum(axis=0)),
            "cross_re": (size, cross_re, cross_re_sq),
            "cross_im": (size, cross_im, cross_im_sq),
            "rr": (size, rr, rr2),
            "ii": (size, ii, ii2),
            "ri": (size, ri, ri2),
        }

    sums: dict[str, MomentSums] = {}
    for partial in run_blocks(seed, trials, block, workers=workers):
        for key, (count, total, total_sq) in partial.items():
            sums.setdefault(key, MomentSums()).add_sums(count, total, total_sq)

    per_freq = sums["per_freq"].estimate()

    def row(i: int) -> MeanEstimate:
        return MeanEstimate(mean=per_freq.mean[i], stderr=per_freq.stderr[i])

    stats = SpectrumStatistics(
        n=n,
        trials=trials,
        distribution=dist,
        power=row(0),
        real_mean=row(1),
        imag_mean=row(2),
        real_power=row(3),
        imag_power=row(4),
        real_imag=row(5),
        cross_real=sums["cross_re"].estimate(),
        cross_imag=sums["cross_im"].estimate(),
        cross_rr=sums["rr"].estimate(),
        cross_ii=sums["ii"].estimate(),
        cross_ri=sums["ri"].estimate(),
    )
    for w, entry in stats.special_frequency_report().items():
        if not entry["half_split_holds"]:
            logger.info(
                "special frequency %d: <s_R^2>=%.4f <s_I^2>=%.4f (generic split is 1/2 each)",
                w, entry["real_power"], entry["imag_power"],
            )
    return stats
