import json

import numpy as np
import pytest

from src.sensing.errors import ConfigurationError, InvalidDimensionError
from src.sensing.filters import (
    FilterDistribution,
    FilterKind,
    filter_from_taps,
    frequency_response,
    recovered_taps,
    sample_filter,
    spectrum_statistics,
)


def test_sampling_is_deterministic(gaussian):
    a = sample_filter(32, gaussian, seed=5)
    b = sample_filter(32, gaussian, seed=5)
    c = sample_filter(32, gaussian, seed=6)
    np.testing.assert_array_equal(a.taps, b.taps)
    assert not np.array_equal(a.taps, c.taps)


def test_default_scale_gives_unit_total_variance(gaussian):
    taps = np.concatenate([sample_filter(64, gaussian, seed=s).taps for s in range(200)])
    # 64 taps of variance 1/64 each
    assert abs(64 * np.var(taps) - 1.0) < 0.05


def test_bernoulli_and_uniform_laws():
    n = 16
    bern = sample_filter(n, FilterDistribution(FilterKind.BERNOULLI), seed=1)
    np.testing.assert_allclose(np.abs(bern.taps), 1 / np.sqrt(n))
    uni = sample_filter(n, FilterDistribution("uniform", scale=2.0), seed=1)
    assert np.all(np.abs(uni.taps) <= np.sqrt(3.0) * 2.0)


def test_spectrum_is_conjugate_symmetric(gaussian):
    f = sample_filter(64, gaussian, seed=3)
    assert f.symmetry_deviation() < 1e-12
    np.testing.assert_allclose(frequency_response(f), np.fft.fft(f.taps), atol=1e-12)


def test_inverse_recovers_taps(gaussian):
    f = sample_filter(128, gaussian, seed=4)
    back = recovered_taps(f)
    assert np.max(np.abs(back.imag)) <= 1e-12
    np.testing.assert_allclose(back.real, f.taps, atol=1e-12)


def test_dump_round_trips_exactly(gaussian):
    f = sample_filter(16, gaussian, seed=9)
    dump = json.loads(json.dumps(f.to_dict()))
    assert set(dump) == {"n", "distribution", "seed", "taps"}
    assert dump["distribution"] == {"kind": "gaussian", "scale": 0.25}
    np.testing.assert_array_equal(np.array(dump["taps"]), f.taps)
    replay = filter_from_taps(dump["taps"], seed=dump["seed"])
    np.testing.assert_array_equal(replay.spectrum, f.spectrum)


def test_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        FilterDistribution("cauchy")
    with pytest.raises(ConfigurationError):
        FilterDistribution(scale=0.0)
    with pytest.raises(InvalidDimensionError):
        filter_from_taps(np.zeros((4, 4)))
    with pytest.raises(InvalidDimensionError):
        sample_filter(12, FilterDistribution(), seed=0)


def test_statistics_need_enough_trials(gaussian):
    with pytest.raises(ConfigurationError):
        spectrum_statistics(gaussian, 16, trials=999, seed=0)
    with pytest.raises(ConfigurationError):
        spectrum_statistics(gaussian, 512, trials=1000, seed=0)


def test_spectrum_moments(gaussian):
    n = 16
    stats = spectrum_statistics(gaussian, n, trials=4000, seed=11)
    np.testing.assert_allclose(stats.power.mean, 1.0, atol=0.1)
    np.testing.assert_allclose(stats.real_mean.mean, 0.0, atol=0.1)
    generic = [w for w in range(n) if w not in stats.special_frequencies]
    np.testing.assert_allclose(stats.real_power.mean[generic], 0.5, atol=0.1)
    np.testing.assert_allclose(stats.imag_power.mean[generic], 0.5, atol=0.1)
    # the two special frequencies carry all their power in the real part
    for w in stats.special_frequencies:
        assert abs(stats.real_power.mean[w] - 1.0) < 0.1
        assert stats.imag_power.mean[w] < 1e-20
    report = stats.special_frequency_report()
    assert not any(entry["half_split_holds"] for entry in report.values())
    value, _ = stats.cross_magnitude(1, 2)
    assert value < 0.1
    diag, _ = stats.cross_magnitude(3, 3)
    assert abs(diag - 1.0) < 0.1


def test_statistics_do_not_depend_on_workers(gaussian):
    one = spectrum_statistics(gaussian, 8, trials=9000, seed=2, workers=1)
    three = spectrum_statistics(gaussian, 8, trials=9000, seed=2, workers=3)
    np.testing.assert_array_equal(one.power.mean, three.power.mean)


def test_spectrum_moments_within_standard_errors(gaussian):
    n = 16
    stats = spectrum_statistics(gaussian, n, trials=100_000, seed=21)
    generic = [w for w in range(n) if w not in stats.special_frequencies]
    # fourteen frequencies at once
    assert np.all(stats.power.within(1.0, sigmas=4.0)[generic])
    assert stats.real_imag.within(0.0)[2]
    value, stderr = stats.cross_magnitude(1, 4)
    assert value <= 3.0 * stderr
    for matrix in (stats.cross_rr, stats.cross_ii, stats.cross_ri):
        assert matrix.within(0.0)[1, 4]
    # conjugate pairs: real parts agree, imaginary parts flip sign
    assert stats.cross_rr.within(0.5)[3, n - 3]
    assert stats.cross_ii.within(-0.5)[3, n - 3]
