import math

import numpy as np
import pytest

from src.sensing.bases import build_basis
from src.sensing.diagnostics import (
    BoundSweep,
    ConditioningPoint,
    ConditioningTrend,
    coherence,
    coherence_bound,
    coherence_sweep,
    conditioning_trend,
    gram_conditioning,
    operator_coherence,
    random_support,
    row_norm_bound,
    row_norm_limit,
    row_norm_sweep,
    side_conditions,
)
from src.sensing.errors import ConfigurationError, ResourceLimitError
from src.sensing.filters import filter_from_taps, sample_filter
from src.sensing.measurement import BranchMode, build_operator, full_mask, mask_from_indices, sample_mask, to_dense


def test_bound_values():
    assert coherence_bound(256, 0.1) == pytest.approx(3.904, abs=1e-3)
    assert row_norm_limit(8) == pytest.approx(8.0)
    with pytest.raises(ConfigurationError):
        coherence_bound(64, 1.0)


def test_impulse_coherence_is_sqrt_n(impulse_filter):
    op = build_operator(impulse_filter(4), BranchMode.CONVOLUTION_ONLY, full_mask(4))
    check = coherence(to_dense(op), np.eye(4), 0.1)
    assert check.measured == pytest.approx(2.0)
    assert check.holds
    assert operator_coherence(op, build_basis("identity", 4), 0.1).measured == pytest.approx(2.0)


def test_coherence_ignores_column_order(gaussian, rng):
    op = build_operator(sample_filter(32, gaussian, 4), BranchMode.CONVOLUTION_ONLY, full_mask(32))
    Psi = build_basis("dct", 32).to_dense()
    H = to_dense(op)
    perm = rng.permutation(32)
    assert coherence(H, Psi[:, perm], 0.1).measured == pytest.approx(coherence(H, Psi, 0.1).measured)


def test_coherence_refuses_large_dense_products():
    with pytest.raises(ResourceLimitError):
        coherence(np.zeros((1, 8192)), np.zeros((8192, 1)), 0.1)


def test_row_norm_of_impulse_filter(impulse_filter):
    op = build_operator(impulse_filter(16), BranchMode.CONVOLUTION_ONLY, full_mask(16))
    check = row_norm_bound(op, build_basis("identity", 16), [2, 9])
    # each row of sqrt(n) I restricted to the support has one entry sqrt(n)
    assert check.measured == pytest.approx(4.0)
    assert check.bound == pytest.approx(4.0)
    assert check.holds
    assert check.context["premise_holds"] is False


def test_row_norm_grows_with_support(gaussian):
    op = build_operator(sample_filter(64, gaussian, 11), BranchMode.CONVOLUTION_ONLY, full_mask(64))
    basis = build_basis("haar", 64)
    small = row_norm_bound(op, basis, [3, 17]).measured
    large = row_norm_bound(op, basis, [3, 17, 40, 41]).measured
    assert small <= large + 1e-12
    with pytest.raises(ConfigurationError):
        row_norm_bound(op, basis, [])


def test_empty_mask_fails_conditioning(gaussian):
    op = build_operator(sample_filter(16, gaussian, 1), BranchMode.DUAL_BRANCH, mask_from_indices(32, []))
    check = gram_conditioning(op, build_basis("identity", 16), [0, 5])
    assert math.isinf(check.measured)
    assert not check.holds
    assert check.context["empty_mask"]


def test_full_sampling_of_impulse_is_perfectly_conditioned(impulse_filter):
    n = 16
    op = build_operator(impulse_filter(n), BranchMode.DUAL_BRANCH, full_mask(2 * n))
    check = gram_conditioning(op, build_basis("identity", n), [1, 4, 7])
    assert check.measured == pytest.approx(0.0, abs=1e-12)
    assert check.holds


def test_conditioning_ignores_filter_sign(gaussian):
    f = sample_filter(32, gaussian, 21)
    mask = sample_mask(64, 20, "uniform_set", 5)
    basis = build_basis("dct", 32)
    plus = gram_conditioning(build_operator(f, BranchMode.DUAL_BRANCH, mask), basis, [2, 8, 30])
    minus = gram_conditioning(build_operator(filter_from_taps(-f.taps), BranchMode.DUAL_BRANCH, mask), basis,
                              [2, 8, 30])
    assert plus.measured == pytest.approx(minus.measured, abs=1e-12)
    assert plus.context["trend_term"] > 0


def test_side_conditions():
    assert side_conditions(64, 4.0, 2.0) == {"sqrt_m_le_v2_over_mu": True, "v2_le_4sqrt_m_over_mu": True}
    assert not side_conditions(10_000, 1.0, 1.0)["sqrt_m_le_v2_over_mu"]


def test_random_support():
    support = random_support(32, 5, 3)
    assert support.size == 5 and np.all(np.diff(support) > 0)
    np.testing.assert_array_equal(support, random_support(32, 5, 3))
    with pytest.raises(ConfigurationError):
        random_support(8, 9, 0)


def test_bound_sweep_tolerance():
    sweep = BoundSweep(name="coherence", n=64, trials=100, violations=17, delta=0.1, bound=3.0,
                       measured_mean=2.5, measured_max=3.4)
    assert sweep.rate == pytest.approx(0.17)
    assert sweep.tolerance() == pytest.approx(0.19)
    assert sweep.holds()
    assert not sweep.holds(sigmas=2.0)
    assert sweep.to_dict()["holds"] is True


def test_conditioning_trend_summary():
    points = (ConditioningPoint(m=16, trials=100, mean_deviation=0.8, failures=60),
              ConditioningPoint(m=64, trials=100, mean_deviation=0.4, failures=62),
              ConditioningPoint(m=256, trials=100, mean_deviation=0.2, failures=10))
    trend = ConditioningTrend(n=256, sparsity=4, points=points, slope=-0.5)
    assert trend.slope_within()
    assert trend.failures_non_increasing()
    assert trend.to_dict()["points"][2]["failure_rate"] == pytest.approx(0.1)


def test_sweeps_are_reproducible_across_workers(gaussian):
    one = coherence_sweep(gaussian, 32, 0.1, 12, root_seed=3)
    many = coherence_sweep(gaussian, 32, 0.1, 12, root_seed=3, workers=3)
    assert one == many
    rows = row_norm_sweep(gaussian, 32, 4, 0.1, 12, root_seed=3, workers=2)
    assert rows.trials == 12 and rows.context["S"] == 4
    with pytest.raises(ConfigurationError):
        coherence_sweep(gaussian, 32, 0.1, 0, root_seed=3)


def test_conditioning_trend_needs_two_values(gaussian):
    with pytest.raises(ConfigurationError):
        conditioning_trend(gaussian, 32, 2, [16], 5, root_seed=0)
    with pytest.raises(ConfigurationError):
        conditioning_trend(gaussian, 32, 2, [16, 128], 5, root_seed=0)


@pytest.mark.slow
def test_coherence_violations_stay_near_delta(gaussian):
    identity = coherence_sweep(gaussian, 128, 0.1, 1000, root_seed=2024, basis_kind="identity", workers=4)
    assert identity.holds(), identity.to_dict()
    # H Psi has n^2 distinct entries for cosine columns, not n, so the rate runs above delta
    dct = coherence_sweep(gaussian, 128, 0.1, 1000, root_seed=2024, basis_kind="dct", workers=4)
    assert dct.rate > dct.tolerance() and dct.rate > identity.rate, dct.to_dict()
    entry_tail = math.erfc(dct.bound / math.sqrt(2.0))
    assert dct.rate <= 1.0 - (1.0 - entry_tail) ** (128 * 128), dct.to_dict()


@pytest.mark.slow
def test_row_norm_violations_stay_near_delta(gaussian):
    sweep = row_norm_sweep(gaussian, 256, 32, 0.1, 1000, root_seed=2024, workers=4)
    assert sweep.holds(), sweep.to_dict()


@pytest.mark.slow
def test_conditioning_improves_like_inverse_root_m(gaussian):
    trend = conditioning_trend(gaussian, 512, 8, [64, 128, 256, 512], 500, root_seed=2024,
                               branch_mode=BranchMode.CONVOLUTION_ONLY, workers=4)
    means = [p.mean_deviation for p in trend.points]
    assert means == sorted(means, reverse=True)
    assert trend.slope_within(-0.5, 0.15), trend.to_dict()
    assert trend.failures_non_increasing(sigmas=2.0)
