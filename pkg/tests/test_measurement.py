import numpy as np
import pytest

from src.sensing.errors import ConfigurationError, InvalidDimensionError, ResourceLimitError
from src.sensing.filters import sample_filter
from src.sensing.measurement import (
    BranchMode,
    MaskModel,
    apply_adjoint,
    apply_forward,
    build_operator,
    composite_gram,
    entry_correlation_check,
    full_mask,
    gram_expectation_check,
    mask_from_indices,
    sample_mask,
    to_dense,
)
from src.sensing.spectral import dft_matrix


def conv_operator(random_filter):
    return build_operator(random_filter, BranchMode.CONVOLUTION_ONLY, full_mask(random_filter.n))


@pytest.mark.parametrize("n", [8, 16, 32, 64])
def test_dense_operator_matches_fourier_product(n, gaussian):
    F = dft_matrix(n)
    for seed in range(50):
        f = sample_filter(n, gaussian, seed)
        op = conv_operator(f)
        explicit = F.conj().T @ np.diag(f.spectrum) @ F / np.sqrt(n)
        assert np.max(np.abs(explicit.imag)) <= 1e-10
        dense = to_dense(op)
        assert np.max(np.abs(dense - explicit.real)) <= 1e-10
        np.testing.assert_allclose(dense, op.kernel.to_dense(), atol=1e-10)


def test_entries_follow_taps(gaussian):
    f = sample_filter(16, gaussian, seed=1)
    dense = to_dense(conv_operator(f))
    i, j = 5, 11
    assert dense[i, j] == pytest.approx(4.0 * f.taps[(i - j) % 16], abs=1e-12)


@pytest.mark.parametrize("n", [16, 64, 256])
def test_energy_is_weighted_spectrum(n, gaussian, rng):
    for seed in range(20):
        f = sample_filter(n, gaussian, seed)
        x = rng.standard_normal(n)
        # sqrt(n) scaling cancels the 1/n of the inverse transform
        expected = np.sum(np.abs(f.spectrum) ** 2 * np.abs(np.fft.fft(x)) ** 2)
        energy = np.sum(apply_forward(conv_operator(f), x) ** 2)
        assert energy == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("n", [8, 32, 128])
@pytest.mark.parametrize("mode", list(BranchMode))
def test_adjoint_identity(n, mode, gaussian, rng):
    for trial in range(100):
        f = sample_filter(n, gaussian, seed=trial)
        rows = mode.total_rows(n)
        mask = sample_mask(rows, rows // 2, MaskModel.UNIFORM_SET, seed=1000 + trial)
        op = build_operator(f, mode, mask)
        x, y = rng.standard_normal(n), rng.standard_normal(op.realized_m)
        lhs = apply_forward(op, x) @ y
        rhs = x @ apply_adjoint(op, y)
        assert abs(lhs - rhs) <= 1e-10 * np.linalg.norm(x) * np.linalg.norm(y)


def test_dual_branch_stacks_scaled_identity(gaussian):
    n = 8
    f = sample_filter(n, gaussian, seed=2)
    op = build_operator(f, BranchMode.DUAL_BRANCH, full_mask(2 * n))
    dense = to_dense(op)
    assert dense.shape == (2 * n, n)
    np.testing.assert_allclose(dense[n:], np.sqrt(n) * np.eye(n), atol=1e-12)
    H = dense[:n]
    np.testing.assert_allclose(composite_gram(op), H.T @ H + n * np.eye(n), atol=1e-9)


def test_masked_rows_are_a_subset(gaussian, rng):
    f = sample_filter(16, gaussian, seed=3)
    mask = mask_from_indices(32, [0, 3, 17, 30])
    op = build_operator(f, "dual_branch", mask)
    full = build_operator(f, "dual_branch", full_mask(32))
    x = rng.standard_normal(16)
    np.testing.assert_allclose(op.forward(x), full.forward(x)[[0, 3, 17, 30]])
    np.testing.assert_allclose(op.forward_columns(np.eye(16)), to_dense(full)[[0, 3, 17, 30]], atol=1e-12)


def test_uniform_mask_keeps_exactly_m():
    mask = sample_mask(64, 20, "uniform_set", seed=4)
    assert mask.realized_m == 20
    assert np.all(np.diff(mask.kept) > 0)
    again = sample_mask(64, 20, "uniform_set", seed=4)
    np.testing.assert_array_equal(mask.kept, again.kept)


def test_bernoulli_mask_size_is_random():
    sizes = [sample_mask(256, 64, MaskModel.BERNOULLI, seed=s).realized_m for s in range(200)]
    assert len(set(sizes)) > 1
    assert abs(np.mean(sizes) - 64) < 3


def test_branch_quota_splits_rows():
    mask = sample_mask(32, 10, "uniform_set", seed=5, branch_quota=(7, 3))
    assert np.sum(mask.kept < 16) == 7
    assert np.sum(mask.kept >= 16) == 3
    with pytest.raises(ConfigurationError):
        sample_mask(32, 10, "uniform_set", seed=5, branch_quota=(6, 3))
    with pytest.raises(ConfigurationError):
        sample_mask(32, 40, "uniform_set", seed=5)


def test_operator_rejects_mismatches(gaussian):
    f = sample_filter(8, gaussian, seed=0)
    with pytest.raises(ConfigurationError):
        build_operator(f, BranchMode.DUAL_BRANCH, full_mask(8))
    op = conv_operator(f)
    with pytest.raises(InvalidDimensionError):
        op.forward(np.zeros(16))
    with pytest.raises(InvalidDimensionError):
        op.adjoint(np.zeros(3))


def test_dense_path_has_a_ceiling(gaussian):
    op = conv_operator(sample_filter(8192, gaussian, seed=0))
    with pytest.raises(ResourceLimitError):
        to_dense(op)


def test_gram_check_limits(gaussian):
    with pytest.raises(ConfigurationError):
        gram_expectation_check(gaussian, 16, trials=10, seed=0)
    with pytest.raises(ResourceLimitError):
        gram_expectation_check(gaussian, 128, trials=1000, seed=0)
    with pytest.raises(ConfigurationError):
        entry_correlation_check(gaussian, 16, trials=100, seed=0)


@pytest.mark.slow
def test_gram_expectation(gaussian):
    report = gram_expectation_check(gaussian, 16, trials=20_000, seed=21)
    assert report.convolution_diagonal_within()
    assert report.offdiagonal_within()
    # the stacked identity adds n to the diagonal, so the composite averages 2n
    assert not report.composite_claim_holds()
    assert report.summary()["mean_composite_diagonal"] == pytest.approx(32.0, abs=0.5)
    assert report.cross_term_within(sigmas=4.0)
    assert set(report.special_frequency_eigenvalues()) == {0, 8}


@pytest.mark.slow
def test_entry_correlations(gaussian):
    report = entry_correlation_check(gaussian, 32, trials=100_000, seed=22)
    assert report.diagonal_matches_exact()
    assert not report.diagonal_matches_stated()
    assert report.offdiagonal_within_envelope()
    assert report.max_offdiagonal < 1 / 32
    assert report.summary()["max_gap_mean"] < report.envelope
