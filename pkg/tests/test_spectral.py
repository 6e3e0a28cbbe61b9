import numpy as np
import pytest

from src.sensing.errors import InvalidDimensionError, RealnessError
from src.sensing.spectral import (
    CirculantKernel,
    check_dimension,
    circulant_apply,
    circulant_apply_adjoint,
    dft_forward,
    dft_inverse,
    drop_imaginary,
    naive_dft,
)


@pytest.mark.parametrize("n", [4, 8, 16, 64])
def test_fast_transform_matches_defining_sum(n, rng):
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    np.testing.assert_allclose(dft_forward(x), naive_dft(x), atol=1e-10 * n)


def test_impulse_and_constant():
    impulse = np.zeros(8)
    impulse[0] = 1.0
    np.testing.assert_allclose(dft_forward(impulse), np.ones(8))
    expected = np.zeros(8)
    expected[0] = 8.0
    np.testing.assert_allclose(dft_forward(np.ones(8)), expected, atol=1e-12)


def test_inverse_undoes_forward(rng):
    x = rng.standard_normal(32)
    np.testing.assert_allclose(dft_inverse(dft_forward(x)).real, x, atol=1e-12)


@pytest.mark.parametrize("n", [0, 2, 3, 6, 12])
def test_rejects_bad_lengths(n):
    with pytest.raises(InvalidDimensionError):
        check_dimension(n)


def test_transform_rejects_matrix():
    with pytest.raises(InvalidDimensionError):
        dft_forward(np.zeros((4, 4)))


def test_drop_imaginary_rejects_complex_data():
    assert drop_imaginary(np.array([1.0 + 1e-14j, 2.0])).dtype == np.float64
    with pytest.raises(RealnessError):
        drop_imaginary(np.array([1.0 + 1e-3j, 2.0]))


def test_kernel_rows_are_rotations(rng):
    kernel = CirculantKernel(rng.standard_normal(16))
    dense = kernel.to_dense()
    np.testing.assert_array_equal(dense[0], kernel.first_row)
    for r in range(1, 16):
        np.testing.assert_array_equal(dense[r], np.roll(kernel.first_row, r))


@pytest.mark.parametrize("n", [8, 32, 128])
def test_apply_matches_dense(n, rng):
    kernel = CirculantKernel(rng.standard_normal(n))
    x, y = rng.standard_normal(n), rng.standard_normal(n)
    dense = kernel.to_dense()
    np.testing.assert_allclose(circulant_apply(kernel, x), dense @ x, atol=1e-10 * n)
    np.testing.assert_allclose(circulant_apply_adjoint(kernel, y), dense.T @ y, atol=1e-10 * n)


def test_apply_rejects_length_mismatch(rng):
    kernel = CirculantKernel(rng.standard_normal(8))
    with pytest.raises(InvalidDimensionError):
        circulant_apply(kernel, np.zeros(16))


def test_kernel_is_read_only(rng):
    kernel = CirculantKernel(rng.standard_normal(8))
    with pytest.raises(ValueError):
        kernel.first_row[0] = 1.0


def test_transform_is_linear(rng):
    x, y = rng.standard_normal(64), rng.standard_normal(64) + 1j * rng.standard_normal(64)
    a, b = rng.standard_normal(2)
    np.testing.assert_allclose(dft_forward(a * x + b * y), a * dft_forward(x) + b * dft_forward(y), atol=1e-12 * 64)


@pytest.mark.parametrize("n", [4, 32, 256])
def test_parseval_scales_by_n(n, rng):
    x = rng.standard_normal(n)
    energy = np.sum(np.abs(dft_forward(x)) ** 2)
    assert energy == pytest.approx(n * np.sum(x**2), rel=1e-12)


@pytest.mark.parametrize("shift", [1, 5, 31])
def test_apply_commutes_with_cyclic_shift(shift, rng):
    kernel = CirculantKernel(rng.standard_normal(32))
    x = rng.standard_normal(32)
    np.testing.assert_allclose(circulant_apply(kernel, np.roll(x, shift)),
                               np.roll(circulant_apply(kernel, x), shift), atol=1e-12)
