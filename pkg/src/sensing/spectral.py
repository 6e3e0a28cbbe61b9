"""Discrete Fourier transform and matrix-free circulant application.

The forward transform follows the unnormalized convention

    F[t, w] = exp(-j 2 pi t w / n),   0 <= t, w < n

so an impulse maps to all ones and a constant vector maps to n times the first
unit vector. All normalization lives in the operator constructors.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidDimensionError, RealnessError

ComplexVector = NDArray[np.complex128]
RealVector = NDArray[np.float64]

MIN_DIMENSION = 4
REALNESS_TOLERANCE = 1e-10


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def check_dimension(n: int) -> int:
    """Validate a signal length: a power of two, at least 4."""
    if not isinstance(n, (int, np.integer)) or n < MIN_DIMENSION or not is_power_of_two(int(n)):
        raise InvalidDimensionError(
            f"length must be a power of two >= {MIN_DIMENSION}, got {n!r}"
        )
    return int(n)


def _as_vector(x: ArrayLike, dtype: type) -> NDArray:
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim != 1:
        raise InvalidDimensionError(f"expected a 1-D vector, got shape {arr.shape}")
    check_dimension(arr.shape[0])
    return arr


def dft_forward(x: ArrayLike) -> ComplexVector:
    """Return ``F x`` (negative exponent, no 1/sqrt(n) factor)."""
    return scipy.fft.fft(_as_vector(x, np.complex128))


def dft_inverse(X: ArrayLike) -> ComplexVector:
    """Return ``(1/n) F* X``, the exact inverse of :func:`dft_forward`."""
    return scipy.fft.ifft(_as_vector(X, np.complex128))


def naive_dft(x: ArrayLike) -> ComplexVector:
    """O(n^2) evaluation of the defining sum. Used as a reference."""
    arr = _as_vector(x, np.complex128)
    n = arr.shape[0]
    return dft_matrix(n) @ arr


def dft_matrix(n: int) -> NDArray[np.complex128]:
    n = check_dimension(n)
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n)


def drop_imaginary(z: ComplexVector, tolerance: float = REALNESS_TOLERANCE) -> RealVector:
    """Return the real part of ``z`` after checking the imaginary residue is negligible.

    The residue is measured relative to ``max(1, max|z|)``.
    """
    if z.size == 0:
        return np.zeros(z.shape, dtype=np.float64)
    residue = float(np.max(np.abs(z.imag)))
    scale = max(1.0, float(np.max(np.abs(z))))
    if residue > tolerance * scale:
        raise RealnessError(
            f"imaginary residue {residue:.3e} exceeds {tolerance:.0e} (scale {scale:.3e})"
        )
    return np.ascontiguousarray(z.real, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class CirculantKernel:
    """First row ``(a_1, ..., a_n)`` of a circulant matrix.

    Row ``r`` of the implied matrix is the first row rotated right by ``r``
    positions, so entry ``(i, j)`` is ``first_row[(j - i) mod n]``.
    """

    first_row: RealVector

    def __post_init__(self) -> None:
        row = _as_vector(self.first_row, np.float64)
        row.setflags(write=False)
        object.__setattr__(self, "first_row", row)

    @property
    def n(self) -> int:
        return int(self.first_row.shape[0])

    @cached_property
    def spectrum(self) -> ComplexVector:
        return scipy.fft.fft(self.first_row)

    def to_dense(self) -> NDArray[np.float64]:
        idx = np.arange(self.n)
        return self.first_row[(idx[None, :] - idx[:, None]) % self.n]


def _check_pair(kernel: CirculantKernel, x: ArrayLike) -> RealVector:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != kernel.n:
        raise InvalidDimensionError(
            f"vector of shape {arr.shape} does not match kernel length {kernel.n}"
        )
    return arr


def circulant_apply(kernel: CirculantKernel, x: ArrayLike) -> RealVector:
    """Multiply the circulant matrix of ``kernel`` by ``x`` in O(n log n).

    ``(Cx)_i = sum_k a_k x_{(i+k) mod n}`` is a circular correlation, which the
    DFT diagonalizes as ``conj(A) * X`` for a real first row.
    """
    arr = _check_pair(kernel, x)
    product = scipy.fft.ifft(np.conj(kernel.spectrum) * scipy.fft.fft(arr))
    return drop_imaginary(product)


def circulant_apply_adjoint(kernel: CirculantKernel, y: ArrayLike) -> RealVector:
    """Multiply the transpose of the circulant matrix of ``kernel`` by ``y``."""
    arr = _check_pair(kernel, y)
    product = scipy.fft.ifft(kernel.spectrum * scipy.fft.fft(arr))
    return drop_imaginary(product)
