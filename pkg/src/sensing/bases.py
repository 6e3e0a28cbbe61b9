"""Orthonormal sparsifying bases with matrix-free synthesis and analysis.

Both maps act along axis 0, so they accept a single vector or an ``n x k``
matrix of column vectors.
"""

from dataclasses import dataclass
from enum import StrEnum

import numpy as np
import scipy.fft
from numpy.typing import ArrayLike, NDArray

from .errors import ConfigurationError, InvalidDimensionError
from .spectral import check_dimension

SQRT_HALF = np.sqrt(0.5)


class BasisKind(StrEnum):
    IDENTITY = "identity"
    DCT = "dct"
    HAAR = "haar"


def _haar_analysis(x: NDArray[np.float64]) -> NDArray[np.float64]:
    # coefficient order: approximation, then details from coarsest to finest
    approx = x
    details = []
    while approx.shape[0] > 1:
        even, odd = approx[0::2], approx[1::2]
        details.append((even - odd) * SQRT_HALF)
        approx = (even + odd) * SQRT_HALF
    return np.concatenate([approx, *reversed(details)], axis=0)


def _haar_synthesis(c: NDArray[np.float64]) -> NDArray[np.float64]:
    n = c.shape[0]
    approx = c[:1]
    width = 1
    while width < n:
        detail = c[width:2 * width]
        out = np.empty((2 * width,) + c.shape[1:], dtype=np.float64)
        out[0::2] = (approx + detail) * SQRT_HALF
        out[1::2] = (approx - detail) * SQRT_HALF
        approx = out
        width *= 2
    return approx


@dataclass(frozen=True)
class Basis:
    """Orthonormal basis Psi of R^n; columns are the synthesis images of unit vectors."""

    kind: BasisKind
    n: int

    def _check(self, v: ArrayLike) -> NDArray[np.float64]:
        arr = np.asarray(v, dtype=np.float64)
        if arr.ndim not in (1, 2) or arr.shape[0] != self.n:
            raise InvalidDimensionError(f"expected leading dimension {self.n}, got shape {arr.shape}")
        return arr

    def synthesize(self, alpha: ArrayLike) -> NDArray[np.float64]:
        """``Psi @ alpha``."""
        arr = self._check(alpha)
        if self.kind is BasisKind.IDENTITY:
            return arr.copy()
        if self.kind is BasisKind.DCT:
            return scipy.fft.idct(arr, type=2, norm="ortho", axis=0)
        return _haar_synthesis(arr)

    def analyze(self, x: ArrayLike) -> NDArray[np.float64]:
        """``Psi^T @ x``."""
        arr = self._check(x)
        if self.kind is BasisKind.IDENTITY:
            return arr.copy()
        if self.kind is BasisKind.DCT:
            return scipy.fft.dct(arr, type=2, norm="ortho", axis=0)
        return _haar_analysis(arr)

    def columns(self, indices: ArrayLike) -> NDArray[np.float64]:
        """The ``n x len(indices)`` submatrix ``Psi[:, indices]``."""
        idx = np.asarray(indices, dtype=np.int64)
        unit = np.zeros((self.n, idx.size))
        unit[idx, np.arange(idx.size)] = 1.0
        return self.synthesize(unit)

    def to_dense(self) -> NDArray[np.float64]:
        return self.synthesize(np.eye(self.n))


def build_basis(kind: BasisKind | str, n: int) -> Basis:
    try:
        kind = BasisKind(kind)
    except ValueError as exc:
        raise ConfigurationError(f"unsupported basis kind {kind!r}") from exc
    return Basis(kind=kind, n=check_dimension(n))
