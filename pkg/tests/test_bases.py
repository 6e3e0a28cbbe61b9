import numpy as np
import pytest
import scipy.fft

from src.sensing.bases import BasisKind, build_basis
from src.sensing.errors import ConfigurationError, InvalidDimensionError


@pytest.mark.parametrize("kind", list(BasisKind))
@pytest.mark.parametrize("n", [4, 16, 64])
def test_bases_are_orthonormal(kind, n):
    Psi = build_basis(kind, n).to_dense()
    np.testing.assert_allclose(Psi.T @ Psi, np.eye(n), atol=1e-12)


@pytest.mark.parametrize("kind", list(BasisKind))
def test_analysis_inverts_synthesis(kind, rng):
    basis = build_basis(kind, 32)
    alpha = rng.standard_normal(32)
    np.testing.assert_allclose(basis.analyze(basis.synthesize(alpha)), alpha, atol=1e-12)
    block = rng.standard_normal((32, 5))
    np.testing.assert_allclose(basis.synthesize(block)[:, 2], basis.synthesize(block[:, 2]), atol=1e-12)


def test_columns_match_dense():
    basis = build_basis("haar", 16)
    np.testing.assert_allclose(basis.columns([3, 0, 9]), basis.to_dense()[:, [3, 0, 9]], atol=1e-12)


def test_haar_first_column_is_constant():
    Psi = build_basis(BasisKind.HAAR, 16).to_dense()
    np.testing.assert_allclose(Psi[:, 0], np.full(16, 0.25), atol=1e-12)


def test_dct_uses_orthonormal_type_two():
    Psi = build_basis(BasisKind.DCT, 8).to_dense()
    np.testing.assert_allclose(Psi, scipy.fft.idct(np.eye(8), type=2, norm="ortho", axis=0), atol=1e-12)


def test_invalid_basis_input():
    with pytest.raises(ConfigurationError):
        build_basis("wavelet", 16)
    with pytest.raises(InvalidDimensionError):
        build_basis("dct", 10)
    with pytest.raises(InvalidDimensionError):
        build_basis("identity", 8).synthesize(np.zeros(4))
