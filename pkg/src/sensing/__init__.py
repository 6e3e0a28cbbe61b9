"""
Sensing Module

Random-filter compressive sensing: spectral helpers, filter sampling,
measurement operators, basis pursuit decoding and bound diagnostics.
"""

from .bases import Basis, BasisKind, build_basis
from .diagnostics import (
    BoundCheck,
    BoundSweep,
    ConditioningTrend,
    coherence,
    coherence_sweep,
    conditioning_trend,
    gram_conditioning,
    operator_coherence,
    row_norm_bound,
    row_norm_sweep,
)
from .errors import (
    ConfigurationError,
    InvalidDimensionError,
    RealnessError,
    ResourceLimitError,
    SensingError,
)
from .filters import (
    FilterDistribution,
    FilterKind,
    RandomFilter,
    frequency_response,
    sample_filter,
    spectrum_statistics,
)
from .measurement import (
    BranchMode,
    MaskModel,
    MeasurementOperator,
    SamplingMask,
    apply_adjoint,
    apply_forward,
    build_operator,
    entry_correlation_check,
    gram_expectation_check,
    sample_mask,
    to_dense,
)
from .recovery import (
    CertificateReport,
    MagnitudeLaw,
    RecoveryResult,
    SolverParams,
    SparseSignal,
    composite_map,
    dual_certificate,
    exhaustive_l1_search,
    sample_sparse_signal,
    solve_bp,
    solve_bp_dense,
)
from .spectral import CirculantKernel, circulant_apply, circulant_apply_adjoint, dft_forward, dft_inverse

__all__ = [
    "Basis",
    "BasisKind",
    "BoundCheck",
    "BoundSweep",
    "BranchMode",
    "CertificateReport",
    "CirculantKernel",
    "ConditioningTrend",
    "ConfigurationError",
    "FilterDistribution",
    "FilterKind",
    "InvalidDimensionError",
    "MagnitudeLaw",
    "MaskModel",
    "MeasurementOperator",
    "RandomFilter",
    "RealnessError",
    "RecoveryResult",
    "ResourceLimitError",
    "SamplingMask",
    "SensingError",
    "SolverParams",
    "SparseSignal",
    "apply_adjoint",
    "apply_forward",
    "build_basis",
    "build_operator",
    "circulant_apply",
    "circulant_apply_adjoint",
    "coherence",
    "coherence_sweep",
    "composite_map",
    "conditioning_trend",
    "dft_forward",
    "dft_inverse",
    "dual_certificate",
    "entry_correlation_check",
    "exhaustive_l1_search",
    "frequency_response",
    "gram_conditioning",
    "gram_expectation_check",
    "operator_coherence",
    "row_norm_bound",
    "row_norm_sweep",
    "sample_filter",
    "sample_mask",
    "sample_sparse_signal",
    "solve_bp",
    "solve_bp_dense",
    "spectrum_statistics",
    "to_dense",
]
