"""Experiment configuration, loaded from JSON and overridden from the command line."""

from enum import StrEnum
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..sensing.bases import BasisKind
from ..sensing.errors import ConfigurationError
from ..sensing.filters import FilterDistribution, FilterKind
from ..sensing.measurement import BranchMode, MaskModel
from ..sensing.recovery import MagnitudeLaw, SolverParams
from ..sensing.spectral import MIN_DIMENSION, is_power_of_two


class GateFormula(StrEnum):
    LOG_CUBED = "log_cubed"
    MU_SQUARED_LOG_SQUARED = "mu_squared_log_squared"


class Pipeline(StrEnum):
    MATRIX_FREE = "matrix_free"
    DENSE = "dense"


class OutputFormat(StrEnum):
    CSV = "csv"
    JSON = "json"


class FilterSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: FilterKind = FilterKind.GAUSSIAN
    scale: float | None = Field(default=None, gt=0)

    def distribution(self) -> FilterDistribution:
        return FilterDistribution(kind=self.kind, scale=self.scale)


class SolverSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tolerance: float = Field(default=1e-8, gt=0)
    max_iterations: int = Field(default=5000, ge=1)
    gap_tolerance: float = Field(default=1e-6, gt=0)
    penalty: float = Field(default=1.0, gt=0)
    relaxation: float = Field(default=1.0, gt=0, lt=2)

    def params(self) -> SolverParams:
        return SolverParams(tolerance=self.tolerance, max_iterations=self.max_iterations,
                            gap_tolerance=self.gap_tolerance, penalty=self.penalty, relaxation=self.relaxation)


class DiagnosticsSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seeds: int = Field(default=200, ge=1)
    premise_c: float = Field(default=2.0, gt=0)
    include_identity: bool = False
    conditioning_m: list[int] = Field(default_factory=list)


class ExperimentConfig(BaseModel):
    """Everything a sweep needs; ``log`` is the natural logarithm throughout."""

    model_config = ConfigDict(extra="forbid")

    n: int = 256
    sparsity_grid: list[int] = Field(default_factory=lambda: [2, 4, 8], min_length=1)
    m_grid: list[int] = Field(default_factory=lambda: [16, 32, 64, 128], min_length=1)
    trials_per_cell: int = Field(default=20, ge=1)
    basis_kind: BasisKind = BasisKind.IDENTITY
    filter: FilterSettings = Field(default_factory=FilterSettings)
    branch_mode: BranchMode = BranchMode.DUAL_BRANCH
    mask_model: MaskModel = MaskModel.UNIFORM_SET
    magnitude_law: MagnitudeLaw = MagnitudeLaw.UNIT
    pipeline: Pipeline = Pipeline.MATRIX_FREE
    delta: float = Field(default=0.1, gt=0, lt=1)
    alpha_threshold: float = Field(default=0.5, gt=0, le=1)
    c0: float = Field(default=1.0, gt=0)
    c0_prime: float = Field(default=1.0, gt=0)
    gate_formula: GateFormula = GateFormula.LOG_CUBED
    root_seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)
    solver: SolverSettings = Field(default_factory=SolverSettings)
    diagnostics: DiagnosticsSettings = Field(default_factory=DiagnosticsSettings)
    output_path: Path | None = None
    output_format: OutputFormat = OutputFormat.JSON

    @field_validator("n")
    @classmethod
    def _power_of_two(cls, n: int) -> int:
        if n < MIN_DIMENSION or not is_power_of_two(n):
            raise ValueError(f"n must be a power of two >= {MIN_DIMENSION}, got {n}")
        return n

    @field_validator("sparsity_grid", "m_grid")
    @classmethod
    def _positive_grid(cls, grid: list[int]) -> list[int]:
        if any(v < 1 for v in grid):
            raise ValueError("grid values must be >= 1")
        return grid

    @model_validator(mode="after")
    def _fits_dimension(self) -> "ExperimentConfig":
        rows = self.total_rows
        if any(m > rows for m in self.m_grid):
            raise ValueError(f"m values must not exceed the {rows} rows of a {self.branch_mode.value} operator")
        if any(s > self.n for s in self.sparsity_grid):
            raise ValueError(f"sparsity values must not exceed n={self.n}")
        if any(m > rows or m < 1 for m in self.diagnostics.conditioning_m):
            raise ValueError(f"conditioning m values must lie in [1, {rows}]")
        return self

    @property
    def total_rows(self) -> int:
        return self.branch_mode.total_rows(self.n)

    def cells(self) -> list[tuple[int, int]]:
        return [(s, m) for s in self.sparsity_grid for m in self.m_grid]

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentConfig":
        """Read and validate a JSON config; ``OSError`` propagates, bad content raises ``ValidationError``."""
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    def with_overrides(self, **overrides: object) -> "ExperimentConfig":
        """Apply non-``None`` overrides and re-validate."""
        update = {k: v for k, v in overrides.items() if v is not None}
        if not update:
            return self
        return type(self).model_validate({**self.model_dump(), **update})


def require_config(config: ExperimentConfig | dict) -> ExperimentConfig:
    if isinstance(config, ExperimentConfig):
        return config
    if not isinstance(config, dict):
        raise ConfigurationError(f"expected an experiment config, got {type(config).__name__}")
    return ExperimentConfig.model_validate(config)
