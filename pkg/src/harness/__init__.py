"""
Harness Module

Experiment configuration, the seeded sweep engine and report emission.
"""

from .config import ExperimentConfig, GateFormula, OutputFormat, Pipeline
from .engine import (
    CellSummary,
    PhaseTransitionResult,
    TrialResult,
    run_diagnostics,
    run_phase_transition,
    run_trial,
)
from .report import emit_report, load_report, render_report

__all__ = [
    "CellSummary",
    "ExperimentConfig",
    "GateFormula",
    "OutputFormat",
    "PhaseTransitionResult",
    "Pipeline",
    "TrialResult",
    "emit_report",
    "load_report",
    "render_report",
    "run_diagnostics",
    "run_phase_transition",
    "run_trial",
]
