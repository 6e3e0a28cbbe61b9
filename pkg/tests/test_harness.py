import csv
import io
import json
import math
from pathlib import Path

import pytest
from pydantic import ValidationError

from src.harness import engine
from src.harness.config import ExperimentConfig, GateFormula, Pipeline, require_config
from src.harness.engine import (
    CellSummary,
    PhaseTransitionResult,
    gate_m,
    run_cell,
    run_diagnostics,
    run_phase_transition,
    run_trial,
    secondary_gate,
    trial_seed,
)
from src.harness.report import (
    emit_report,
    list_reports,
    load_report,
    parse_report,
    render_diagnostics,
    render_report,
    report_path,
)
from src.sensing.errors import ConfigurationError

EXAMPLE_CONFIG = Path(__file__).resolve().parents[1] / "data" / "configs" / "example.json"


def summary(sparsity, m, successes, trials=10):
    return CellSummary(sparsity=sparsity, m=m, trials=trials, successes=successes, certified=0,
                       mean_iterations=50.0, gate_m=0.0, root_seed=0)


class TestConfig:
    def test_defaults_are_valid(self):
        config = ExperimentConfig()
        assert config.total_rows == 2 * config.n
        assert config.cells()[:2] == [(2, 16), (2, 32)]

    def test_example_config_loads(self):
        config = ExperimentConfig.from_json_file(EXAMPLE_CONFIG)
        assert config.n == 256
        assert config.output_format == "csv"

    @pytest.mark.parametrize("update", [
        {"n": 10},
        {"n": 2},
        {"n": 16, "m_grid": [40]},
        {"n": 16, "branch_mode": "convolution_only", "m_grid": [20]},
        {"n": 16, "sparsity_grid": [17], "m_grid": [8]},
        {"m_grid": [0]},
        {"delta": 1.5},
        {"unknown_key": 1},
        {"solver": {"relaxation": 2.0}},
        {"diagnostics": {"conditioning_m": [0, 16]}},
    ])
    def test_rejects_invalid_settings(self, update):
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate(update)

    def test_overrides_are_validated(self, small_config):
        assert small_config.with_overrides(root_seed=None) is small_config
        assert small_config.with_overrides(root_seed=11).root_seed == 11
        with pytest.raises(ValidationError):
            small_config.with_overrides(workers=0)

    def test_require_config(self, small_config):
        assert require_config(small_config) is small_config
        assert require_config({"n": 16, "m_grid": [8]}).n == 16
        with pytest.raises(ConfigurationError):
            require_config([16])


class TestTrials:
    def test_trial_is_deterministic(self, small_config):
        first = run_trial(small_config, (2, 8), 99)
        second = run_trial(small_config, (2, 8), 99)
        assert first == second
        assert first.realized_m == 8

    def test_failed_trials_are_recorded_and_comparable(self, small_config, monkeypatch):
        def failing(config, instance):
            raise ConfigurationError("singular system")

        monkeypatch.setattr(engine, "solve_instance", failing)
        first = run_trial(small_config, (2, 8), 99)
        assert first.error == "singular system"
        assert not first.recovered and not first.converged
        assert first.residual_norm == math.inf
        assert first == run_trial(small_config, (2, 8), 99)

    def test_full_sampling_recovers(self, small_config):
        result = run_trial(small_config, (1, 32), 5)
        assert result.error is None
        assert result.converged and result.recovered
        assert result.relative_error <= 1e-6

    def test_trial_seeds_do_not_depend_on_cell_size(self, small_config):
        assert trial_seed(small_config, 1, 8, 0) != trial_seed(small_config, 1, 32, 0)
        short = run_cell(small_config, (2, 8))
        longer = run_cell(small_config.with_overrides(trials_per_cell=5), (2, 8))
        assert longer[:3] == short

    def test_coherence_gate(self, small_config):
        config = small_config.with_overrides(gate_formula=GateFormula.MU_SQUARED_LOG_SQUARED)
        result = run_trial(config, (1, 8), 3)
        assert result.coherence is not None and result.coherence > 0
        expected = math.log(16 / 0.1) ** 2 * result.coherence**2
        assert secondary_gate(config, result.coherence) == pytest.approx(expected)
        assert math.isnan(secondary_gate(config))

    def test_gates(self, small_config):
        assert gate_m(small_config, 2) == pytest.approx(2 * math.log(160))
        assert secondary_gate(small_config) == pytest.approx(math.log(160) ** 3)


class TestPhaseResult:
    def test_thresholds_and_calibration(self):
        config = ExperimentConfig(n=64, sparsity_grid=[2, 4], m_grid=[8, 16, 32])
        cells = (summary(2, 8, 3), summary(2, 16, 9), summary(2, 32, 10),
                 summary(4, 8, 0), summary(4, 16, 2), summary(4, 32, 6))
        result = PhaseTransitionResult(config=config, cells=cells)
        assert result.thresholds() == {2: 16, 4: None}
        assert result.empirical_c0() == pytest.approx(16 / (2 * math.log(640)))
        assert result.monotone_in_m()
        calibration = result.calibration()
        assert calibration["thresholds"] == {"2": 16, "4": None}
        assert result.cell(4, 16).success_rate == pytest.approx(0.2)
        with pytest.raises(KeyError):
            result.cell(8, 8)

    def test_detects_non_monotone_success(self):
        config = ExperimentConfig(n=64, sparsity_grid=[2], m_grid=[8, 16])
        result = PhaseTransitionResult(config=config, cells=(summary(2, 8, 50, trials=50), summary(2, 16, 0, 50)))
        assert not result.monotone_in_m()
        assert result.empirical_c0() == pytest.approx(8 / (2 * math.log(640)))

    def test_sweep_and_reports(self, small_config, tmp_path):
        result = run_phase_transition(small_config)
        assert [(c.sparsity, c.m) for c in result.cells] == [(1, 8), (1, 32), (2, 8), (2, 32)]
        assert all(c.trials == 3 and c.root_seed == 7 for c in result.cells)
        assert result.cell(1, 32).success_rate == 1.0

        rows = list(csv.reader(io.StringIO(render_report(result, "csv"))))
        assert tuple(rows[0]) == CellSummary.CSV_FIELDS
        assert len(rows) == 5

        path = emit_report(result, "json", report_path(tmp_path / "reports", "small"))
        loaded = load_report(path)
        assert loaded.config == small_config
        assert loaded.cells == result.cells
        assert list_reports(tmp_path / "reports") == ["small"]

    def test_worker_count_does_not_change_results(self, small_config):
        serial = run_phase_transition(small_config)
        parallel = run_phase_transition(small_config.with_overrides(workers=2))
        assert parallel.cells == serial.cells

    def test_report_errors(self, small_config, tmp_path):
        with pytest.raises(ConfigurationError):
            render_report(PhaseTransitionResult(config=small_config, cells=()), "json")
        with pytest.raises(ConfigurationError):
            report_path(tmp_path, "../escape")
        with pytest.raises(ConfigurationError):
            parse_report({"cells": []})
        assert list_reports(tmp_path / "missing") == []


def test_diagnostics_batch(small_config):
    config = small_config.with_overrides(diagnostics={"seeds": 6, "conditioning_m": [8, 16]})
    report = run_diagnostics(config)
    assert report["coherence"]["trials"] == 6
    assert [r["context"]["S"] for r in report["row_norm"]] == [1, 2]
    assert [p["m"] for p in report["conditioning"]["points"]] == [8, 16]
    rows = list(csv.reader(io.StringIO(render_diagnostics(report, "csv"))))
    assert len(rows) == 4
    assert json.loads(render_diagnostics(report, "json"))["n"] == 16


@pytest.mark.slow
def test_dense_pipeline_matches_matrix_free():
    config = ExperimentConfig(n=32, sparsity_grid=[3], m_grid=[20], trials_per_cell=40, root_seed=3)
    fast = run_phase_transition(config).cell(3, 20)
    dense = run_phase_transition(config.with_overrides(pipeline=Pipeline.DENSE)).cell(3, 20)
    stderr = math.hypot(fast.success_stderr, dense.success_stderr)
    assert abs(fast.success_rate - dense.success_rate) <= 3 * stderr + 1 / config.trials_per_cell


@pytest.mark.slow
def test_sample_complexity_scales_linearly_in_sparsity():
    config = ExperimentConfig(n=256, delta=0.1, sparsity_grid=[2, 4, 8], m_grid=[8, 16, 32, 64, 128, 256],
                              trials_per_cell=100, root_seed=2024, workers=4)
    result = run_phase_transition(config)
    assert result.monotone_in_m(sigmas=2.0)
    thresholds = result.thresholds()
    assert all(m_star is not None for m_star in thresholds.values()), thresholds
    assert thresholds[4] / thresholds[2] <= 2.6
    assert thresholds[8] / thresholds[4] <= 2.6
    for s, m_star in thresholds.items():
        assert m_star <= 8 * s * math.log(config.n / config.delta)
    assert result.empirical_c0() is not None
