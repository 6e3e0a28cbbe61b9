from pathlib import Path

import numpy as np
from anyio import to_thread
from fastmcp import Context, FastMCP
from fastmcp.exceptions import ToolError
from pydantic import ValidationError

from ..harness.config import ExperimentConfig
from ..harness.engine import PhaseTransitionResult, build_instance, iter_phase_cells, solve_instance
from ..harness.report import emit_report, list_reports, report_path
from ..sensing.bases import BasisKind
from ..sensing.diagnostics import coherence_sweep, row_norm_sweep
from ..sensing.errors import SensingError
from ..sensing.filters import FilterDistribution, FilterKind, sample_filter as draw_filter
from ..sensing.measurement import BranchMode, MaskModel
from ..sensing.recovery import dual_certificate

TOOL_ERRORS = (SensingError, ValidationError, OSError, np.linalg.LinAlgError)


def _instance_config(n: int, sparsity: int, m: int, branch_mode: BranchMode, mask_model: MaskModel,
                     basis_kind: BasisKind) -> ExperimentConfig:
    return ExperimentConfig(n=n, sparsity_grid=[sparsity], m_grid=[m], branch_mode=branch_mode,
                            mask_model=mask_model, basis_kind=basis_kind)


def register_tools(mcp: FastMCP, reports_dir: str | Path = "data/reports"):
    reports_dir = Path(reports_dir)

    @mcp.tool(
        name="sample_filter",
        description="Draw a seeded random filter and dump its taps",
        tags={"filter", "sampling"}
    )
    async def sample_filter(n: int, ctx: Context, kind: FilterKind = FilterKind.GAUSSIAN,
                            scale: float | None = None, seed: int = 0) -> dict:
        """Draw the taps of a random FIR filter of length n.

        Taps are i.i.d. with the chosen law (gaussian, bernoulli or uniform) and
        variance scale^2, default scale 1/sqrt(n) so every frequency carries unit
        expected power. The same (n, kind, scale, seed) always yields the same taps.

        Args:
            n: Filter length, a power of two >= 4
            kind: Tap distribution, one of gaussian, bernoulli, uniform
            scale: Tap standard deviation (default 1/sqrt(n))
            seed: Seed of the draw

        Returns:
            Dictionary with n, distribution, seed and taps (full-precision floats), plus
            spectrum checks: the largest violation of the real-filter spectral symmetries
            and the mean spectral power.

        Example usage:
            - Inspect one filter before running measure_signal on the same seed
            - Compare bernoulli and gaussian tap laws at the same n
        """
        await ctx.info(f"Sampling {kind} filter of length {n} with seed {seed}")
        try:
            random_filter = draw_filter(n, FilterDistribution(kind=kind, scale=scale), seed)
        except TOOL_ERRORS as e:
            await ctx.error(f"Filter sampling failed: {str(e)}")
            raise ToolError(f"Filter error: {str(e)}")
        spectrum = random_filter.spectrum
        return {
            **random_filter.to_dict(),
            "spectrum": {
                "symmetry_deviation": random_filter.symmetry_deviation(),
                "mean_power": float(np.mean(np.abs(spectrum) ** 2)),
            },
        }

    @mcp.tool(
        name="measure_signal",
        description="Measure a random sparse signal through a subsampled random filter",
        tags={"measurement"}
    )
    async def measure_signal(n: int, sparsity: int, m: int, ctx: Context, seed: int = 0,
                             branch_mode: BranchMode = BranchMode.DUAL_BRANCH,
                             mask_model: MaskModel = MaskModel.UNIFORM_SET,
                             basis_kind: BasisKind = BasisKind.IDENTITY) -> dict:
        """Sample a filter, a row mask and an S-sparse signal from one seed, then measure.

        The dual_branch operator stacks the circulant filter H over sqrt(n) I and keeps
        m of its 2n rows; convolution_only keeps m of the n rows of H. Under the
        bernoulli mask model the number of kept rows is itself random.

        Args:
            n: Signal length, a power of two >= 4
            sparsity: Number of nonzero coefficients S in the chosen basis
            m: Target number of measurements
            seed: Instance seed; recover_signal and certify_instance with the same
                arguments rebuild exactly this instance
            branch_mode: convolution_only or dual_branch
            mask_model: uniform_set or bernoulli
            basis_kind: identity, dct or haar

        Returns:
            Dictionary with support, coefficients on the support, kept row indices,
            realized_m and the measurement vector.
        """
        await ctx.info(f"Measuring S={sparsity} signal with m={m} of n={n}")
        try:
            config = _instance_config(n, sparsity, m, branch_mode, mask_model, basis_kind)
            instance = build_instance(config, (sparsity, m), seed)
        except TOOL_ERRORS as e:
            await ctx.error(f"Measurement failed: {str(e)}")
            raise ToolError(f"Measurement error: {str(e)}")
        signal = instance.signal
        return {
            "n": n,
            "seed": seed,
            "support": signal.support.tolist(),
            "coefficients": signal.coefficients[signal.support].tolist(),
            "kept": instance.operator.mask.kept.tolist(),
            "realized_m": instance.operator.realized_m,
            "measurements": instance.measurements.tolist(),
        }

    @mcp.tool(
        name="recover_signal",
        description="Recover a measured sparse signal by basis pursuit",
        tags={"recovery"}
    )
    async def recover_signal(n: int, sparsity: int, m: int, ctx: Context, seed: int = 0,
                             branch_mode: BranchMode = BranchMode.DUAL_BRANCH,
                             mask_model: MaskModel = MaskModel.UNIFORM_SET,
                             basis_kind: BasisKind = BasisKind.IDENTITY) -> dict:
        """Rebuild the measure_signal instance for these arguments and decode it.

        Solves min ||alpha||_1 subject to A alpha = y matrix-free. Non-convergence is
        reported in the result, not raised.

        Returns:
            Dictionary with the solution, residual_norm, l1_value, iterations,
            converged, support_exact, duality_gap, polished and the coefficient error
            against the true coefficients.
        """
        await ctx.info(f"Recovering S={sparsity} signal from m={m} measurements")
        try:
            config = _instance_config(n, sparsity, m, branch_mode, mask_model, basis_kind)
            instance = build_instance(config, (sparsity, m), seed)
            result, _ = solve_instance(config, instance)
        except TOOL_ERRORS as e:
            await ctx.error(f"Recovery failed: {str(e)}")
            raise ToolError(f"Recovery error: {str(e)}")
        if not result.converged:
            await ctx.warning(f"Solver stopped after {result.iterations} iterations without converging")
        return {**result.to_dict(), "coefficient_error": result.coefficient_error(instance.signal.coefficients)}

    @mcp.tool(
        name="certify_instance",
        description="Evaluate the exact-recovery dual certificate of one instance",
        tags={"recovery", "certificate"}
    )
    async def certify_instance(n: int, sparsity: int, m: int, ctx: Context, seed: int = 0,
                               branch_mode: BranchMode = BranchMode.DUAL_BRANCH,
                               mask_model: MaskModel = MaskModel.UNIFORM_SET,
                               basis_kind: BasisKind = BasisKind.IDENTITY,
                               alpha_threshold: float = 0.5) -> dict:
        """Compute pi(gamma) off the support for the measure_signal instance.

        The instance is certified when Phi restricted to the support has full column
        rank and every |pi(gamma)| is below alpha_threshold. A certified instance is
        recovered exactly by basis pursuit.

        Returns:
            Dictionary with full_rank, inverse_norm, max_pi, certified, realized_m,
            bounded_inverse and the pi value of every off-support index.
        """
        await ctx.info(f"Certifying S={sparsity}, m={m} instance with threshold {alpha_threshold}")
        try:
            config = _instance_config(n, sparsity, m, branch_mode, mask_model, basis_kind)
            instance = build_instance(config, (sparsity, m), seed)
            report = dual_certificate(instance.operator, instance.basis, instance.signal, alpha_threshold)
        except TOOL_ERRORS as e:
            await ctx.error(f"Certificate failed: {str(e)}")
            raise ToolError(f"Certificate error: {str(e)}")
        return {"support": instance.signal.support.tolist(), **report.to_dict()}

    @mcp.tool(
        name="run_diagnostics",
        description="Coherence and row-norm bound sweeps over seeded filters",
        tags={"diagnostics", "analysis"}
    )
    async def run_diagnostics(n: int, sparsity: int, ctx: Context, seeds: int = 100, delta: float = 0.1,
                              basis_kind: BasisKind = BasisKind.IDENTITY, seed: int = 0) -> dict:
        """Measure coherence and support row norms against their bounds over many filters.

        Each bound holds with probability exceeding 1 - delta, so the sweep reports
        the violation rate with its binomial standard error instead of per-seed
        verdicts. holds is true when the rate stays within delta + 3 standard errors.

        Args:
            n: Signal length, a power of two >= 4
            sparsity: Support size S for the row-norm bound sqrt(8 S)
            seeds: Number of filters to draw
            delta: Failure probability in both bounds
            basis_kind: identity, dct or haar
            seed: Root seed of the sweep

        Returns:
            Dictionary with coherence and row_norm sweep summaries.
        """
        await ctx.info(f"Running diagnostics at n={n} over {seeds} seeds")
        await ctx.report_progress(progress=0, total=100)
        try:
            dist = FilterDistribution()
            coherence = (await to_thread.run_sync(
                coherence_sweep, dist, n, delta, seeds, seed, basis_kind)).to_dict()
            await ctx.report_progress(progress=50, total=100)
            row_norm = (await to_thread.run_sync(
                row_norm_sweep, dist, n, sparsity, delta, seeds, seed, basis_kind)).to_dict()
        except TOOL_ERRORS as e:
            await ctx.error(f"Diagnostics failed: {str(e)}")
            raise ToolError(f"Diagnostics error: {str(e)}")
        await ctx.report_progress(progress=100, total=100)
        for sweep in (coherence, row_norm):
            if not sweep["holds"]:
                await ctx.warning(f"{sweep['name']} violation rate {sweep['rate']:.3f} exceeds its tolerance")
        return {"coherence": coherence, "row_norm": row_norm}

    @mcp.tool(
        name="run_phase_transition",
        description="Run a phase-transition sweep and store the report",
        tags={"experiment", "storage"}
    )
    async def run_phase_transition(config: ExperimentConfig, report_name: str, ctx: Context) -> dict:
        """Run every (S, m) cell of the grid and store the JSON report.

        Each cell runs trials_per_cell seeded trials; a trial succeeds when basis
        pursuit converges to the true support with relative coefficient error at most
        1e-6. Progress is reported once per cell. The report is stored as
        data/reports/<report_name>.json and can be read back through the
        data://reports/{report_name} resource.

        Args:
            config: Experiment configuration (n, sparsity_grid, m_grid, trials_per_cell, ...)
            report_name: Letters, digits, '-' and '_' only

        Returns:
            Dictionary with report_name, the per-cell summaries and the calibration
            (threshold m*(S) per S and the empirical C0).

        Example usage:
            - Small grids first (trials_per_cell around 20) to locate the transition
            - Follow up with the phase_transition_analysis prompt
        """
        cells = config.cells()
        await ctx.info(f"Starting phase sweep over {len(cells)} cells")
        await ctx.report_progress(progress=0, total=len(cells))
        summaries = []
        try:
            # each cell runs in a worker thread
            pending = iter_phase_cells(config)
            for i in range(len(cells)):
                summary = await to_thread.run_sync(next, pending)
                summaries.append(summary)
                await ctx.debug(f"cell S={summary.sparsity} m={summary.m}: success {summary.success_rate:.2f}")
                await ctx.report_progress(progress=i + 1, total=len(cells))
            result = PhaseTransitionResult(config=config, cells=tuple(summaries))
            path = emit_report(result, "json", report_path(reports_dir, report_name))
        except TOOL_ERRORS as e:
            await ctx.error(f"Phase sweep failed: {str(e)}")
            raise ToolError(f"Phase sweep error: {str(e)}")
        await ctx.info(f"Report stored at {path}")
        return {
            "report_name": report_name,
            "cells": [c.to_dict() for c in result.cells],
            "calibration": result.calibration(),
        }

    @mcp.tool(
        name="get_report_count",
        description="Get the number of stored experiment reports"
    )
    async def get_report_count(ctx: Context) -> int:
        """Count the reports stored by run_phase_transition (0 when none exist)."""
        count = len(list_reports(reports_dir))
        await ctx.info(f"Report count retrieved: {count}")
        return count
