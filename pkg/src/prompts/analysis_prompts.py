import json

from fastmcp import Context, FastMCP


def register_prompts(mcp: FastMCP):
    @mcp.prompt(
        name="experiment_design_assistant",
        description="Template for planning random-filter sensing experiments"
    )
    async def experiment_design_assistant(ctx: Context) -> str:
        """Generate an assistant prompt describing the tools, resources and the usual workflow.

        The prompt includes the number of stored reports so the assistant knows
        whether earlier sweeps can be reused.
        """
        await ctx.info("Generating experiment design prompt")
        try:
            index = await ctx.read_resource("data://reports")
            reports = json.loads(index[0].content).get("reports", [])
        except Exception:
            reports = []
            await ctx.warning("Could not retrieve the report index")

        return f"""
        You are an assistant that helps design compressive sensing experiments with random filters.
        A length-n signal, sparse in an orthonormal basis, is convolved with a random filter,
        optionally stacked with its own samples, and m of the resulting rows are kept.
        Recovery is by l1 minimization (basis pursuit).

        Stored reports: {len(reports)} ({", ".join(reports) if reports else "none"})

        Available tools:
        - sample_filter: Draw and dump a seeded random filter
        - measure_signal: Measure one seeded sparse signal
        - recover_signal: Decode the same instance by basis pursuit
        - certify_instance: Evaluate the dual certificate (certified instances are recovered exactly)
        - run_diagnostics: Coherence and row-norm bound violation rates over many seeds
        - run_phase_transition: Sweep an (S, m) grid and store the report
        - get_report_count: Number of stored reports

        Available resources:
        - data://reports: Names of stored reports
        - data://reports/{{report_name}}: A stored report
        - data://reports/{{report_name}}/calibration: Thresholds m*(S) and the empirical C0

        Usual workflow: check a single instance with measure_signal, recover_signal and
        certify_instance; confirm the bounds with run_diagnostics; then sweep a small grid
        with run_phase_transition and refine the m range around the transition.
        Logarithms are natural throughout.
        """

    @mcp.prompt(
        name="phase_transition_analysis",
        description="Template for interpreting a stored phase-transition report"
    )
    async def phase_transition_analysis(report_name: str, ctx: Context) -> str:
        """Generate a prompt asking for an interpretation of one stored report.

        Args:
            report_name: Name of a report stored by run_phase_transition

        The prompt embeds the calibration of the report when it can be read and
        asks whether the threshold m*(S) grows like S log(n/delta).
        """
        await ctx.info(f"Generating analysis prompt for report {report_name}")
        try:
            contents = await ctx.read_resource(f"data://reports/{report_name}/calibration")
            calibration = json.loads(contents[0].content)
        except Exception:
            calibration = {}
            await ctx.warning(f"Could not read the calibration of {report_name}")

        context = ""
        if calibration:
            context = f"\n\nCalibration: {json.dumps(calibration)}"

        return f"""
        Please analyze the phase-transition report '{report_name}'.

        Use the data://reports/{report_name} resource for the per-cell success rates.
        Check whether success is monotone in m at fixed S, whether the 90% threshold m*(S)
        roughly doubles when S doubles, and how the empirical C0 compares with the
        reference gate c0 S log(n/delta).
        {context}
        """
