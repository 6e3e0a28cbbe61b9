import json
from pathlib import Path

from fastmcp import Context, FastMCP
from fastmcp.exceptions import ResourceError

from ..harness.report import list_reports, load_report, report_path
from ..sensing.errors import SensingError


def register_resources(mcp: FastMCP, reports_dir: str | Path = "data/reports"):
    reports_dir = Path(reports_dir)

    @mcp.resource(
        uri="data://reports",
        name="ReportIndex",
        description="Names of the stored phase-transition reports",
        mime_type="application/json"
    )
    async def report_index(ctx: Context) -> dict:
        """List the reports written by the run_phase_transition tool.

        Returns:
            Dictionary containing:
            - reports: Array of report names, usable in data://reports/{report_name}

        Note: Returns an empty array when no report has been stored yet.
        """
        names = list_reports(reports_dir)
        await ctx.info(f"Found {len(names)} stored reports")
        return {"reports": names}

    async def _read(report_name: str, ctx: Context):
        try:
            path = report_path(reports_dir, report_name)
        except SensingError as e:
            await ctx.error(str(e))
            raise ResourceError(str(e))
        if not path.exists():
            await ctx.warning(f"No report named {report_name}")
            raise ResourceError(f"Report '{report_name}' not found")
        return path

    @mcp.resource(
        uri="data://reports/{report_name}",
        name="Report",
        description="A stored phase-transition report",
        mime_type="application/json"
    )
    async def get_report(report_name: str, ctx: Context) -> dict:
        """Retrieve one stored report: the embedded config, every cell summary and the calibration.

        Access pattern: data://reports/{report_name}
        Example: data://reports/n256-baseline

        The schema matches the JSON written by `cs phase --format json`.
        """
        path = await _read(report_name, ctx)
        await ctx.debug(f"Reading report {path}")
        return json.loads(path.read_text(encoding="utf-8"))

    @mcp.resource(
        uri="data://reports/{report_name}/calibration",
        name="ReportCalibration",
        description="Calibrated thresholds m*(S) and empirical C0 of a stored report",
        mime_type="application/json"
    )
    async def get_calibration(report_name: str, ctx: Context) -> dict:
        """Recompute the calibration of a stored report.

        m*(S) is the smallest grid m whose success rate reaches 0.9, and the empirical
        C0 is the largest m*(S) / (S log(n/delta)) over the sparsities that reach it.

        Returns:
            Dictionary containing:
            - n, delta: Sweep parameters
            - thresholds: m*(S) keyed by S (null when no grid m reaches 0.9)
            - empirical_c0: Calibrated constant, null when no S reaches 0.9
            - monotone: Whether success rates are non-decreasing in m within 2 standard errors
        """
        path = await _read(report_name, ctx)
        try:
            result = load_report(path)
        except (SensingError, ValueError) as e:
            await ctx.error(f"Report {report_name} is malformed: {str(e)}")
            raise ResourceError(f"Malformed report: {str(e)}")
        calibration = result.calibration()
        return {
            "n": result.config.n,
            "delta": result.config.delta,
            "thresholds": calibration["thresholds"],
            "empirical_c0": calibration["empirical_c0"],
            "monotone": result.monotone_in_m(),
        }
