"""CSV and JSON emission of sweep results, and reloading of JSON reports."""

import csv
import io
import json
import re
from pathlib import Path

from fastmcp.utilities.logging import get_logger

from ..sensing.errors import ConfigurationError
from .config import ExperimentConfig, OutputFormat
from .engine import CellSummary, PhaseTransitionResult

logger = get_logger(__name__)

REPORT_NAME = re.compile(r"^[A-Za-z0-9_-]+$")
DIAGNOSTIC_FIELDS = ("name", "n", "S", "trials", "violations", "rate", "stderr", "tolerance", "holds")


def report_dict(result: PhaseTransitionResult) -> dict:
    return {
        "config": result.config.model_dump(mode="json"),
        "cells": [c.to_dict() for c in result.cells],
        "calibration": result.calibration(),
    }


def _csv_text(header: tuple[str, ...], rows: list[list]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def render_report(result: PhaseTransitionResult, format: OutputFormat | str) -> str:
    """CSV has exactly the nine summary columns; JSON adds the config and calibration."""
    if not result.cells:
        raise ConfigurationError("cannot emit an empty result grid")
    if OutputFormat(format) is OutputFormat.CSV:
        return _csv_text(CellSummary.CSV_FIELDS, [c.csv_row() for c in result.cells])
    return json.dumps(report_dict(result), indent=2) + "\n"


def write_text(text: str, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def emit_report(result: PhaseTransitionResult, format: OutputFormat | str, path: str | Path) -> Path:
    path = write_text(render_report(result, format), path)
    logger.info("wrote %d cells to %s", len(result.cells), path)
    return path


def parse_report(data: dict) -> PhaseTransitionResult:
    try:
        config = ExperimentConfig.model_validate(data["config"])
        cells = tuple(CellSummary.from_dict(c) for c in data["cells"])
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed report: {exc}") from exc
    return PhaseTransitionResult(config=config, cells=cells)


def load_report(path: str | Path) -> PhaseTransitionResult:
    return parse_report(json.loads(Path(path).read_text(encoding="utf-8")))


def render_diagnostics(report: dict, format: OutputFormat | str) -> str:
    """JSON dump of a diagnostics batch, or one CSV row per bound sweep."""
    if OutputFormat(format) is OutputFormat.JSON:
        return json.dumps(report, indent=2) + "\n"
    rows = [
        [s["name"], s["n"], s["context"].get("S", ""), s["trials"], s["violations"], s["rate"], s["stderr"],
         s["tolerance"], s["holds"]]
        for s in [report["coherence"], *report["row_norm"]]
    ]
    return _csv_text(DIAGNOSTIC_FIELDS, rows)


def is_report_name(name: str) -> bool:
    return bool(REPORT_NAME.fullmatch(name))


def report_path(directory: str | Path, name: str) -> Path:
    """Location of report ``name`` in ``directory``; only plain identifiers are accepted."""
    if not is_report_name(name):
        raise ConfigurationError(f"report name {name!r} must use letters, digits, '-' or '_' only")
    return Path(directory) / f"{name}.json"


def list_reports(directory: str | Path) -> list[str]:
    directory = Path(directory)
    if not directory.is_dir():
        return []
    return sorted(p.stem for p in directory.glob("*.json") if is_report_name(p.stem))
