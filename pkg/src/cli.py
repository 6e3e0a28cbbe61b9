"""Command-line front end: ``cs <subcommand> --config <path> [--seed N] [--out <path>] [--format csv|json]``.

Exit codes: 0 on success, 1 on a configuration error, 2 on an I/O error.
"""

import argparse
import json
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np
from fastmcp.utilities.logging import configure_logging, get_logger
from pydantic import ValidationError

from .harness.config import ExperimentConfig, OutputFormat
from .harness.engine import build_instance, run_diagnostics, run_phase_transition, run_trial
from .harness.report import render_diagnostics, render_report, write_text
from .sensing.errors import ConfigurationError, SensingError
from .sensing.filters import sample_filter
from .sensing.recovery import dual_certificate
from .sensing.seeding import STREAM_FILTER, derive_seed

logger = get_logger("cli")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON experiment config")
    common.add_argument("--seed", type=int, default=None, help="root seed (overrides the config)")
    common.add_argument("--out", type=Path, default=None, help="output file (stdout when omitted)")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], default=None,
                        help="output format for phase and diagnose")
    common.add_argument("--workers", type=int, default=None, help="worker processes for sweeps")
    common.add_argument("--log-level", type=str.upper, default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"], help="logging level")

    instance = argparse.ArgumentParser(add_help=False)
    instance.add_argument("--sparsity", type=int, default=None, help="S (default: first grid value)")
    instance.add_argument("-m", "--measurements", type=int, default=None, help="m (default: first grid value)")

    parser = argparse.ArgumentParser(prog="cs", description="Random-filter compressive sensing experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("filter", parents=[common], help="sample a filter and dump its taps")
    sub.add_parser("measure", parents=[common, instance], help="measure one sparse signal")
    sub.add_parser("recover", parents=[common, instance], help="measure and decode one instance")
    sub.add_parser("certify", parents=[common, instance], help="evaluate the dual certificate of one instance")
    sub.add_parser("diagnose", parents=[common], help="coherence, row-norm and conditioning batches")
    sub.add_parser("phase", parents=[common], help="full phase-transition sweep")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_json_file(args.config) if args.config else ExperimentConfig()
    return config.with_overrides(root_seed=args.seed, workers=args.workers, output_path=args.out,
                                 output_format=args.format)


def _cell(config: ExperimentConfig, args: argparse.Namespace) -> tuple[int, int]:
    sparsity = args.sparsity if args.sparsity is not None else config.sparsity_grid[0]
    m = args.measurements if args.measurements is not None else config.m_grid[0]
    if not 1 <= sparsity <= config.n or not 1 <= m <= config.total_rows:
        raise ConfigurationError(f"cell (S={sparsity}, m={m}) is outside the configured dimensions")
    return sparsity, m


def _emit(text: str, config: ExperimentConfig) -> None:
    if config.output_path is None:
        sys.stdout.write(text)
        return
    write_text(text, config.output_path)
    logger.info("wrote %s", config.output_path)


def _json(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _single_instance_json(config: ExperimentConfig) -> None:
    if config.output_format is OutputFormat.CSV:
        raise ConfigurationError("csv output is available for the phase and diagnose commands only")


def cmd_filter(config: ExperimentConfig, args: argparse.Namespace) -> dict:
    random_filter = sample_filter(config.n, config.filter.distribution(),
                                  derive_seed(config.root_seed, STREAM_FILTER))
    return random_filter.to_dict()


def cmd_measure(config: ExperimentConfig, args: argparse.Namespace) -> dict:
    instance = build_instance(config, _cell(config, args), config.root_seed)
    return {
        "n": config.n,
        "seed": config.root_seed,
        "support": instance.signal.support.tolist(),
        "coefficients": instance.signal.coefficients[instance.signal.support].tolist(),
        "kept": instance.operator.mask.kept.tolist(),
        "measurements": instance.measurements.tolist(),
    }


def cmd_recover(config: ExperimentConfig, args: argparse.Namespace) -> dict:
    return run_trial(config, _cell(config, args), config.root_seed).to_dict()


def cmd_certify(config: ExperimentConfig, args: argparse.Namespace) -> dict:
    instance = build_instance(config, _cell(config, args), config.root_seed)
    report = dual_certificate(instance.operator, instance.basis, instance.signal, config.alpha_threshold)
    return {"seed": config.root_seed, "support": instance.signal.support.tolist(), **report.to_dict()}


INSTANCE_COMMANDS = {
    "filter": cmd_filter,
    "measure": cmd_measure,
    "recover": cmd_recover,
    "certify": cmd_certify,
}


def dispatch(args: argparse.Namespace) -> None:
    config = load_config(args)
    if args.command == "phase":
        _emit(render_report(run_phase_transition(config), config.output_format), config)
    elif args.command == "diagnose":
        _emit(render_diagnostics(run_diagnostics(config), config.output_format), config)
    else:
        _single_instance_json(config)
        _emit(_json(INSTANCE_COMMANDS[args.command](config, args)), config)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 after --help
        return EXIT_OK if not exc.code else EXIT_CONFIG
    configure_logging(level=args.log_level)
    try:
        dispatch(args)
    except (SensingError, ValidationError, np.linalg.LinAlgError) as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO
    except ValueError as exc:
        # malformed JSON and out-of-range enum values in overrides
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
