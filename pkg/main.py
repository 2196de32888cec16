# Quantum measurement postulates - experiment runner
import argparse
import logging
import sys
from typing import List, NamedTuple, Optional

from app import __version__
from app.config.experiment import ExperimentConfig, build_config
from app.errors import ConfigError, QmeasError
from app.services.experiments import execute
from logger_config import setup_logger
from output_manager import OutputManager
from timing_metrics import TimingMetrics

logger = logging.getLogger("main")

EXPERIMENTS = {
    "epr-demo": "Lüders vs von Neumann on an entangled two-system state",
    "postulate-compare": "Selective and nonselective updates under both postulates",
    "chsh": "Analytic and sampled CHSH correlations",
    "window-sweep": "Event-based coincidence simulation swept over time windows",
    "condprob": "Conditional probabilities in both directions",
}

LOGGER_NAMES = ("app", "main", "output_manager", "timing_metrics")


class ExperimentRun(NamedTuple):
    exit_code: int
    report_paths: List[str]


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    default = argparse.SUPPRESS if suppress else None
    flags = argparse.ArgumentParser(add_help=False)
    flags.add_argument("--seed", type=int, default=default, help="Master seed (>= 0)")
    flags.add_argument("--config", default=default, help="YAML experiment config file")
    flags.add_argument("--out", default=default, help="Report path (overrides output_path)")
    flags.add_argument("--format", choices=["json", "csv"], default=default, help="Report format")
    flags.add_argument("--log-level", default=default, help="Logging level (default LOG_LEVEL)")
    flags.add_argument("--log-file", default=default, help="Rotating log file (default LOG_FILE)")
    return flags


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmeas",
        description="Measurement postulates, EPR and CHSH experiments",
        parents=[_global_flags(suppress=False)],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="experiment", metavar="EXPERIMENT")
    subparsers.required = True
    for name, help_text in EXPERIMENTS.items():
        subparsers.add_parser(name, help=help_text, parents=[_global_flags(suppress=True)])
    return parser


def _report_error(error: QmeasError) -> int:
    print(error.as_line(), file=sys.stderr)
    return error.exit_code


def run_experiment(
    config: ExperimentConfig,
    manager: Optional[OutputManager] = None,
    timing: Optional[TimingMetrics] = None,
) -> ExperimentRun:
    """
    Run a validated experiment and write its report.

    Returns:
        ExperimentRun with exit code 0 and the written paths, or the error's
        exit code and no paths
    """
    manager = manager or OutputManager()
    timing = timing or TimingMetrics(config.experiment)
    timing.start_run()
    try:
        with timing.phase("compute"):
            result = execute(config)
        with timing.phase("write"):
            manager.emit(result, config.report_format, config.output_path)
    except QmeasError as e:
        logger.debug(f"{config.experiment} failed", exc_info=True)
        return ExperimentRun(_report_error(e), [])
    finally:
        timing.end_run()
    return ExperimentRun(0, list(manager.written))


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        for name in LOGGER_NAMES:
            setup_logger(name, log_file=args.log_file, level=args.log_level)
    except (ValueError, OSError) as e:
        return _report_error(ConfigError(f"Logging setup failed: {e}"))

    try:
        config = build_config(
            experiment=args.experiment,
            config_path=args.config,
            overrides={"seed": args.seed, "output_path": args.out, "format": args.format},
        )
    except QmeasError as e:
        return _report_error(e)

    logger.info(f"Running {config.experiment} with seed {config.seed}")
    run = run_experiment(config)
    for path in run.report_paths:
        print(path)
    return run.exit_code


if __name__ == "__main__":
    sys.exit(main())
