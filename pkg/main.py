"""
greyplace command line.

    python main.py run --config data/experiments/desk.yaml [--out runs/desk] [--workers 4]
    python main.py replay --casas aruba/data --config data/experiments/aruba.yaml
    python main.py report --in runs/desk --convergence --heatmap --profile-iter 50
    python main.py validate --config data/experiments/t1.yaml

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from config import ConfigurationError, get_config
from services.harness import (
    build_reports,
    load_experiment_config,
    run_matrix,
    validate_scenario,
)
from utils.file_utils import ConfigFileError

logger = logging.getLogger("greyplace")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greyplace",
        description="Sensor placement search for activity recognition.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run an experiment matrix from a YAML config.")
    run.add_argument("--config", required=True, help="Path to the experiment YAML file.")
    run.add_argument("--out", default=None, help="Output directory (default: GREYPLACE_OUT_DIR/<name>).")
    run.add_argument("--workers", type=int, default=None, help="Parallel workers for batched queries.")

    replay = commands.add_parser("replay", help="Run an experiment on a recorded CASAS log.")
    replay.add_argument("--casas", required=True, help="Path to the CASAS event log.")
    replay.add_argument("--config", required=True, help="Path to the experiment YAML file.")
    replay.add_argument("--out", default=None, help="Output directory (default: GREYPLACE_OUT_DIR/<name>).")
    replay.add_argument("--workers", type=int, default=None, help="Parallel workers for batched queries.")

    report = commands.add_parser("report", help="Rebuild summaries and derived outputs of a run directory.")
    report.add_argument("--in", dest="in_dir", required=True, help="Run directory written by `run` or `replay`.")
    report.add_argument("--convergence", action="store_true", help="Write convergence.csv for DGBO/BO pairs.")
    report.add_argument("--heatmap", action="store_true", help="Write placement heatmaps (CSV + PGM).")
    report.add_argument("--profile-iter", type=int, default=None, help="Export DGBO expected-gain rasters at this iteration.")
    report.add_argument("--target", type=float, default=None, help="Explicit convergence target instead of the CI bound.")

    validate = commands.add_parser("validate", help="Check an experiment config and its scenario files.")
    validate.add_argument("--config", required=True, help="Path to the experiment YAML file.")
    return parser


def _out_dir(args, name: str) -> Path:
    return Path(args.out) if args.out else get_config().out_dir / name


def _workers(args) -> int:
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigurationError(f"--workers must be a positive integer, got {args.workers}")
        return args.workers
    return get_config().workers


def dispatch(args) -> None:
    if args.command == "run":
        config = load_experiment_config(args.config)
        summary = run_matrix(config, _out_dir(args, config.name), _workers(args))
        print(summary.to_string(index=False))
    elif args.command == "replay":
        config = load_experiment_config(args.config, casas=args.casas)
        summary = run_matrix(config, _out_dir(args, config.name), _workers(args))
        print(summary.to_string(index=False))
    elif args.command == "report":
        for path in build_reports(args.in_dir, args.convergence, args.heatmap, args.profile_iter, args.target):
            print(path)
    elif args.command == "validate":
        facts = validate_scenario(load_experiment_config(args.config))
        for key, value in facts.items():
            print(f"{key}: {value}")
        print("config OK")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = get_config()
        setup_logging(settings.log_level)
        dispatch(args)
    except (ConfigurationError, ConfigFileError) as e:
        logger.error("configuration error: %s", e)
        return EXIT_CONFIG
    except Exception as e:
        logger.exception("run failed: %s", e)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
