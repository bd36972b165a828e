# SPDX-License-Identifier: GPL-3.0-only
"""
Точка входа nharmonic-lab: подкоманды совпадают с именами экспериментов.
Значения из файла --config имеют приоритет над флагами командной строки.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Sequence

import jsonschema

from src.core.errors import LabError
from src.interfaces.experiments import RECIPES, run_experiment
from src.utils.config_loader import ConfigLoader

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nharmonic-lab",
        description="Numerical lab for the n-harmonic map heat flow.",
    )
    parser.add_argument("experiment", choices=sorted(RECIPES), help="experiment recipe")
    parser.add_argument("--config", default=None, help="YAML file merged over the defaults")
    parser.add_argument("--out", default=None, help="artifact directory")
    parser.add_argument("--seed", type=int, default=None, help="seed for randomized checks")
    parser.add_argument("--jobs", type=int, default=None, help="sweep workers (0 = all CPUs)")
    parser.add_argument(
        "--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"]
    )
    return parser


def flag_overrides(args: argparse.Namespace) -> dict[str, Any]:
    experiment: dict[str, Any] = {"name": args.experiment}
    if args.out is not None:
        experiment["out"] = args.out
    if args.seed is not None:
        experiment["seed"] = args.seed
    if args.jobs is not None:
        experiment["jobs"] = args.jobs
    overrides: dict[str, Any] = {"experiment": experiment}
    if args.log_level is not None:
        overrides["logging"] = {"level": args.log_level}
    return overrides


def _diagnostic(exc: BaseException) -> None:
    message = exc.message if isinstance(exc, jsonschema.ValidationError) else str(exc)
    print(json.dumps({"error": type(exc).__name__, "message": message}), file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ConfigLoader.load(args.config, flag_overrides(args))
        # подкоманда сильнее имени эксперимента из файла
        config["experiment"]["name"] = args.experiment
        logging.basicConfig(level=config["logging"]["level"], format=LOG_FORMAT, force=True)
        return run_experiment(config)
    except (LabError, jsonschema.ValidationError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        _diagnostic(exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
