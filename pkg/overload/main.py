"""Overload fairness toolkit - command-line entry point.

Computes backlog growth rays of overloaded MaxWeight systems, checks and synthesizes
fairness-steering weights, and runs the simulations that reproduce the reference
experiments.
"""

import argparse
import asyncio
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from prometheus_client import REGISTRY, write_to_textfile

from . import __version__
from .api import commands
from .api.experiments import EXPERIMENTS, run_experiment
from .config import settings
from .core import metrics
from .core.errors import (
    BudgetExceededError,
    ConfigError,
    NumericalError,
    OverloadError,
    PreconditionError,
    SpecValidationError,
)
from .storage.schema import load_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2

CONFIG_COMMANDS = ("eta", "oracle", "feasible", "partition", "synth", "simulate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="overload", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default=None, help="logging level (default: settings.log_level)")
    parser.add_argument("--metrics", default=None, metavar="PATH", help="write Prometheus metrics here")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in CONFIG_COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, metavar="PATH")
        if name in ("eta", "oracle"):
            p.add_argument("--oracle-res", type=int, default=None, metavar="N")
        if name == "simulate":
            _add_run_flags(p)

    p = sub.add_parser("experiment")
    p.add_argument("name", choices=EXPERIMENTS)
    _add_run_flags(p)
    return parser


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--out", default=None, metavar="DIR")
    p.add_argument("--stride", type=int, default=None)


def render(result: Dict[str, Any]) -> str:
    """One ``key: value`` line per top-level field; nested values as compact JSON."""
    lines = []
    for key, value in result.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, separators=(", ", ": "))
        lines.append(f"{key}: {value}")
    return "\n".join(lines)


def dispatch(args: argparse.Namespace) -> Dict[str, Any]:
    if args.command == "experiment":
        return asyncio.run(
            run_experiment(args.name, seed=args.seed, horizon=args.horizon, out=args.out, stride=args.stride)
        )

    config = load_config(args.config)
    if args.command == "eta":
        return commands.cmd_eta(config, args.oracle_res)
    if args.command == "oracle":
        return commands.cmd_oracle(config, args.oracle_res)
    if args.command == "feasible":
        return commands.cmd_feasible(config)
    if args.command == "partition":
        return commands.cmd_partition(config)
    if args.command == "synth":
        return commands.cmd_synth(config)
    config = commands.apply_overrides(config, args.seed, args.horizon, args.out, args.stride)
    return asyncio.run(commands.cmd_simulate(config))


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    metrics.overload_info.info({"version": __version__})

    code = EXIT_OK
    try:
        print(render(dispatch(args)))
    except (ConfigError, SpecValidationError, PreconditionError, BudgetExceededError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        code = EXIT_INPUT
    except NumericalError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"numerical failure: {e}", file=sys.stderr)
        code = EXIT_NUMERICAL
    except OverloadError as e:
        logger.error(f"{type(e).__name__}: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        code = EXIT_NUMERICAL

    metrics_path = args.metrics or settings.metrics_path
    if metrics_path:
        write_to_textfile(metrics_path, REGISTRY)
        logger.info(f"Wrote metrics to {metrics_path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
