"""
Walrus Command Line
Main entry point for generating, solving and verifying Walrasian markets
"""

import argparse
import logging
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import config
from core.errors import BudgetExceededError, WalrusError
from commands import (
    bench_command,
    check_gs_command,
    gen_command,
    robust_command,
    solve_command,
    verify_command,
)

logger = logging.getLogger(__name__)

COMMANDS = (
    gen_command,
    solve_command,
    verify_command,
    robust_command,
    check_gs_command,
    bench_command,
)
LOG_FORMAT = "[%(levelname)s] %(message)s"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="walrus",
        description="Walrasian equilibrium toolkit: exact prices, allocations and certificates",
    )
    parser.add_argument(
        "--log-level",
        default=config.DEFAULT_LOG_LEVEL,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Shorthand for --log-level DEBUG")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def setup_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT, stream=sys.stderr, force=True)


def run_cli(argv=None) -> int:
    """
    Parse argv, run the subcommand and map the outcome to an exit code.

    Returns:
        0 on success, 2 on a verified negative outcome, 1 on errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    setup_logging("DEBUG" if args.verbose else args.log_level)

    try:
        return args.handler(args)
    except BudgetExceededError as exc:
        logger.error("Budget exceeded (%s): %s", exc.budget_name, exc)
        return 1
    except WalrusError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1
    except (ValueError, OSError) as exc:
        logger.error("%s", exc)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
