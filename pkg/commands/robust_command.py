"""
Robust Command
Computes robust Walrasian prices, or a zero-cycle witness when the optimum is not unique
"""

import argparse
import logging
import sys

from solvers.combinatorial import solve_welfare_incremental
from solvers.robust_prices import compute_robust_prices, find_allocation_by_isolation
from utils.formats import allocation_to_json, dumps_canonical, load_instance, write_json
from verification.brute_force import brute_force_welfare

logger = logging.getLogger(__name__)

SOURCES = ("combinatorial", "brute-force")


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("robust", help="Compute robust Walrasian prices")
    parser.add_argument("instance", help="Instance file")
    parser.add_argument(
        "--source", choices=SOURCES, default="combinatorial",
        help="Where the optimal allocation comes from",
    )
    parser.add_argument(
        "--isolation", action="store_true",
        help="Also recover an optimal allocation through the randomized isolation pipeline",
    )
    parser.add_argument("--seed", type=int, default=0, help="Isolation seed")
    parser.add_argument("--attempts", type=int, default=3, help="Isolation attempts")
    parser.add_argument("-o", "--output", help="Report file to write (stdout when omitted)")
    parser.set_defaults(handler=run)
    return parser


def _optimal_allocation(instance, source: str):
    if source == "brute-force":
        return brute_force_welfare(instance).allocations[0]
    return solve_welfare_incremental(instance, audit="final").certificate.allocation


def run(args) -> int:
    instance = load_instance(args.instance)
    allocation = _optimal_allocation(instance, args.source)
    report = compute_robust_prices(instance, allocation)
    data = {"allocation": allocation_to_json(allocation), "robust": report.to_dict()}

    isolation = None
    if args.isolation:
        isolation = find_allocation_by_isolation(instance, seed=args.seed, attempts=args.attempts)
        data["isolation"] = isolation.to_dict()

    if args.output:
        write_json(data, args.output)
        logger.info("Wrote robust price report to %s", args.output)
    else:
        sys.stdout.write(dumps_canonical(data))

    if isolation is not None and not isolation.success:
        logger.error("Isolation pipeline failed: %s", "; ".join(isolation.failures))
        return 1
    if not report.exists:
        logger.info("No robust prices: zero-weight cycle %s", list(report.witness_cycle))
        return 2
    return 0
