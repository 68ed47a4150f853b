"""
Solve Command
Runs one of the price solvers and writes a verified result file
"""

import argparse
import logging
import sys
from contextlib import nullcontext

from core.errors import BudgetExceededError
from solvers.combinatorial import AUDIT_MODES, solve_welfare_incremental
from solvers.cutting_plane import solve_walrasian_prices
from utils.formats import dumps_canonical, load_instance, result_to_json, write_json
from utils.trace import TraceWriter
from verification.brute_force import walrasian_membership

logger = logging.getLogger(__name__)

# CLI spelling -> solver name
ALGORITHMS = {
    "combinatorial": "combinatorial",
    "ellipsoid-gs": "ellipsoid_gs",
    "ellipsoid-gs-regularized": "ellipsoid_gs_regularized",
    "ellipsoid-general": "ellipsoid_general",
}


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("solve", help="Compute Walrasian prices and an allocation")
    parser.add_argument("instance", help="Instance file")
    parser.add_argument("--algorithm", choices=sorted(ALGORITHMS), default="combinatorial")
    parser.add_argument("--seed", type=int, default=0, help="Perturbation seed (ellipsoid-general)")
    parser.add_argument("--retry-cap", type=int, default=None, help="Ellipsoid attempts before giving up")
    parser.add_argument("--trace", help="Write a JSON-lines phase/iteration trace here")
    parser.add_argument(
        "--random-order", type=int, default=None, metavar="SEED",
        help="Insert items in a seeded random order (combinatorial)",
    )
    parser.add_argument("--audit", choices=AUDIT_MODES, default="every_phase")
    parser.add_argument("-o", "--output", help="Result file to write (stdout when omitted)")
    parser.set_defaults(handler=run)
    return parser


def _verify(instance, report):
    """
    In-process membership check of the certified pair.

    Returns:
        (verified, rejected); both False when the check exceeds the budget
    """
    if report.certificate is None:
        return False, False
    try:
        verdict = walrasian_membership(instance, report.certificate.prices, report.certificate.allocation)
    except BudgetExceededError as exc:
        logger.warning("Result not verified: %s", exc)
        return False, False
    if not verdict.member:
        logger.error("Certified result failed membership: %s %s", verdict.condition, verdict.detail)
    return verdict.member, not verdict.member


def run(args) -> int:
    instance = load_instance(args.instance)
    algorithm = ALGORITHMS[args.algorithm]

    with (TraceWriter(args.trace) if args.trace else nullcontext()) as trace:
        if algorithm == "combinatorial":
            report = solve_welfare_incremental(
                instance, audit=args.audit, order_seed=args.random_order, trace=trace
            )
        else:
            report = solve_walrasian_prices(
                instance, algorithm, seed=args.seed, retry_cap=args.retry_cap, trace=trace
            )

    verified, rejected = _verify(instance, report)
    data = result_to_json(instance, report, verified, args.trace)
    if args.output:
        write_json(data, args.output)
        logger.info("Wrote %s result (%s) to %s", report.method, report.verdict, args.output)
    else:
        sys.stdout.write(dumps_canonical(data))

    if report.verdict == "no-equilibrium-found":
        return 2
    if report.verdict == "inconclusive":
        return 1
    return 1 if rejected else 0
