"""
Verify Command
Cross-checks a result file against its instance with the brute-force oracles
"""

import argparse
import logging
import sys

from core.market import EquilibriumCertificate
from utils.formats import dumps_canonical, load_instance, load_result
from verification.brute_force import check_welfare_theorems, walrasian_membership

logger = logging.getLogger(__name__)


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("verify", help="Verify a result file against its instance")
    parser.add_argument("instance", help="Instance file")
    parser.add_argument("result", help="Result file produced by solve")
    parser.add_argument("--budget", type=int, default=None, help="Enumeration budget (default WALRUS_BUDGET)")
    parser.set_defaults(handler=run)
    return parser


def run(args) -> int:
    instance = load_instance(args.instance)
    result = load_result(args.result, instance)
    output = {"method": result.method, "claimed_verdict": result.verdict}

    if result.prices is None:
        output["passed"] = False
        output["reason"] = "result carries no prices"
        sys.stdout.write(dumps_canonical(output))
        # a solver that found nothing leaves nothing to check
        return 2 if result.verdict == "no-equilibrium-found" else 1

    membership = walrasian_membership(instance, result.prices, result.allocation, args.budget)
    output["membership"] = membership.to_dict()
    passed = membership.member
    if passed and result.allocation is not None:
        certificate = EquilibriumCertificate(
            prices=result.prices,
            allocation=result.allocation,
            witnesses=(),
        )
        theorems = check_welfare_theorems(instance, certificate, args.budget)
        output["welfare_theorems"] = theorems.to_dict()
        passed = theorems.passed
    if passed and result.verdict != "certified":
        logger.warning("Result is marked %s but its prices clear the market", result.verdict)
    output["passed"] = passed
    sys.stdout.write(dumps_canonical(output))

    if not passed:
        buyer = membership.buyer
        logger.error(
            "Verification failed: %s%s",
            membership.condition or "welfare theorem check",
            f" (buyer {buyer + 1})" if buyer is not None else "",
        )
        return 1
    return 0
