"""
Check GS Command
Runs the exact gross-substitutes checker on every buyer of an instance
"""

import argparse
import logging
import sys

from core.valuations import check_gross_substitutes
from utils.formats import dumps_canonical, load_instance

logger = logging.getLogger(__name__)


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("check-gs", help="Check whether every valuation is gross substitutes")
    parser.add_argument("instance", help="Instance file")
    parser.set_defaults(handler=run)
    return parser


def run(args) -> int:
    instance = load_instance(args.instance)
    buyers = []
    for i, spec in enumerate(instance.buyers):
        result = check_gross_substitutes(spec)
        entry = {"buyer": i + 1}
        entry.update(result.to_dict())
        buyers.append(entry)
        if not result.is_gs:
            logger.info("Buyer %d fails the exchange property", i + 1)

    is_gs = all(entry["gross_substitutes"] for entry in buyers)
    sys.stdout.write(dumps_canonical({"gross_substitutes": is_gs, "buyers": buyers}))
    return 0 if is_gs else 2
