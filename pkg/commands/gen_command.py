"""
Generate Command
Writes a seeded random market as an instance file
"""

import argparse
import logging
import sys

from core.valuations import GS_FAMILIES, generate_random_general, generate_random_gs
from utils.formats import dumps_canonical, instance_to_json, save_instance

logger = logging.getLogger(__name__)

FAMILIES = GS_FAMILIES + ("general",)


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("gen", help="Generate a random market instance")
    parser.add_argument("--family", choices=FAMILIES, default="matroid_rank_mix")
    parser.add_argument("--items", type=int, required=True, help="Number of items n")
    parser.add_argument("--buyers", type=int, required=True, help="Number of buyers m")
    parser.add_argument("--max-value", type=int, default=20, help="Largest drawn weight or table value")
    parser.add_argument("--max-supply", type=int, default=1, help="Largest supply per item (general family)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("-o", "--output", help="Instance file to write (stdout when omitted)")
    parser.set_defaults(handler=run)
    return parser


def run(args) -> int:
    if args.family == "general":
        instance = generate_random_general(args.items, args.buyers, args.max_supply, args.max_value, args.seed)
    else:
        if args.max_supply != 1:
            logger.warning("--max-supply is ignored for the %s family (unit supply)", args.family)
        instance = generate_random_gs(args.family, args.items, args.buyers, args.max_value, args.seed)

    if args.output:
        save_instance(instance, args.output)
        logger.info("Wrote %s instance (n=%d, m=%d) to %s", args.family, instance.n, instance.m, args.output)
    else:
        sys.stdout.write(dumps_canonical(instance_to_json(instance)))
    return 0
