"""
Bench Command
Sweeps market sizes and writes per-phase value-oracle counts as CSV
"""

import argparse
import logging
import sys

from core.valuations import GS_FAMILIES
from utils.bench import fit_scaling, later_phase_spread, run_sweep, write_csv
from utils.cost_calculator import format_cost
from utils.formats import dumps_canonical

logger = logging.getLogger(__name__)


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("bench", help="Benchmark value-oracle calls of the incremental solver")
    parser.add_argument("--items", type=int, nargs="+", default=[4, 8, 16, 32])
    parser.add_argument("--buyers", type=int, nargs="+", default=[8, 64])
    parser.add_argument("--seeds", type=int, default=1, help="Random instances per size")
    parser.add_argument("--family", choices=GS_FAMILIES, default="matroid_rank_mix")
    parser.add_argument("--max-value", type=int, default=20)
    parser.add_argument("--workers", type=int, default=1, help="Thread pool size")
    parser.add_argument("-o", "--output", required=True, help="CSV file to write")
    parser.set_defaults(handler=run)
    return parser


def run(args) -> int:
    frame = run_sweep(
        args.items,
        args.buyers,
        seeds=range(args.seeds),
        family=args.family,
        max_value=args.max_value,
        workers=args.workers,
    )
    write_csv(frame, args.output)

    summary = {"rows": len(frame), "csv": args.output}
    if frame[["items", "buyers"]].drop_duplicates().shape[0] >= 3:
        points, coefficients = fit_scaling(frame)
        summary["fit"] = coefficients
        summary["max_relative_residual"] = float(points["relative_residual"].max())
        spread = later_phase_spread(frame)
        summary["later_phase_spread"] = {
            str(int(row["items"])): float(row["relative_spread"]) for _, row in spread.iterrows()
        }
    else:
        logger.warning("Fewer than three market sizes; skipping the scaling fit")
    largest = int(frame["weighted_cost"].max()) if len(frame) else 0
    summary["largest_weighted_cost"] = format_cost(largest)
    sys.stdout.write(dumps_canonical(summary))
    return 0
