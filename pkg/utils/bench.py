"""
Oracle Benchmark
Sweeps the incremental solver over market sizes and fits the value-call scaling
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from core.valuations import OracleCounter, generate_random_gs
from solvers.combinatorial import solve_welfare_incremental
from utils.cost_calculator import calculate_cost

logger = logging.getLogger(__name__)

ROW_COLUMNS = [
    "items", "buyers", "seed", "phase", "item", "value_calls",
    "total_value_calls", "weighted_cost",
]
SORT_KEY = ["items", "buyers", "seed", "phase"]


def _bench_one(family: str, n: int, m: int, max_value: int, seed: int) -> List[Dict]:
    instance = generate_random_gs(family, n, m, max_value, seed)
    counter = OracleCounter()
    report = solve_welfare_incremental(instance, counter=counter, audit="final")
    total = counter.value_calls
    cost = calculate_cost(counter, n, m)["total_cost"]
    return [
        {
            "items": n,
            "buyers": m,
            "seed": seed,
            "phase": phase["phase"],
            "item": phase["item"],
            "value_calls": phase["value_calls"],
            "total_value_calls": total,
            "weighted_cost": cost,
        }
        for phase in report.phases
    ]


def run_sweep(
    items: Sequence[int],
    buyers: Sequence[int],
    seeds: Sequence[int] = (0,),
    family: str = "matroid_rank_mix",
    max_value: int = 20,
    workers: int = 1,
) -> pd.DataFrame:
    """
    One row per (items, buyers, seed, phase) with the phase's value-oracle calls.

    Runs are independent; with workers > 1 they go to a thread pool and the
    rows are merged by sort key so the frame does not depend on scheduling.
    """
    jobs = [(family, n, m, max_value, seed) for n in items for m in buyers for seed in seeds]
    logger.info("Benchmarking %d runs with %d worker(s)", len(jobs), workers)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda job: _bench_one(*job), jobs))
    else:
        chunks = [_bench_one(*job) for job in jobs]
    rows = [row for chunk in chunks for row in chunk]
    frame = pd.DataFrame(rows, columns=ROW_COLUMNS)
    return frame.sort_values(SORT_KEY, kind="mergesort").reset_index(drop=True)


def fit_scaling(frame: pd.DataFrame) -> Tuple[pd.DataFrame, Dict[str, float]]:
    """
    Least-squares fit of total value calls against a + b*nm + c*n^3.

    Each point is weighted by 1/y, so the fit minimizes the relative residuals
    that the per-point check reads.

    Returns:
        (per-point summary with fitted value and relative residual, coefficients)
    """
    totals = (
        frame.groupby(["items", "buyers", "seed"], as_index=False)["total_value_calls"]
        .first()
        .groupby(["items", "buyers"], as_index=False)["total_value_calls"]
        .mean()
    )
    n = totals["items"].to_numpy(dtype=float)
    m = totals["buyers"].to_numpy(dtype=float)
    y = totals["total_value_calls"].to_numpy(dtype=float)
    design = np.column_stack([np.ones_like(n), n * m, n ** 3])
    weight = 1.0 / np.maximum(y, 1.0)
    coef, *_ = np.linalg.lstsq(design * weight[:, None], y * weight, rcond=None)
    fitted = design @ coef
    totals["fitted"] = fitted
    totals["relative_residual"] = np.abs(fitted - y) / np.maximum(y, 1.0)
    coefficients = {"a": float(coef[0]), "b": float(coef[1]), "c": float(coef[2])}
    return totals, coefficients


def later_phase_spread(frame: pd.DataFrame) -> pd.DataFrame:
    """
    Value calls after phase 1, averaged per (items, buyers), and their
    relative spread across buyer counts for each item count.
    """
    later = frame[frame["phase"] > 1]
    per_run = later.groupby(["items", "buyers", "seed"], as_index=False)["value_calls"].sum()
    per_size = per_run.groupby(["items", "buyers"], as_index=False)["value_calls"].mean()
    spread = per_size.groupby("items")["value_calls"].agg(["min", "max", "mean"]).reset_index()
    spread["relative_spread"] = (spread["max"] - spread["min"]) / spread["mean"].clip(lower=1.0)
    return spread


def write_csv(frame: pd.DataFrame, path) -> None:
    frame.to_csv(path, index=False)
    logger.info("Wrote %d benchmark rows to %s", len(frame), path)
