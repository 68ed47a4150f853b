"""
Demand Oracles and Market Potentials
Greedy and brute-force demand, aggregate demand, the market potential f, its
perturbed and regularized variants, their subgradients, and AllGreedy
"""

import heapq
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from config import BRUTE_FORCE_DEMAND_LIMIT
from core.errors import BudgetExceededError, DomainError
from core.market import (
    MarketInstance,
    PriceVector,
    as_prices,
    bundle_of_items,
    iter_bundles,
    price_of,
)
from core.valuations import Bundle, OracleCounter, ValuationSpec, evaluate

logger = logging.getLogger(__name__)

VARIANTS = ("plain", "perturbed", "regularized")
DEMAND_MODES = ("greedy_gs", "brute_force")


@dataclass(frozen=True)
class DemandResult:
    bundle: Bundle
    utility: Fraction
    full_set: Optional[Tuple[Bundle, ...]] = None


@dataclass(frozen=True)
class AllGreedyResult:
    """
    Output of AllGreedy at prices p.

    `subgradient` is the subgradient of the regularized potential,
    g_j = 1 - coverage_j, where coverage_j counts the sets holding item j.
    """

    sets: Tuple[frozenset, ...]
    gamma: Fraction
    subgradient: Tuple[int, ...]
    coverage: Tuple[int, ...]
    total_size: int
    value: Fraction

    def is_partition(self) -> bool:
        return all(c == 1 for c in self.coverage)


@dataclass(frozen=True)
class PotentialAnswer:
    """Value and subgradient of a potential at one price vector."""

    value: Fraction
    subgradient: Tuple[Fraction, ...]
    demands: Optional[Tuple[DemandResult, ...]] = None
    greedy: Optional[AllGreedyResult] = None


def greedy_demand(
    spec: ValuationSpec, prices: Sequence, counter: Optional[OracleCounter] = None
) -> DemandResult:
    """
    Greedy demand for single-unit valuations.

    Starting from the empty set, repeatedly add the item with the largest
    strictly positive marginal v(S + j) - p_j - v(S) (ties: lowest item).
    Exact for gross-substitutes valuations.
    """
    p = as_prices(prices)
    n = spec.n
    if len(p) != n:
        raise DomainError(f"price vector has {len(p)} entries, valuation has {n} items")
    if counter is not None:
        counter.demand_calls += 1
    chosen = set()
    current = 0
    while len(chosen) < n:
        best_item = None
        best_margin = Fraction(0)
        best_value = None
        for j in range(n):
            if j in chosen:
                continue
            value = evaluate(spec, bundle_of_items(chosen | {j}, n), counter)
            margin = value - p[j] - current
            if margin > best_margin:
                best_item, best_margin, best_value = j, margin, value
        if best_item is None:
            break
        chosen.add(best_item)
        current = best_value
    bundle = bundle_of_items(chosen, n)
    return DemandResult(bundle=bundle, utility=Fraction(current) - price_of(p, bundle))


def brute_force_demand(
    spec: ValuationSpec,
    prices: Sequence,
    supply: Optional[Sequence[int]] = None,
    counter: Optional[OracleCounter] = None,
    limit: int = BRUTE_FORCE_DEMAND_LIMIT,
) -> DemandResult:
    """
    Exhaustive demand over the domain x <= supply.

    Returns:
        DemandResult with the first maximizer in mixed-radix order and the full demand set
    """
    p = as_prices(prices)
    supply = tuple(supply) if supply is not None else (1,) * spec.n
    if len(p) != spec.n or len(supply) != spec.n:
        raise DomainError("prices and supply must match the valuation's item count")
    size = 1
    for s in supply:
        size *= s + 1
    if size > limit:
        raise BudgetExceededError("demand enumeration budget", size, limit)
    if counter is not None:
        counter.demand_calls += 1
    best = None
    maximizers: List[Bundle] = []
    for bundle in iter_bundles(supply):
        utility = evaluate(spec, bundle, counter) - price_of(p, bundle)
        if best is None or utility > best:
            best = utility
            maximizers = [bundle]
        elif utility == best:
            maximizers.append(bundle)
    return DemandResult(bundle=maximizers[0], utility=Fraction(best), full_set=tuple(maximizers))


def buyer_demands(
    instance: MarketInstance,
    prices: Sequence,
    mode: str = "greedy_gs",
    counter: Optional[OracleCounter] = None,
) -> Tuple[DemandResult, ...]:
    """One demanded bundle per buyer under the chosen oracle."""
    if mode not in DEMAND_MODES:
        raise ValueError(f"Unknown demand mode '{mode}'. Expected one of: {', '.join(DEMAND_MODES)}")
    p = as_prices(prices)
    if len(p) != instance.n:
        raise DomainError(f"price vector has {len(p)} entries, market has {instance.n} items")
    if mode == "greedy_gs":
        if not instance.is_single_unit():
            raise DomainError("greedy demand requires a single-unit market")
        return tuple(greedy_demand(spec, p, counter) for spec in instance.buyers)
    return tuple(brute_force_demand(spec, p, instance.supply, counter) for spec in instance.buyers)


def aggregate_demand(
    instance: MarketInstance,
    prices: Sequence,
    mode: str = "greedy_gs",
    counter: Optional[OracleCounter] = None,
) -> Tuple[int, ...]:
    """d(p) = sum_i x^(i) for demanded bundles x^(i) (deterministic tie-break)."""
    demands = buyer_demands(instance, prices, mode, counter)
    if counter is not None:
        counter.aggregate_calls += 1
    return tuple(sum(d.bundle[j] for d in demands) for j in range(instance.n))


def _check_variant(variant: str, perturbation) -> Optional[PriceVector]:
    if variant not in VARIANTS:
        raise ValueError(f"Unknown potential variant '{variant}'. Expected one of: {', '.join(VARIANTS)}")
    if variant == "perturbed":
        if perturbation is None:
            raise ValueError("the perturbed potential needs a perturbation vector")
        return as_prices(perturbation)
    return as_prices(perturbation) if perturbation is not None else None


def evaluate_potential(
    instance: MarketInstance,
    prices: Sequence,
    variant: str = "plain",
    perturbation: Optional[Sequence] = None,
    mode: str = "brute_force",
    counter: Optional[OracleCounter] = None,
) -> PotentialAnswer:
    """
    Value and subgradient of f, f + r.p or the regularized potential in one pass.

    The plain and perturbed variants query one demand per buyer; the
    regularized variant runs AllGreedy. A perturbation passed with the
    regularized variant is added the same way as for f.
    """
    r = _check_variant(variant, perturbation)
    p = as_prices(prices)
    if variant == "regularized":
        result = all_greedy(instance, p, counter)
        value = result.value
        subgradient = tuple(Fraction(g) for g in result.subgradient)
        if r is not None:
            value += sum(rj * pj for rj, pj in zip(r, p))
            subgradient = tuple(g + rj for g, rj in zip(subgradient, r))
        return PotentialAnswer(value=value, subgradient=subgradient, greedy=result)

    demands = buyer_demands(instance, p, mode, counter)
    if counter is not None:
        counter.aggregate_calls += 1
    value = sum((d.utility for d in demands), Fraction(0)) + price_of(p, instance.supply)
    subgradient = []
    for j in range(instance.n):
        g = Fraction(instance.supply[j] - sum(d.bundle[j] for d in demands))
        if r is not None:
            g += r[j]
        subgradient.append(g)
    if r is not None:
        value += sum(rj * pj for rj, pj in zip(r, p))
    return PotentialAnswer(value=value, subgradient=tuple(subgradient), demands=demands)


def potential_value(
    instance: MarketInstance,
    prices: Sequence,
    variant: str = "plain",
    perturbation: Optional[Sequence] = None,
    mode: str = "brute_force",
) -> Fraction:
    """
    f(p) = sum_i max_x (v_i(x) - p.x) + p.s; perturbed adds r.p; regularized
    is max over profiles with sum |S_i| = n of sum_i (v_i(S_i) - p(S_i)) + p([n]).
    """
    return evaluate_potential(instance, prices, variant, perturbation, mode).value


def potential_subgradient(
    instance: MarketInstance,
    prices: Sequence,
    variant: str = "plain",
    counter: Optional[OracleCounter] = None,
    perturbation: Optional[Sequence] = None,
    mode: str = "greedy_gs",
) -> Tuple[Fraction, ...]:
    """s - d(p) (plain), s + r - d(p) (perturbed) or the AllGreedy subgradient (regularized)."""
    return evaluate_potential(instance, prices, variant, perturbation, mode, counter).subgradient


def singleton_values(instance: MarketInstance, counter: Optional[OracleCounter] = None) -> List[List[int]]:
    """v_i({j}) for every buyer and item (m * n value calls)."""
    n = instance.n
    return [
        [evaluate(spec, bundle_of_items((j,), n), counter) for j in range(n)]
        for spec in instance.buyers
    ]


def all_greedy(
    instance: MarketInstance,
    prices: Sequence,
    counter: Optional[OracleCounter] = None,
    singletons: Optional[Sequence[Sequence[int]]] = None,
) -> AllGreedyResult:
    """
    Parallel greedy over all buyers.

    Runs exactly n steps; each step adds the pair (i, j), j not in S_i, with
    the largest v_i(S_i + j) - v_i(S_i) - p_j (ties: lowest buyer, then lowest
    item). Sets may overlap across buyers. gamma is the last step's value.

    Args:
        instance: Single-unit market
        prices: Price vector p
        counter: Optional oracle-call accumulator
        singletons: Precomputed v_i({j}) table; built here when omitted

    Returns:
        AllGreedyResult
    """
    if not instance.is_single_unit():
        raise DomainError("AllGreedy requires a single-unit market")
    p = as_prices(prices)
    n, m = instance.n, instance.m
    if len(p) != n:
        raise DomainError(f"price vector has {len(p)} entries, market has {n} items")
    if singletons is None:
        singletons = singleton_values(instance, counter)

    sets = [set() for _ in range(m)]
    values = [0] * m
    version = [0] * m
    # per-item heaps of (-marginal, buyer, version) over buyers not holding the item
    heaps: List[list] = [[] for _ in range(n)]
    for j in range(n):
        heaps[j] = [(-singletons[i][j], i, 0) for i in range(m)]
        heapq.heapify(heaps[j])

    gamma = None
    for _ in range(n):
        best = None
        for j in range(n):
            heap = heaps[j]
            while heap and heap[0][2] != version[heap[0][1]]:
                heapq.heappop(heap)
            if not heap:
                continue
            neg_margin, i, _ = heap[0]
            gain = -neg_margin - p[j]
            if best is None or gain > best[0] or (gain == best[0] and (i, j) < (best[1], best[2])):
                best = (gain, i, j, -neg_margin)
        gain, i, j, margin = best
        sets[i].add(j)
        values[i] += margin
        gamma = gain
        version[i] += 1
        spec = instance.buyers[i]
        for other in range(n):
            if other in sets[i]:
                continue
            value = evaluate(spec, bundle_of_items(sets[i] | {other}, n), counter)
            heapq.heappush(heaps[other], (-(value - values[i]), i, version[i]))

    coverage = tuple(sum(1 for s in sets if j in s) for j in range(n))
    subgradient = tuple(1 - c for c in coverage)
    value = sum(
        (Fraction(values[i]) - sum((p[j] for j in sets[i]), Fraction(0)) for i in range(m)),
        Fraction(0),
    ) + sum(p, Fraction(0))
    return AllGreedyResult(
        sets=tuple(frozenset(s) for s in sets),
        gamma=Fraction(gamma),
        subgradient=subgradient,
        coverage=coverage,
        total_size=sum(len(s) for s in sets),
        value=value,
    )
