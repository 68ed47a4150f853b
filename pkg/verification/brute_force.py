"""
Brute-Force Verification
Exhaustive welfare maximization, Walrasian membership, the integral price
scan and the welfare-theorem cross-check every solver result is held to
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import EXACT_COVER_ITEM_LIMIT, resolve_budget
from core.errors import BudgetExceededError, DomainError
from core.market import (
    Allocation,
    EquilibriumCertificate,
    MarketInstance,
    PriceVector,
    as_prices,
    magnitude_bound,
    price_of,
    validate_allocation,
)
from core.valuations import Bundle, evaluate
from solvers.potential import brute_force_demand

logger = logging.getLogger(__name__)


def _text(value) -> str:
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


# Cells of the utility matrix evaluated per numpy chunk in the price scan
SCAN_CHUNK_CELLS = 1 << 22
LATTICE_SAMPLE_PAIRS = 256


@dataclass(frozen=True)
class WelfareResult:
    value: Fraction
    allocations: Tuple[Allocation, ...]
    enumerated: int

    @property
    def unique(self) -> bool:
        return len(self.allocations) == 1


def _compositions(total: int, parts: int) -> List[Tuple[int, ...]]:
    """All ways to write `total` as an ordered sum of `parts` non-negative integers."""
    if parts == 1:
        return [(total,)]
    result = []
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            result.append((first,) + rest)
    return result


def allocation_count(instance: MarketInstance) -> int:
    """Number of allocations that exactly clear the supply."""
    count = 1
    for s in instance.supply:
        count *= comb(s + instance.m - 1, instance.m - 1)
    return count


def _value_cache(instance: MarketInstance):
    caches: List[Dict[Bundle, int]] = [{} for _ in range(instance.m)]

    def value(i: int, bundle: Bundle) -> int:
        cache = caches[i]
        if bundle not in cache:
            cache[bundle] = evaluate(instance.buyers[i], bundle)
        return cache[bundle]

    return value


def iter_allocations(instance: MarketInstance):
    """Every allocation x^(1..m) with sum_i x^(i) = s (items split independently)."""
    n, m = instance.n, instance.m
    per_item = [_compositions(s, m) for s in instance.supply]
    for split in itertools.product(*per_item):
        yield tuple(tuple(split[j][i] for j in range(n)) for i in range(m))


def brute_force_welfare(instance: MarketInstance, budget: Optional[int] = None) -> WelfareResult:
    """
    Exhaustive welfare maximization.

    Single-unit markets enumerate the m^n item-to-buyer assignments; multi-unit
    markets split each item's supply among the buyers in every possible way.

    Args:
        instance: Market to solve
        budget: Enumeration budget (defaults to WALRUS_BUDGET)

    Returns:
        WelfareResult with the optimum and every optimal allocation in enumeration order
    """
    budget = resolve_budget(budget)
    required = allocation_count(instance)
    if required > budget:
        raise BudgetExceededError("verification enumeration budget", required, budget)

    value = _value_cache(instance)
    best = None
    optima: List[Allocation] = []
    enumerated = 0
    for allocation in iter_allocations(instance):
        enumerated += 1
        total = sum(value(i, bundle) for i, bundle in enumerate(allocation))
        if best is None or total > best:
            best = total
            optima = [allocation]
        elif total == best:
            optima.append(allocation)
    logger.debug("Welfare enumeration: %d allocations, optimum %s (%d optimal)", enumerated, best, len(optima))
    return WelfareResult(value=Fraction(best), allocations=tuple(optima), enumerated=enumerated)


@dataclass(frozen=True)
class MembershipVerdict:
    """
    Outcome of a Walrasian membership test.

    On rejection `condition` names the failure ("invalid-allocation",
    "not-in-demand", "overdemand", "underdemand" or "no-clearing-selection")
    and `buyer` / `item` point at the witness when one exists.
    """

    member: bool
    allocation: Optional[Allocation] = None
    condition: str = ""
    buyer: Optional[int] = None
    item: Optional[int] = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "member": self.member,
            "allocation": None if self.allocation is None else [list(b) for b in self.allocation],
            "condition": self.condition or None,
            "buyer": None if self.buyer is None else self.buyer + 1,
            "item": None if self.item is None else self.item + 1,
            "detail": self.detail,
        }


def _check_domain_budget(instance: MarketInstance, budget: int) -> None:
    if instance.domain_size > budget:
        raise BudgetExceededError("verification enumeration budget", instance.domain_size, budget)


def best_utilities(instance: MarketInstance, prices: Sequence) -> Tuple[Fraction, ...]:
    """max_x v_i(x) - p.x for every buyer, by exhaustive demand."""
    p = as_prices(prices)
    return tuple(brute_force_demand(spec, p, instance.supply).utility for spec in instance.buyers)


def walrasian_membership(
    instance: MarketInstance,
    prices: Sequence,
    allocation: Optional[Sequence[Sequence[int]]] = None,
    budget: Optional[int] = None,
) -> MembershipVerdict:
    """
    Decide whether prices (with an allocation, if given) form a Walrasian equilibrium.

    With an allocation every x^(i) must attain buyer i's brute-force demand
    maximum and the bundles must partition the supply. Without one, a clearing
    selection is searched among the demand sets.
    """
    budget = resolve_budget(budget)
    p = as_prices(prices)
    if len(p) != instance.n:
        raise DomainError(f"price vector has {len(p)} entries, market has {instance.n} items")
    _check_domain_budget(instance, budget)

    if allocation is not None:
        allocation = tuple(tuple(int(q) for q in bundle) for bundle in allocation)
        report = validate_allocation(instance, allocation)
        if not report.valid:
            return MembershipVerdict(
                False, allocation, "invalid-allocation", item=report.item, detail=report.reason
            )
        for i, spec in enumerate(instance.buyers):
            best = brute_force_demand(spec, p, instance.supply)
            utility = Fraction(evaluate(spec, allocation[i])) - price_of(p, allocation[i])
            if utility != best.utility:
                return MembershipVerdict(
                    False,
                    allocation,
                    "not-in-demand",
                    buyer=i,
                    detail=f"utility {utility} below demand maximum {best.utility}",
                )
        return MembershipVerdict(True, allocation)

    if instance.n > EXACT_COVER_ITEM_LIMIT:
        raise BudgetExceededError("exact-cover item limit", instance.n, EXACT_COVER_ITEM_LIMIT)
    demand_sets = [brute_force_demand(spec, p, instance.supply).full_set for spec in instance.buyers]
    supply = instance.supply

    for j in range(instance.n):
        low = sum(min(x[j] for x in options) for options in demand_sets)
        high = sum(max(x[j] for x in options) for options in demand_sets)
        if low > supply[j]:
            return MembershipVerdict(
                False, None, "overdemand", item=j, detail=f"item {j + 1}: every selection demands at least {low}"
            )
        if high < supply[j]:
            return MembershipVerdict(
                False, None, "underdemand", item=j, detail=f"item {j + 1}: every selection demands at most {high}"
            )
    low_total = sum(min(sum(x) for x in options) for options in demand_sets)
    high_total = sum(max(sum(x) for x in options) for options in demand_sets)
    if low_total > sum(supply):
        return MembershipVerdict(
            False, None, "overdemand", detail=f"every selection demands at least {low_total} units in total"
        )
    if high_total < sum(supply):
        return MembershipVerdict(
            False, None, "underdemand", detail=f"every selection demands at most {high_total} units in total"
        )

    selection = _exact_cover(demand_sets, supply)
    if selection is None:
        return MembershipVerdict(False, None, "no-clearing-selection", detail="no demanded bundles clear the market")
    return MembershipVerdict(True, selection)


def _exact_cover(demand_sets, supply: Tuple[int, ...]) -> Optional[Allocation]:
    """Pick one bundle per buyer so that the picks sum to the supply (memoized backtracking)."""
    m = len(demand_sets)
    failed = set()

    def search(i: int, remaining: Tuple[int, ...]):
        if i == m:
            return () if not any(remaining) else None
        if (i, remaining) in failed:
            return None
        for bundle in demand_sets[i]:
            if any(q > r for q, r in zip(bundle, remaining)):
                continue
            rest = search(i + 1, tuple(r - q for r, q in zip(remaining, bundle)))
            if rest is not None:
                return (bundle,) + rest
        failed.add((i, remaining))
        return None

    return search(0, tuple(supply))


@dataclass(frozen=True)
class WalrasianSet:
    """Integral Walrasian prices inside the box [-2M, 2M]^n."""

    integral_points: Tuple[PriceVector, ...]
    lattice_min: Optional[PriceVector]
    lattice_max: Optional[PriceVector]
    lattice_closed: bool = True
    closure_witness: Optional[Tuple[PriceVector, PriceVector]] = None
    scanned: int = 0

    @property
    def exists(self) -> bool:
        return bool(self.integral_points)

    def __contains__(self, prices) -> bool:
        return tuple(as_prices(prices)) in set(self.integral_points)

    def to_dict(self) -> dict:
        def render(vector):
            return None if vector is None else [_text(v) for v in vector]

        return {
            "exists": self.exists,
            "count": len(self.integral_points),
            "lattice_min": render(self.lattice_min),
            "lattice_max": render(self.lattice_max),
            "lattice_closed": self.lattice_closed,
            "scanned": self.scanned,
        }


def _buyer_matrices(instance: MarketInstance, i: int):
    bundles = list(instance.bundles())
    spec = instance.buyers[i]
    values = np.array([evaluate(spec, b) for b in bundles], dtype=np.int64)
    return np.array(bundles, dtype=np.int64), values


def enumerate_integral_walrasian(
    instance: MarketInstance,
    budget: Optional[int] = None,
    sample_pairs: int = LATTICE_SAMPLE_PAIRS,
    seed: int = 0,
) -> WalrasianSet:
    """
    Scan every integer price vector in [-2M, 2M]^n.

    A price is Walrasian exactly when a fixed welfare-optimal allocation is
    demanded at it (any equilibrium allocation is optimal, and any optimal
    allocation supports every equilibrium price), so each grid point costs one
    vectorized utility comparison per buyer.

    Args:
        instance: Market to scan
        budget: Enumeration budget (defaults to WALRUS_BUDGET)
        sample_pairs: Number of random point pairs checked for min/max closure
        seed: Seed of the pair sampler

    Returns:
        WalrasianSet with lattice extremes and the closure check
    """
    budget = resolve_budget(budget)
    bound = 2 * max(magnitude_bound(instance), 1)
    side = 2 * bound + 1
    total = side ** instance.n
    if total > budget:
        raise BudgetExceededError("price scan budget", total, budget)
    _check_domain_budget(instance, budget)

    optimum = brute_force_welfare(instance, budget).allocations[0]
    matrices = [_buyer_matrices(instance, i) for i in range(instance.m)]
    chosen_values = np.array(
        [evaluate(spec, bundle) for spec, bundle in zip(instance.buyers, optimum)], dtype=np.int64
    )
    chosen_bundles = np.array(optimum, dtype=np.int64)

    n = instance.n
    radix = side ** np.arange(n, dtype=np.int64)
    widest = max(len(values) for _, values in matrices)
    chunk = max(1, SCAN_CHUNK_CELLS // widest)
    points: List[PriceVector] = []
    for start in range(0, total, chunk):
        index = np.arange(start, min(start + chunk, total), dtype=np.int64)
        grid = (index[:, None] // radix[None, :]) % side - bound
        accepted = np.ones(len(index), dtype=bool)
        for i, (bundles, values) in enumerate(matrices):
            utilities = values[None, :] - grid @ bundles.T
            held = chosen_values[i] - grid @ chosen_bundles[i]
            accepted &= held >= utilities.max(axis=1)
        for row in grid[accepted]:
            points.append(tuple(Fraction(int(v)) for v in row))

    if not points:
        logger.debug("Price scan: no integral Walrasian price among %d points", total)
        return WalrasianSet((), None, None, True, None, total)

    lower = tuple(min(p[j] for p in points) for j in range(n))
    upper = tuple(max(p[j] for p in points) for j in range(n))
    closed, witness = _check_lattice(points, sample_pairs, seed)
    if not closed:
        logger.warning("Integral Walrasian prices are not closed under min/max: %s", witness)
    return WalrasianSet(tuple(points), lower, upper, closed, witness, total)


def _check_lattice(points: Sequence[PriceVector], sample_pairs: int, seed: int):
    members = set(points)
    count = len(points)
    if count * count <= sample_pairs:
        pairs = itertools.product(range(count), repeat=2)
    else:
        rng = np.random.default_rng(seed)
        pairs = rng.integers(0, count, size=(sample_pairs, 2)).tolist()
    for a, b in pairs:
        p, q = points[a], points[b]
        meet = tuple(min(x, y) for x, y in zip(p, q))
        join = tuple(max(x, y) for x, y in zip(p, q))
        if meet not in members or join not in members:
            return False, (p, q)
    return True, None


@dataclass(frozen=True)
class WelfareTheoremVerdict:
    passed: bool
    welfare: Fraction
    optimal_welfare: Fraction
    reason: str = ""
    failing_allocation: Optional[Allocation] = None
    membership: Optional[MembershipVerdict] = None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "welfare": _text(self.welfare),
            "optimal_welfare": _text(self.optimal_welfare),
            "reason": self.reason,
            "failing_allocation": None
            if self.failing_allocation is None
            else [list(b) for b in self.failing_allocation],
            "membership": None if self.membership is None else self.membership.to_dict(),
        }


def check_welfare_theorems(
    instance: MarketInstance,
    certificate: EquilibriumCertificate,
    budget: Optional[int] = None,
) -> WelfareTheoremVerdict:
    """
    Cross-check a certificate against both welfare theorems.

    The certified allocation must reach the brute-force optimum, and every
    optimal allocation must be an equilibrium allocation at the certified prices.
    """
    budget = resolve_budget(budget)
    optimum = brute_force_welfare(instance, budget)
    report = validate_allocation(instance, certificate.allocation)
    welfare = sum(
        (Fraction(evaluate(spec, bundle)) for spec, bundle in zip(instance.buyers, certificate.allocation)),
        Fraction(0),
    ) if report.valid else Fraction(0)
    if not report.valid:
        return WelfareTheoremVerdict(False, welfare, optimum.value, f"invalid allocation: {report.reason}")
    membership = walrasian_membership(instance, certificate.prices, certificate.allocation, budget)
    if not membership.member:
        return WelfareTheoremVerdict(
            False, welfare, optimum.value, "certificate is not an equilibrium", membership=membership
        )
    if welfare != optimum.value:
        return WelfareTheoremVerdict(
            False, welfare, optimum.value, f"welfare {welfare} below optimum {optimum.value}"
        )

    p = as_prices(certificate.prices)
    ceilings = best_utilities(instance, p)
    for allocation in optimum.allocations:
        for i, bundle in enumerate(allocation):
            spec = instance.buyers[i]
            if Fraction(evaluate(spec, bundle)) - price_of(p, bundle) != ceilings[i]:
                return WelfareTheoremVerdict(
                    False,
                    welfare,
                    optimum.value,
                    f"optimal allocation not supported at the prices (buyer {i + 1})",
                    failing_allocation=allocation,
                )
    return WelfareTheoremVerdict(True, welfare, optimum.value)
