"""
Market Model
Markets of indivisible goods, bundles, exact prices, allocations, welfare and
equilibrium certificates
"""

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from core.errors import DomainError, MalformedInstanceError
from core.valuations import (
    Bundle,
    OracleCounter,
    ValuationSpec,
    evaluate,
    is_single_unit_spec,
)

PriceVector = Tuple[Fraction, ...]
Allocation = Tuple[Bundle, ...]


@dataclass(frozen=True)
class MarketInstance:
    """
    n items with integer supply s_j and m buyers.

    Items and buyers are 0-indexed here; file formats and messages are 1-indexed.
    """

    n: int
    supply: Tuple[int, ...]
    buyers: Tuple[ValuationSpec, ...]

    def __post_init__(self):
        if self.n < 1:
            raise MalformedInstanceError("at least one item is required", field="items")
        if len(self.supply) != self.n:
            raise MalformedInstanceError(
                f"supply has {len(self.supply)} entries for {self.n} items", field="supply"
            )
        if any(int(s) != s or s < 0 for s in self.supply):
            raise MalformedInstanceError("supply must be non-negative integers", field="supply")
        if len(self.buyers) < 1:
            raise MalformedInstanceError("at least one buyer is required", field="buyers")
        for i, spec in enumerate(self.buyers):
            if spec.n != self.n:
                raise MalformedInstanceError(
                    f"valuation defined on {spec.n} items, market has {self.n}",
                    field=f"buyers[{i + 1}]",
                )
            if spec.kind == "explicit_table":
                missing = next((b for b in self.bundles() if b not in spec.table), None)
                if missing is not None:
                    raise MalformedInstanceError(
                        f"table misses bundle {list(missing)}", field=f"buyers[{i + 1}].table"
                    )

    @property
    def m(self) -> int:
        return len(self.buyers)

    @property
    def max_supply(self) -> int:
        return max(self.supply) if self.supply else 0

    @property
    def domain_size(self) -> int:
        size = 1
        for s in self.supply:
            size *= s + 1
        return size

    def is_single_unit(self) -> bool:
        """True when every s_j = 1 and every valuation lives on subsets of [n]."""
        return all(s == 1 for s in self.supply) and all(is_single_unit_spec(b) for b in self.buyers)

    def bundles(self) -> Iterator[Bundle]:
        return iter_bundles(self.supply)


def iter_bundles(supply: Sequence[int]) -> Iterator[Bundle]:
    """All bundles x <= s in mixed-radix order (item 1 least significant)."""
    for reversed_bundle in itertools.product(*(range(s + 1) for s in reversed(tuple(supply)))):
        yield tuple(reversed(reversed_bundle))


def bundle_index(bundle: Sequence[int], supply: Sequence[int]) -> int:
    """Mixed-radix index of a bundle; equals the bitmask when supply is all ones."""
    index = 0
    radix = 1
    for q, s in zip(bundle, supply):
        index += q * radix
        radix *= s + 1
    return index


def bundle_from_index(index: int, supply: Sequence[int]) -> Bundle:
    quantities = []
    for s in supply:
        quantities.append(index % (s + 1))
        index //= s + 1
    if index:
        raise DomainError("bundle index outside the supply domain")
    return tuple(quantities)


def bundle_of_items(items, n: int) -> Bundle:
    """Single-unit bundle holding the given item indices."""
    bundle = [0] * n
    for j in items:
        bundle[j] += 1
    return tuple(bundle)


def items_of(bundle: Sequence[int]) -> List[int]:
    """Item indices present in a bundle."""
    return [j for j, q in enumerate(bundle) if q > 0]


def as_prices(values: Sequence) -> PriceVector:
    """Convert ints, floats, strings or Fractions to an exact price vector."""
    return tuple(v if isinstance(v, Fraction) else Fraction(v) for v in values)


def price_of(prices: Sequence, bundle: Sequence[int]):
    return sum((p * q for p, q in zip(prices, bundle) if q), Fraction(0))


def check_bundle(instance: MarketInstance, bundle: Sequence[int]) -> Bundle:
    """Raise DomainError unless 0 <= x_j <= s_j."""
    if len(bundle) != instance.n:
        raise DomainError(f"bundle has {len(bundle)} coordinates, market has {instance.n} items")
    for j, (q, s) in enumerate(zip(bundle, instance.supply)):
        if q < 0 or q > s:
            raise DomainError(f"item {j + 1}: quantity {q} outside [0, {s}]")
    return tuple(bundle)


def utility_of_bundle(
    instance: MarketInstance,
    buyer_index: int,
    bundle: Sequence[int],
    prices: Sequence,
    counter: Optional[OracleCounter] = None,
) -> Fraction:
    """u_i(x; p) = v_i(x) - p.x, exactly."""
    bundle = check_bundle(instance, bundle)
    if len(prices) != instance.n:
        raise DomainError(f"price vector has {len(prices)} entries, market has {instance.n} items")
    value = evaluate(instance.buyers[buyer_index], bundle, counter)
    return Fraction(value) - price_of(as_prices(prices), bundle)


def social_welfare(instance: MarketInstance, allocation: Sequence[Sequence[int]]) -> Fraction:
    """Sum of buyer values; validity of the allocation is not required."""
    if len(allocation) != instance.m:
        raise DomainError(f"allocation has {len(allocation)} bundles, market has {instance.m} buyers")
    total = 0
    for spec, bundle in zip(instance.buyers, allocation):
        total += evaluate(spec, check_bundle(instance, bundle))
    return Fraction(total)


@dataclass(frozen=True)
class AllocationReport:
    valid: bool
    item: Optional[int] = None
    demand: Optional[int] = None
    supply: Optional[int] = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "item": None if self.item is None else self.item + 1,
            "demand": self.demand,
            "supply": self.supply,
            "reason": self.reason,
        }


def validate_allocation(instance: MarketInstance, allocation: Sequence[Sequence[int]]) -> AllocationReport:
    """
    Check that the bundles partition the supply.

    Returns:
        AllocationReport naming the first violated item (report-style, never raises)
    """
    if len(allocation) != instance.m:
        return AllocationReport(
            False, reason=f"expected {instance.m} bundles, got {len(allocation)}"
        )
    for i, bundle in enumerate(allocation):
        if len(bundle) != instance.n:
            return AllocationReport(False, reason=f"buyer {i + 1}: bundle has {len(bundle)} coordinates")
        for j, q in enumerate(bundle):
            if q < 0:
                return AllocationReport(False, item=j, reason=f"buyer {i + 1}: negative quantity")
    for j in range(instance.n):
        demand = sum(bundle[j] for bundle in allocation)
        if demand != instance.supply[j]:
            return AllocationReport(
                False,
                item=j,
                demand=demand,
                supply=instance.supply[j],
                reason=f"item {j + 1}: demand {demand}, supply {instance.supply[j]}",
            )
    return AllocationReport(True)


def magnitude_bound(instance: MarketInstance) -> int:
    """
    M = max_i max_x |v_i(x)|, computed analytically per valuation family.

    Solvers search the box [-2M, 2M]^n (with M at least 1).
    """
    return max(_spec_magnitude(spec, instance.supply) for spec in instance.buyers)


def _spec_magnitude(spec: ValuationSpec, supply: Sequence[int]) -> int:
    if spec.kind == "additive":
        positive = sum(w * s for w, s in zip(spec.weights, supply) if w > 0)
        negative = sum(-w * s for w, s in zip(spec.weights, supply) if w < 0)
        return max(positive, negative)
    if spec.kind == "unit_demand":
        return max((a for a, s in zip(spec.weights, supply) if s > 0), default=0)
    if spec.kind == "weighted_matroid_rank":
        return evaluate(spec, tuple(min(s, 1) for s in supply))
    if spec.kind == "explicit_table":
        return max(abs(v) for v in spec.table.values())
    # perturbed: bound each part separately
    base = _spec_magnitude(spec.base, supply)
    extra = sum(abs(w) * s for w, s in zip(spec.weights, supply))
    return abs(spec.scale) * base + extra


@dataclass(frozen=True)
class BuyerWitness:
    """How x^(i) in D(i, p) was established for one buyer."""

    buyer: int
    method: str  # "brute_force" or "local_exchange"
    utility: Fraction
    best_utility: Fraction

    def to_dict(self) -> dict:
        return {
            "buyer": self.buyer + 1,
            "method": self.method,
            "utility": self.utility,
            "best_utility": self.best_utility,
        }


@dataclass(frozen=True)
class EquilibriumCertificate:
    prices: PriceVector
    allocation: Allocation
    witnesses: Tuple[BuyerWitness, ...]
    oracle_calls: Dict[str, int] = field(default_factory=dict)

    def welfare(self, instance: MarketInstance) -> Fraction:
        return social_welfare(instance, self.allocation)


VERDICTS = ("certified", "no-equilibrium-found", "inconclusive")


@dataclass(frozen=True)
class SolveReport:
    """
    Result of any price solver.

    `certificate` is present exactly when verdict == "certified"; `phases`
    carries per-phase oracle counts for the incremental solver.
    """

    prices: Optional[PriceVector]
    certificate: Optional[EquilibriumCertificate]
    verdict: str
    method: str
    iterations: int = 0
    oracle_calls: Dict[str, int] = field(default_factory=dict)
    retries: int = 0
    epsilon: Optional[Fraction] = None
    phases: Tuple[dict, ...] = ()
    notes: Tuple[str, ...] = ()

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"
