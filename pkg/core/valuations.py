"""
Valuations
Value oracles for the supported valuation families, oracle-call accounting,
the gross-substitutes checker and seeded random instance generators
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import GS_CHECK_ITEM_LIMIT
from core.errors import (
    CheckLimitExceededError,
    DomainError,
    MalformedInstanceError,
)

logger = logging.getLogger(__name__)

Bundle = Tuple[int, ...]

KINDS = ("explicit_table", "additive", "unit_demand", "weighted_matroid_rank", "perturbed")
GS_FAMILIES = ("additive", "unit_demand", "matroid_rank_mix")


@dataclass
class OracleCounter:
    """Per-run oracle call accumulator (value, demand, aggregate demand)."""

    value_calls: int = 0
    demand_calls: int = 0
    aggregate_calls: int = 0

    def as_dict(self) -> Dict[str, int]:
        return {
            "value_calls": self.value_calls,
            "demand_calls": self.demand_calls,
            "aggregate_calls": self.aggregate_calls,
        }

    def copy(self) -> "OracleCounter":
        return OracleCounter(self.value_calls, self.demand_calls, self.aggregate_calls)


@dataclass(frozen=True)
class MatroidSpec:
    """Uniform matroid of a given rank, or a partition matroid (blocks + capacities)."""

    type: str
    rank: int = 0
    blocks: Tuple[Tuple[int, ...], ...] = ()
    capacities: Tuple[int, ...] = ()


@dataclass(frozen=True)
class ValuationSpec:
    """
    Immutable description of one buyer's valuation.

    `weights` holds the additive weights, the unit-demand values, the matroid
    item weights or the additive perturbation, depending on `kind`.
    """

    kind: str
    n: int
    weights: Tuple[int, ...] = ()
    table: Optional[Mapping[Bundle, int]] = field(default=None, hash=False)
    matroid: Optional[MatroidSpec] = None
    base: Optional["ValuationSpec"] = None
    scale: int = 1


def _int_vector(values, name: str) -> Tuple[int, ...]:
    try:
        result = tuple(int(v) for v in values)
    except (TypeError, ValueError):
        raise MalformedInstanceError("expected a list of integers", field=name)
    for original, converted in zip(values, result):
        if converted != original:
            raise MalformedInstanceError("expected a list of integers", field=name)
    return result


def additive(weights: Sequence[int]) -> ValuationSpec:
    """v(x) = sum_j w_j x_j."""
    w = _int_vector(weights, "weights")
    if not w:
        raise MalformedInstanceError("at least one item is required", field="weights")
    return ValuationSpec(kind="additive", n=len(w), weights=w)


def unit_demand(values: Sequence[int]) -> ValuationSpec:
    """v(S) = max_{j in S} a_j, v(empty) = 0."""
    a = _int_vector(values, "values")
    if not a:
        raise MalformedInstanceError("at least one item is required", field="values")
    if any(v < 0 for v in a):
        raise MalformedInstanceError("unit-demand values must be non-negative", field="values")
    return ValuationSpec(kind="unit_demand", n=len(a), weights=a)


def explicit_table(table: Mapping[Sequence[int], int], n: int) -> ValuationSpec:
    """Valuation given by a full table keyed by quantity vectors."""
    normalized: Dict[Bundle, int] = {}
    for key, value in table.items():
        bundle = tuple(int(q) for q in key)
        if len(bundle) != n or any(q < 0 for q in bundle):
            raise MalformedInstanceError(f"invalid bundle key {key}", field="table")
        if int(value) != value:
            raise MalformedInstanceError(f"non-integer value {value} for bundle {key}", field="table")
        normalized[bundle] = int(value)
    empty = (0,) * n
    if normalized.get(empty, 0) != 0:
        raise MalformedInstanceError("v(empty bundle) must be 0", field="table")
    normalized[empty] = 0
    return ValuationSpec(kind="explicit_table", n=n, table=normalized)


def uniform_matroid(rank: int, weights: Sequence[int]) -> ValuationSpec:
    """Weighted rank of the uniform matroid: the `rank` largest weights in S."""
    w = _int_vector(weights, "weights")
    if any(v < 0 for v in w):
        raise MalformedInstanceError("matroid weights must be non-negative", field="weights")
    if int(rank) < 0:
        raise MalformedInstanceError("rank must be non-negative", field="matroid.rank")
    return ValuationSpec(
        kind="weighted_matroid_rank",
        n=len(w),
        weights=w,
        matroid=MatroidSpec(type="uniform", rank=int(rank)),
    )


def partition_matroid(
    blocks: Sequence[Sequence[int]], capacities: Sequence[int], weights: Sequence[int]
) -> ValuationSpec:
    """Weighted rank of a partition matroid; items outside every block are loops."""
    w = _int_vector(weights, "weights")
    if any(v < 0 for v in w):
        raise MalformedInstanceError("matroid weights must be non-negative", field="weights")
    blocks_t = tuple(tuple(int(j) for j in block) for block in blocks)
    caps = _int_vector(capacities, "matroid.capacities")
    if len(blocks_t) != len(caps):
        raise MalformedInstanceError("one capacity per block is required", field="matroid.capacities")
    seen = set()
    for block in blocks_t:
        for j in block:
            if j < 0 or j >= len(w) or j in seen:
                raise MalformedInstanceError(f"invalid or repeated item {j + 1}", field="matroid.blocks")
            seen.add(j)
    if any(c < 0 for c in caps):
        raise MalformedInstanceError("capacities must be non-negative", field="matroid.capacities")
    return ValuationSpec(
        kind="weighted_matroid_rank",
        n=len(w),
        weights=w,
        matroid=MatroidSpec(type="partition", blocks=blocks_t, capacities=caps),
    )


def perturbed(base: ValuationSpec, scale: int, weights: Sequence[int]) -> ValuationSpec:
    """scale * base(x) + sum_j w_j x_j."""
    w = _int_vector(weights, "weights")
    if len(w) != base.n:
        raise MalformedInstanceError("perturbation length must match item count", field="weights")
    return ValuationSpec(kind="perturbed", n=base.n, weights=w, base=base, scale=int(scale))


def _matroid_value(spec: ValuationSpec, bundle: Bundle) -> int:
    weights = spec.weights
    matroid = spec.matroid
    if matroid.type == "uniform":
        chosen = sorted((weights[j] for j, q in enumerate(bundle) if q > 0), reverse=True)
        return sum(chosen[: matroid.rank])
    total = 0
    for block, capacity in zip(matroid.blocks, matroid.capacities):
        chosen = sorted((weights[j] for j in block if bundle[j] > 0), reverse=True)
        total += sum(chosen[:capacity])
    return total


def _value(spec: ValuationSpec, bundle: Bundle) -> int:
    kind = spec.kind
    if kind == "additive":
        return sum(w * q for w, q in zip(spec.weights, bundle))
    if kind == "unit_demand":
        return max((a for a, q in zip(spec.weights, bundle) if q > 0), default=0)
    if kind == "weighted_matroid_rank":
        return _matroid_value(spec, bundle)
    if kind == "explicit_table":
        try:
            return spec.table[bundle]
        except KeyError:
            raise MalformedInstanceError(f"missing table entry for bundle {list(bundle)}", field="table")
    if kind == "perturbed":
        return spec.scale * _value(spec.base, bundle) + sum(
            w * q for w, q in zip(spec.weights, bundle)
        )
    raise MalformedInstanceError(f"unknown valuation kind '{kind}'", field="kind")


def evaluate(spec: ValuationSpec, bundle: Sequence[int], counter: Optional[OracleCounter] = None) -> int:
    """
    Value oracle.

    Args:
        spec: Valuation to query
        bundle: Quantity vector of length spec.n
        counter: Optional accumulator; value_calls is incremented by one

    Returns:
        The integer value v(bundle)
    """
    if len(bundle) != spec.n:
        raise DomainError(f"bundle has {len(bundle)} coordinates, valuation has {spec.n} items")
    if counter is not None:
        counter.value_calls += 1
    return _value(spec, tuple(bundle))


def is_single_unit_spec(spec: ValuationSpec) -> bool:
    """True unless the valuation is a table with a multi-unit key."""
    if spec.kind == "explicit_table":
        return all(q <= 1 for key in spec.table for q in key)
    if spec.kind == "perturbed":
        return is_single_unit_spec(spec.base)
    return True


def subset_bundle(items, n: int) -> Bundle:
    """Indicator bundle of a set of item indices."""
    bundle = [0] * n
    for j in items:
        bundle[j] = 1
    return tuple(bundle)


def check_monotone(spec: ValuationSpec, supply: Optional[Sequence[int]] = None) -> Tuple[bool, Optional[str]]:
    """
    Check v(x) <= v(x + e_j) over the whole domain.

    Returns:
        (True, None) or (False, description of the first violation)
    """
    if spec.kind == "additive":
        for j, w in enumerate(spec.weights):
            if w < 0:
                return False, f"item {j + 1} has negative weight {w}"
        return True, None
    if spec.kind in ("unit_demand", "weighted_matroid_rank"):
        return True, None
    if spec.kind == "perturbed":
        if spec.scale < 0:
            return False, f"negative scale {spec.scale}"
        for j, w in enumerate(spec.weights):
            if w < 0:
                return False, f"item {j + 1} has negative perturbation {w}"
        return check_monotone(spec.base, supply)
    bounds = tuple(supply) if supply is not None else (1,) * spec.n
    for bundle in itertools.product(*(range(s + 1) for s in bounds)):
        value = _value(spec, bundle)
        for j in range(spec.n):
            if bundle[j] < bounds[j]:
                larger = bundle[:j] + (bundle[j] + 1,) + bundle[j + 1:]
                if _value(spec, larger) < value:
                    return False, f"v({list(larger)}) < v({list(bundle)})"
    return True, None


@dataclass(frozen=True)
class ExchangeViolation:
    """Bases B, B' of the n-uniform matroid on 2n elements and u in B \\ B' with no valid exchange."""

    basis: Tuple[int, ...]
    other_basis: Tuple[int, ...]
    removed: int

    def to_dict(self) -> dict:
        return {
            "basis": list(self.basis),
            "other_basis": list(self.other_basis),
            "removed": self.removed,
        }


@dataclass(frozen=True)
class GSCheckResult:
    is_gs: bool
    counterexample: Optional[ExchangeViolation] = None

    def to_dict(self) -> dict:
        return {
            "gross_substitutes": self.is_gs,
            "counterexample": self.counterexample.to_dict() if self.counterexample else None,
        }


def _lifted_bases(n: int, x_mask: int, y_mask: int) -> Tuple[List[int], List[int]]:
    """Worst-case dummy completion: the smaller dummy block nests inside the larger."""
    x_items = [j for j in range(n) if x_mask >> j & 1]
    y_items = [j for j in range(n) if y_mask >> j & 1]
    dummies = list(range(n, 2 * n))
    basis = x_items + dummies[: n - len(x_items)]
    other = y_items + dummies[: n - len(y_items)]
    return basis, other


def check_gross_substitutes(spec: ValuationSpec) -> GSCheckResult:
    """
    Exact gross-substitutes test through the valuated-matroid exchange property.

    w(B) = v(B ∩ [n]) on the n-subsets of a doubled ground set [2n] (items
    n..2n-1 are dummies) must satisfy, for all bases B, B' and u in B \\ B',
    w(B) + w(B') <= w(B - u + v) + w(B' - v + u) for some v in B' \\ B.
    Dummies are interchangeable, so it suffices to range over the real parts
    X, Y of B, B' and the worst-case dummy completion.

    Returns:
        GSCheckResult with the violating (B, B', u) when the test fails
    """
    n = spec.n
    if n > GS_CHECK_ITEM_LIMIT:
        raise CheckLimitExceededError("exceeds-check-limit (items)", n, GS_CHECK_ITEM_LIMIT)
    if not is_single_unit_spec(spec):
        raise DomainError("the gross-substitutes checker is defined for single-unit valuations only")

    size = 1 << n
    values = [_value(spec, tuple((mask >> j) & 1 for j in range(n))) for mask in range(size)]
    popcount = [bin(mask).count("1") for mask in range(size)]

    for x in range(size):
        vx = values[x]
        for y in range(size):
            total = vx + values[y]
            only_x = x & ~y
            only_y = y & ~x
            # real u in X \ Y
            for u in range(n):
                if not only_x >> u & 1:
                    continue
                ok = popcount[y] < popcount[x] and total <= values[x & ~(1 << u)] + values[y | (1 << u)]
                if not ok:
                    for j in range(n):
                        if only_y >> j & 1 and total <= (
                            values[(x & ~(1 << u)) | (1 << j)] + values[(y & ~(1 << j)) | (1 << u)]
                        ):
                            ok = True
                            break
                if not ok:
                    basis, other = _lifted_bases(n, x, y)
                    return GSCheckResult(False, ExchangeViolation(tuple(basis), tuple(other), u))
            # dummy u, only exposed when the other basis has fewer dummies
            if popcount[y] > popcount[x]:
                ok = any(
                    only_y >> j & 1 and total <= values[x | (1 << j)] + values[y & ~(1 << j)]
                    for j in range(n)
                )
                if not ok:
                    basis, other = _lifted_bases(n, x, y)
                    dummy = basis[-1]
                    return GSCheckResult(False, ExchangeViolation(tuple(basis), tuple(other), dummy))
    return GSCheckResult(True, None)


def _random_partition_matroid(rng: np.random.Generator, n: int, max_value: int) -> ValuationSpec:
    block_count = int(rng.integers(1, n + 1))
    labels = rng.integers(0, block_count, size=n)
    blocks = [[j for j in range(n) if labels[j] == b] for b in range(block_count)]
    blocks = [block for block in blocks if block]
    capacities = [int(rng.integers(1, len(block) + 1)) for block in blocks]
    weights = rng.integers(0, max_value + 1, size=n).tolist()
    return partition_matroid(blocks, capacities, weights)


def _random_gs_spec(rng: np.random.Generator, family: str, n: int, max_value: int) -> ValuationSpec:
    if family == "additive":
        return additive(rng.integers(0, max_value + 1, size=n).tolist())
    if family == "unit_demand":
        return unit_demand(rng.integers(0, max_value + 1, size=n).tolist())
    choice = int(rng.integers(0, 4))
    if choice == 0:
        rank = int(rng.integers(1, n + 1))
        return uniform_matroid(rank, rng.integers(0, max_value + 1, size=n).tolist())
    if choice == 1:
        return _random_partition_matroid(rng, n, max_value)
    if choice == 2:
        return additive(rng.integers(0, max_value + 1, size=n).tolist())
    return unit_demand(rng.integers(0, max_value + 1, size=n).tolist())


def generate_random_gs(family: str, n: int, m: int, max_value: int, seed: int):
    """
    Seeded random single-unit market whose buyers are gross substitutes.

    Args:
        family: 'additive', 'unit_demand' or 'matroid_rank_mix'
        n: Number of items
        m: Number of buyers
        max_value: Largest per-item weight drawn
        seed: Seed of the numpy generator

    Returns:
        MarketInstance with unit supply
    """
    from core.market import MarketInstance

    if family not in GS_FAMILIES:
        raise ValueError(f"Unknown family '{family}'. Expected one of: {', '.join(GS_FAMILIES)}")
    if n < 1 or m < 1:
        raise ValueError("items and buyers must be positive")
    rng = np.random.default_rng(seed)
    buyers = tuple(_random_gs_spec(rng, family, n, max_value) for _ in range(m))
    return MarketInstance(n=n, supply=(1,) * n, buyers=buyers)


def generate_random_general(n: int, m: int, max_supply: int, max_value: int, seed: int):
    """Seeded random multi-unit market with unstructured explicit tables."""
    from core.market import MarketInstance

    if n < 1 or m < 1 or max_supply < 1:
        raise ValueError("items, buyers and supply must be positive")
    rng = np.random.default_rng(seed)
    supply = tuple(int(s) for s in rng.integers(1, max_supply + 1, size=n))
    domain = list(itertools.product(*(range(s + 1) for s in supply)))
    buyers = []
    for _ in range(m):
        values = rng.integers(0, max_value + 1, size=len(domain))
        table = {bundle: int(value) for bundle, value in zip(domain, values)}
        table[(0,) * n] = 0
        buyers.append(explicit_table(table, n))
    return MarketInstance(n=n, supply=supply, buyers=tuple(buyers))
