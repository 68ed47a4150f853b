"""
Incremental Exchange-Graph Solver
Inserts items one at a time; each phase sets the new item's price high,
runs a lexicographic Dijkstra from the collapsed source to the new item and
lowers prices by the distances (a descending auction)
"""

import heapq
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterator, List, NamedTuple, Optional, Sequence, Set, Tuple

import numpy as np

from core.errors import CertificateError, DomainError, InvariantViolation, MalformedInstanceError
from core.market import (
    BuyerWitness,
    EquilibriumCertificate,
    MarketInstance,
    SolveReport,
    bundle_of_items,
)
from core.valuations import OracleCounter, check_monotone, evaluate
from utils.trace import TraceWriter, emit

logger = logging.getLogger(__name__)

SOURCE = -1
AUDIT_MODES = ("every_phase", "final")


class LexDistance(NamedTuple):
    """(weight, hops), compared lexicographically."""

    weight: int
    hops: int

    def extend(self, arc_weight: int) -> "LexDistance":
        return LexDistance(self.weight + arc_weight, self.hops + 1)


@dataclass
class PhaseState:
    """
    Allocation and prices over the items inserted so far.

    Inactive buyers own nothing and are only reachable through the per-item
    heaps `lists[j]` of (-v_i({j}), i); a buyer becomes active on its first gain.
    """

    instance: MarketInstance
    counter: OracleCounter
    singletons: List[List[int]]
    k: int = 0
    inserted: List[int] = field(default_factory=list)
    owner: Dict[int, int] = field(default_factory=dict)
    bundles: List[Set[int]] = field(default_factory=list)
    values: List[int] = field(default_factory=list)
    prices: Dict[int, int] = field(default_factory=dict)
    active: Set[int] = field(default_factory=set)
    lists: List[list] = field(default_factory=list)
    memo: Dict[Tuple[int, FrozenSet[int]], int] = field(default_factory=dict)

    @classmethod
    def start(cls, instance: MarketInstance, counter: OracleCounter) -> "PhaseState":
        n, m = instance.n, instance.m
        singletons = [
            [evaluate(spec, bundle_of_items((j,), n), counter) for j in range(n)]
            for spec in instance.buyers
        ]
        lists = []
        for j in range(n):
            heap = [(-singletons[i][j], i) for i in range(m)]
            heapq.heapify(heap)
            lists.append(heap)
        return cls(
            instance=instance,
            counter=counter,
            singletons=singletons,
            bundles=[set() for _ in range(m)],
            values=[0] * m,
            lists=lists,
        )

    def value(self, buyer: int, items) -> int:
        """Phase-memoized value query."""
        key = (buyer, frozenset(items))
        if key not in self.memo:
            if not key[1]:
                self.memo[key] = 0
            elif len(key[1]) == 1:
                (j,) = key[1]
                self.memo[key] = self.singletons[buyer][j]
            else:
                spec = self.instance.buyers[buyer]
                self.memo[key] = evaluate(spec, bundle_of_items(key[1], self.instance.n), self.counter)
        return self.memo[key]

    def best_inactive(self, item: int) -> Optional[Tuple[int, int]]:
        """(v_i({item}), i) for the best inactive buyer, lowest index on ties."""
        heap = self.lists[item]
        while heap and heap[0][1] in self.active:
            heapq.heappop(heap)
        if not heap:
            return None
        neg_value, buyer = heap[0]
        return -neg_value, buyer


class ExchangeGraphView:
    """
    Exchange graph of the current phase, evaluated lazily.

    Arc (t, j) for t owned by i and j not in S_i has weight
    v_i(S_i) - v_i(S_i + j - t) + p_j - p_t; arc (source, j) has weight
    p_j + min_i [v_i(S_i) - v_i(S_i + j)] over buyers not holding j.
    """

    def __init__(self, state: PhaseState):
        self.state = state

    def source_arc(self, j: int) -> Optional[Tuple[int, int]]:
        """(weight, buyer) of the arc into j, or None when every buyer holds j."""
        state = self.state
        best = None
        for i in sorted(state.active):
            if j in state.bundles[i]:
                continue
            margin = state.values[i] - state.value(i, state.bundles[i] | {j})
            if best is None or (margin, i) < best:
                best = (margin, i)
        inactive = state.best_inactive(j)
        if inactive is not None:
            candidate = (-inactive[0], inactive[1])
            if best is None or candidate < best:
                best = candidate
        if best is None:
            return None
        return state.prices[j] + best[0], best[1]

    def out_arcs(self, t: int) -> Iterator[Tuple[int, int]]:
        state = self.state
        i = state.owner[t]
        held = state.bundles[i]
        for j in state.inserted:
            if j in held:
                continue
            swapped = (held - {t}) | {j}
            weight = state.values[i] - state.value(i, swapped) + state.prices[j] - state.prices[t]
            yield j, weight


@dataclass(frozen=True)
class Augmentation:
    path: Tuple[int, ...]
    gainer: int
    distances: Dict[int, int]
    settled: FrozenSet[int]


def init_phase_price(state: PhaseState, item: int) -> int:
    """
    Opening price of a newly inserted item.

    p_k = max(max_{i, t in S_i} [v_i(S_i + k - t) - v_i(S_i) + p_t],
              max_i [v_i(S_i + k) - v_i(S_i)]),
    the least price making every arc into k non-negative.
    """
    best = None
    for i in sorted(state.active):
        held = state.bundles[i]
        base = state.values[i]
        candidate = state.value(i, held | {item}) - base
        best = candidate if best is None else max(best, candidate)
        for t in held:
            candidate = state.value(i, (held - {t}) | {item}) - base + state.prices[t]
            best = max(best, candidate)
    inactive = state.best_inactive(item)
    if inactive is not None:
        best = inactive[0] if best is None else max(best, inactive[0])
    return best


def shortest_augmentation(state: PhaseState, item: int) -> Augmentation:
    """
    Lexicographic Dijkstra from the source to `item`.

    Keys are (weight, hops, node) so equal-weight paths prefer fewer arcs and
    then lower item indices. The search stops once `item` is settled; every
    node not settled by then gets the distance of `item`.
    """
    graph = ExchangeGraphView(state)
    dist: Dict[int, LexDistance] = {SOURCE: LexDistance(0, 0)}
    pred: Dict[int, int] = {}
    gainer: Dict[int, int] = {}
    settled: Set[int] = set()
    heap = [(0, 0, SOURCE)]
    target_reached = False
    while heap:
        weight, hops, node = heapq.heappop(heap)
        if node in settled or LexDistance(weight, hops) != dist.get(node):
            continue
        settled.add(node)
        if node == item:
            target_reached = True
            break
        here = dist[node]
        if node == SOURCE:
            arcs = []
            for j in state.inserted:
                arc = graph.source_arc(j)
                if arc is not None:
                    arcs.append((j, arc[0], arc[1]))
        else:
            arcs = [(j, w, None) for j, w in graph.out_arcs(node)]
        for j, w, buyer in arcs:
            if w < 0:
                raise InvariantViolation(f"negative arc weight {w} into item {j + 1}")
            if j in settled:
                continue
            candidate = here.extend(w)
            if j not in dist or candidate < dist[j]:
                dist[j] = candidate
                pred[j] = node
                if buyer is not None:
                    gainer[j] = buyer
                heapq.heappush(heap, (candidate.weight, candidate.hops, j))
    if not target_reached:
        raise InvariantViolation(f"item {item + 1} unreachable from the source")

    path = [item]
    while pred[path[-1]] != SOURCE:
        path.append(pred[path[-1]])
    path.reverse()
    cap = dist[item].weight
    distances = {
        j: (dist[j].weight if j in settled else cap) for j in state.inserted
    }
    return Augmentation(
        path=tuple(path), gainer=gainer[path[0]], distances=distances, settled=frozenset(settled - {SOURCE})
    )


def apply_augmentation(state: PhaseState, augmentation: Augmentation) -> PhaseState:
    """
    Perform the swaps along the path and lower every price by its distance.

    The first item goes to the source-arc buyer; along each arc (t, j) the
    previous owner of t gives t up and takes j.
    """
    path = augmentation.path
    if path[-1] != state.inserted[-1]:
        raise InvariantViolation("augmenting path does not end at the inserted item")
    gains: Dict[int, Set[int]] = {}
    losses: Dict[int, Set[int]] = {}
    gains.setdefault(augmentation.gainer, set()).add(path[0])
    for t, j in zip(path, path[1:]):
        previous = state.owner[t]
        losses.setdefault(previous, set()).add(t)
        gains.setdefault(previous, set()).add(j)

    for i in set(gains) | set(losses):
        state.bundles[i] = (state.bundles[i] - losses.get(i, set())) | gains.get(i, set())
    for i, items in gains.items():
        for j in items:
            state.owner[j] = i
    for i in set(gains) | set(losses):
        state.values[i] = state.value(i, state.bundles[i])
    if augmentation.gainer not in state.active:
        state.active.add(augmentation.gainer)

    for j, d in augmentation.distances.items():
        if d < 0:
            raise InvariantViolation(f"negative distance {d} at item {j + 1}")
        state.prices[j] -= d

    owned = [j for bundle in state.bundles for j in bundle]
    if sorted(owned) != sorted(state.inserted):
        raise InvariantViolation("swaps did not produce a partition of the inserted items")
    return state


def audit_local_conditions(state: PhaseState, counter: OracleCounter) -> None:
    """
    Verify the Add, Remove and Swap conditions for every buyer over the inserted items.

    Value queries go to `counter`, kept apart from the solver's own count.
    """
    instance = state.instance
    n = instance.n
    for i, spec in enumerate(instance.buyers):
        held = state.bundles[i]
        base = evaluate(spec, bundle_of_items(held, n), counter)
        utility = base - sum(state.prices[t] for t in held)
        for j in state.inserted:
            if j in held:
                continue
            gained = evaluate(spec, bundle_of_items(held | {j}, n), counter) - state.prices[j]
            if gained > base:
                raise CertificateError(state.k, i, "Add", f"adding item {j + 1} raises utility")
        for t in held:
            dropped = evaluate(spec, bundle_of_items(held - {t}, n), counter) + state.prices[t]
            if dropped > base:
                raise CertificateError(state.k, i, "Remove", f"dropping item {t + 1} raises utility")
            for j in state.inserted:
                if j in held:
                    continue
                swapped = evaluate(spec, bundle_of_items((held - {t}) | {j}, n), counter)
                if swapped - state.prices[j] + state.prices[t] > base:
                    raise CertificateError(
                        state.k, i, "Swap", f"exchanging item {t + 1} for item {j + 1} raises utility"
                    )
        logger.debug("Phase %d: buyer %d holds %s with utility %s", state.k, i + 1, sorted(held), utility)


def resolve_item_order(n: int, order: Optional[Sequence[int]] = None, seed: Optional[int] = None) -> List[int]:
    """Input order, an explicit permutation or a seeded random order."""
    if order is not None:
        order = [int(j) for j in order]
        if sorted(order) != list(range(n)):
            raise DomainError("item order must be a permutation of the items")
        return order
    if seed is not None:
        return [int(j) for j in np.random.default_rng(seed).permutation(n)]
    return list(range(n))


def solve_welfare_incremental(
    instance: MarketInstance,
    counter: Optional[OracleCounter] = None,
    audit: str = "every_phase",
    item_order: Optional[Sequence[int]] = None,
    order_seed: Optional[int] = None,
    trace: Optional[TraceWriter] = None,
) -> SolveReport:
    """
    Welfare-maximizing allocation and Walrasian prices for single-unit
    gross-substitutes markets.

    Args:
        instance: Single-unit market with monotone valuations
        counter: Value-oracle accumulator (a fresh one when omitted)
        audit: "every_phase" checks Add/Remove/Swap after each phase, "final" once at the end
        item_order: Explicit insertion order
        order_seed: Seed for a random insertion order
        trace: Optional JSON-lines trace

    Returns:
        SolveReport with a certified equilibrium and per-phase oracle counts
    """
    if audit not in AUDIT_MODES:
        raise ValueError(f"Unknown audit mode '{audit}'. Expected one of: {', '.join(AUDIT_MODES)}")
    if not instance.is_single_unit():
        raise DomainError("the incremental solver requires a single-unit market")
    for i, spec in enumerate(instance.buyers):
        monotone, reason = check_monotone(spec)
        if not monotone:
            raise MalformedInstanceError(f"valuation is not monotone: {reason}", field=f"buyers[{i + 1}]")

    counter = counter if counter is not None else OracleCounter()
    audit_counter = OracleCounter()
    order = resolve_item_order(instance.n, item_order, order_seed)
    state = PhaseState.start(instance, counter)
    phases = []

    for item in order:
        calls_before = counter.value_calls if state.k else 0
        state.k += 1
        state.memo = {}
        state.inserted.append(item)
        state.prices[item] = init_phase_price(state, item)
        opening = dict(state.prices)
        augmentation = shortest_augmentation(state, item)
        apply_augmentation(state, augmentation)
        phase_calls = counter.value_calls - calls_before
        phases.append({"phase": state.k, "item": item + 1, "value_calls": phase_calls})
        logger.debug(
            "Phase %d: item %d opens at %d, path %s, distance %d",
            state.k, item + 1, opening[item], [j + 1 for j in augmentation.path],
            augmentation.distances[item],
        )
        emit(
            trace,
            phase=state.k,
            item=item + 1,
            opening_price=opening[item],
            path=[j + 1 for j in augmentation.path],
            gainer=augmentation.gainer + 1,
            d={str(j + 1): d for j, d in augmentation.distances.items()},
            price_deltas={str(j + 1): state.prices[j] - opening[j] for j in state.inserted},
            value_calls=phase_calls,
        )
        if audit == "every_phase":
            audit_local_conditions(state, audit_counter)
    if audit == "final":
        audit_local_conditions(state, audit_counter)

    n = instance.n
    prices = tuple(Fraction(state.prices[j]) for j in range(n))
    allocation = tuple(bundle_of_items(state.bundles[i], n) for i in range(instance.m))
    witnesses = tuple(
        BuyerWitness(
            buyer=i,
            method="local_exchange",
            utility=Fraction(state.values[i] - sum(state.prices[j] for j in state.bundles[i])),
            best_utility=Fraction(state.values[i] - sum(state.prices[j] for j in state.bundles[i])),
        )
        for i in range(instance.m)
    )
    certificate = EquilibriumCertificate(
        prices=prices, allocation=allocation, witnesses=witnesses, oracle_calls=counter.as_dict()
    )
    logger.info("Incremental solver: %d phases, %d value calls", len(phases), counter.value_calls)
    return SolveReport(
        prices=prices,
        certificate=certificate,
        verdict="certified",
        method="combinatorial",
        iterations=len(phases),
        oracle_calls=counter.as_dict(),
        phases=tuple(phases),
        notes=(f"audit value calls: {audit_counter.value_calls}",),
    )
