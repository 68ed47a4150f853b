"""
Robust Prices
Allocation exchange graph, zero-weight cycles as non-uniqueness witnesses,
robust Walrasian prices with slack, isolation perturbation and allocation
recovery from interior minimizers of the regularized potential
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from config import resolve_budget
from core.errors import (
    DomainError,
    InvariantViolation,
    NonOptimalAllocationError,
    PreconditionError,
)
from core.market import (
    Allocation,
    MarketInstance,
    PriceVector,
    as_prices,
    bundle_of_items,
    items_of,
    magnitude_bound,
    social_welfare,
    validate_allocation,
)
from core.valuations import evaluate, perturbed
from solvers.cutting_plane import OracleAnswer, ellipsoid_minimize, interior_query_budget
from solvers.potential import all_greedy, brute_force_demand, evaluate_potential
from verification.brute_force import allocation_count, brute_force_welfare, walrasian_membership

logger = logging.getLogger(__name__)

SUPER_SOURCE = -1


@dataclass(frozen=True)
class IsolationRecord:
    """Scale B, weight bound N and the drawn weights w_i(j), enough to map optima back."""

    scale: int
    bound: int
    weights: Tuple[Tuple[int, ...], ...]


@dataclass
class AllocationExchangeGraph:
    """
    Items 0..n-1 plus one node standing for every buyer's dummy items.

    Arc (j, k) for j owned by i and k not: w = v_i(S_i) - v_i(S_i + k - j).
    Arc (j, D): the owner drops j. Arc (D, k): the cheapest buyer not owning k
    takes it (stored in the arc's `buyer` attribute). A price vector is
    Walrasian for the allocation iff p_tail - p_head <= w on every arc, with p_D = 0.
    """

    graph: nx.DiGraph
    allocation: Allocation
    n: int
    m: int

    @property
    def dummy(self) -> int:
        return self.n

    def label(self, node: int):
        return "D" if node == self.dummy else node + 1

    def cycle_weight(self, cycle: Sequence[int]) -> int:
        return sum(self.graph[a][b]["weight"] for a, b in zip(cycle, list(cycle[1:]) + [cycle[0]]))


def build_allocation_exchange_graph(instance: MarketInstance, allocation: Sequence[Sequence[int]]) -> AllocationExchangeGraph:
    """
    Exchange graph of an allocation.

    Raises:
        NonOptimalAllocationError: the graph has a negative cycle (the allocation is not welfare-optimal)
    """
    if not instance.is_single_unit():
        raise DomainError("the allocation exchange graph is defined for single-unit markets")
    allocation = tuple(tuple(int(q) for q in bundle) for bundle in allocation)
    report = validate_allocation(instance, allocation)
    if not report.valid:
        raise DomainError(f"invalid allocation: {report.reason}")

    n, m = instance.n, instance.m
    dummy = n
    held = [set(items_of(bundle)) for bundle in allocation]
    owner = {j: i for i in range(m) for j in held[i]}
    base = [evaluate(spec, bundle) for spec, bundle in zip(instance.buyers, allocation)]

    def value(i: int, items) -> int:
        return evaluate(instance.buyers[i], bundle_of_items(items, n))

    graph = nx.DiGraph()
    graph.add_nodes_from(range(n + 1))
    for j in range(n):
        i = owner[j]
        for k in range(n):
            if k in held[i]:
                continue
            graph.add_edge(j, k, weight=base[i] - value(i, (held[i] - {j}) | {k}), buyer=i)
        graph.add_edge(j, dummy, weight=base[i] - value(i, held[i] - {j}), buyer=i)
    for k in range(n):
        best = None
        for i in range(m):
            if k in held[i]:
                continue
            weight = base[i] - value(i, held[i] | {k})
            if best is None or weight < best[0]:
                best = (weight, i)
        if best is not None:
            graph.add_edge(dummy, k, weight=best[0], buyer=best[1])

    exchange = AllocationExchangeGraph(graph=graph, allocation=allocation, n=n, m=m)
    if nx.negative_edge_cycle(graph, weight="weight"):
        cycle = _negative_cycle(graph)
        raise NonOptimalAllocationError([exchange.label(v) for v in cycle])
    return exchange


def _with_super_source(graph: nx.DiGraph, reverse: bool = False) -> nx.DiGraph:
    augmented = graph.reverse(copy=True) if reverse else graph.copy()
    augmented.add_node(SUPER_SOURCE)
    for node in graph.nodes:
        augmented.add_edge(SUPER_SOURCE, node, weight=0)
    return augmented


def _negative_cycle(graph: nx.DiGraph) -> List[int]:
    cycle = nx.find_negative_cycle(_with_super_source(graph), SUPER_SOURCE, weight="weight")
    if cycle and cycle[0] == cycle[-1]:
        cycle = cycle[:-1]
    return cycle


def _potentials(graph: nx.DiGraph, reverse: bool = False) -> Dict[int, int]:
    lengths = nx.single_source_bellman_ford_path_length(
        _with_super_source(graph, reverse), SUPER_SOURCE, weight="weight"
    )
    lengths.pop(SUPER_SOURCE, None)
    return lengths


def detect_zero_weight_cycle(exchange: AllocationExchangeGraph) -> Optional[List[int]]:
    """
    Shortest (fewest arcs) zero-weight cycle, or None when the optimum is unique.

    Potentials phi from Bellman-Ford make every reduced weight
    w + phi(tail) - phi(head) non-negative; zero-weight cycles are exactly the
    cycles of the tight subgraph.
    """
    graph = exchange.graph
    phi = _potentials(graph)
    tight = nx.DiGraph()
    tight.add_nodes_from(graph.nodes)
    for a, b, data in graph.edges(data=True):
        if data["weight"] + phi[a] - phi[b] == 0:
            tight.add_edge(a, b)

    best: Optional[List[int]] = None
    for a, b in sorted(tight.edges):
        path = _bfs_path(tight, b, a)
        if path is None:
            continue
        cycle = [a] + path[:-1]
        if best is None or len(cycle) < len(best):
            best = cycle
    if best is not None:
        logger.debug("Zero-weight cycle: %s", [exchange.label(v) for v in best])
    return best


def _bfs_path(graph: nx.DiGraph, start: int, goal: int) -> Optional[List[int]]:
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            path = [node]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        for nxt in sorted(graph.successors(node)):
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    return None


def apply_cycle(exchange: AllocationExchangeGraph, cycle: Sequence[int]) -> Allocation:
    """
    Trade items around a cycle.

    For each arc (a, b) the previous owner of a gives up a and takes b; on an
    arc out of the dummy node the arc's buyer takes b.
    """
    n = exchange.n
    held = [set(items_of(bundle)) for bundle in exchange.allocation]
    owner = {j: i for i in range(exchange.m) for j in held[i]}
    gains: Dict[int, set] = {}
    losses: Dict[int, set] = {}
    for a, b in zip(cycle, list(cycle[1:]) + [cycle[0]]):
        if a == exchange.dummy:
            taker = exchange.graph[a][b]["buyer"]
        else:
            taker = owner[a]
            losses.setdefault(taker, set()).add(a)
        if b != exchange.dummy:
            gains.setdefault(taker, set()).add(b)
    for i in range(exchange.m):
        held[i] = (held[i] - losses.get(i, set())) | gains.get(i, set())
    return tuple(bundle_of_items(sorted(items), n) for items in held)


@dataclass(frozen=True)
class RobustPriceReport:
    exists: bool
    prices: Optional[PriceVector] = None
    slack: Optional[Fraction] = None
    slack_exchange: Optional[Fraction] = None
    slack_add_remove: Optional[Fraction] = None
    robust_radius: Optional[Fraction] = None
    witness_cycle: Optional[Tuple] = None
    potential: Dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def text(x):
            return None if x is None else f"{x.numerator}/{x.denominator}"

        return {
            "exists": self.exists,
            "prices": None if self.prices is None else [text(p) for p in self.prices],
            "slack": text(self.slack),
            "slack_exchange": text(self.slack_exchange),
            "slack_add_remove": text(self.slack_add_remove),
            "robust_radius": text(self.robust_radius),
            "witness_cycle": None if self.witness_cycle is None else list(self.witness_cycle),
            "potential": {str(k): text(v) for k, v in self.potential.items()},
        }


def compute_robust_prices(instance: MarketInstance, optimal_allocation: Sequence[Sequence[int]]) -> RobustPriceReport:
    """
    Robust Walrasian prices for a uniquely optimal allocation.

    Every weight is scaled by 2n and loses one unit per item endpoint, so the
    shortest-path prices (rescaled by 1/(2n)) keep slack 1/n on every exchange
    inequality and 1/(2n) on every add/remove inequality. A zero-weight cycle
    means the optimum is not unique and is returned as the witness instead.
    """
    exchange = build_allocation_exchange_graph(instance, optimal_allocation)
    cycle = detect_zero_weight_cycle(exchange)
    if cycle is not None:
        return RobustPriceReport(exists=False, witness_cycle=tuple(exchange.label(v) for v in cycle))

    n = instance.n
    dummy = exchange.dummy
    scaled = nx.DiGraph()
    scaled.add_nodes_from(exchange.graph.nodes)
    for a, b, data in exchange.graph.edges(data=True):
        cost = (a != dummy) + (b != dummy)
        scaled.add_edge(a, b, weight=2 * n * data["weight"] - cost)
    if nx.negative_edge_cycle(scaled, weight="weight"):
        raise InvariantViolation("scaled exchange graph has a negative cycle")

    # p_tail - p_head <= w  <=>  p_tail <= p_head + w: distances on the reversed graph
    dist = _potentials(scaled, reverse=True)
    shift = dist[dummy]
    prices = tuple(Fraction(dist[j] - shift, 2 * n) for j in range(n))

    def price(node: int) -> Fraction:
        return Fraction(0) if node == dummy else prices[node]

    slack_exchange = None
    slack_add_remove = None
    for a, b, data in exchange.graph.edges(data=True):
        gap = data["weight"] - (price(a) - price(b))
        if a == dummy or b == dummy:
            slack_add_remove = gap if slack_add_remove is None else min(slack_add_remove, gap)
        else:
            slack_exchange = gap if slack_exchange is None else min(slack_exchange, gap)
    if slack_exchange is not None and slack_exchange < Fraction(1, n):
        raise InvariantViolation(f"exchange slack {slack_exchange} below 1/{n}")
    if slack_add_remove is not None and slack_add_remove < Fraction(1, 2 * n):
        raise InvariantViolation(f"add/remove slack {slack_add_remove} below 1/{2 * n}")

    for i, spec in enumerate(instance.buyers):
        demand = brute_force_demand(spec, prices, instance.supply)
        if demand.full_set != (exchange.allocation[i],):
            raise InvariantViolation(f"buyer {i + 1} does not uniquely demand its bundle at the robust prices")

    slacks = [s for s in (slack_exchange, slack_add_remove) if s is not None]
    radii = []
    if slack_exchange is not None:
        radii.append(slack_exchange / 2)
    if slack_add_remove is not None:
        radii.append(slack_add_remove)
    potential = {exchange.label(v): Fraction(d - shift, 2 * n) for v, d in dist.items()}
    return RobustPriceReport(
        exists=True,
        prices=prices,
        slack=min(slacks) if slacks else None,
        slack_exchange=slack_exchange,
        slack_add_remove=slack_add_remove,
        robust_radius=min(radii) if radii else None,
        potential=potential,
    )


def isolation_perturb(instance: MarketInstance, seed) -> Tuple[MarketInstance, IsolationRecord]:
    """
    Scale every valuation by B = 2nN and add weights w_i(j) uniform in [1, N], N = 2mn^3.

    Any optimum of the perturbed market is optimal for the original one, and
    the perturbed optimum is unique with probability at least 1 - 1/(2n^2).
    """
    n, m = instance.n, instance.m
    N = 2 * m * n ** 3
    B = 2 * n * N
    rng = np.random.default_rng(seed)
    weights = rng.integers(1, N + 1, size=(m, n))
    rows = tuple(tuple(int(w) for w in row) for row in weights)
    buyers = tuple(perturbed(spec, B, row) for spec, row in zip(instance.buyers, rows))
    record = IsolationRecord(scale=B, bound=N, weights=rows)
    return MarketInstance(n=n, supply=instance.supply, buyers=buyers), record


def recover_allocation_interior(instance: MarketInstance, interior_price: Sequence) -> Allocation:
    """
    AllGreedy sets at a point where the regularized potential has zero subgradient.

    Raises:
        PreconditionError: the subgradient is not zero; keep minimizing or perturb
    """
    result = all_greedy(instance, as_prices(interior_price))
    if any(result.subgradient):
        raise PreconditionError(
            f"regularized subgradient {list(result.subgradient)} is not zero; continue minimizing or perturb"
        )
    return tuple(bundle_of_items(sorted(items), instance.n) for items in result.sets)


@dataclass(frozen=True)
class IsolationReport:
    success: bool
    allocation: Optional[Allocation] = None
    interior_point: Optional[PriceVector] = None
    gamma: Optional[Fraction] = None
    shifted_member: Optional[bool] = None
    unshifted_member: Optional[bool] = None
    welfare: Optional[Fraction] = None
    optimal_welfare: Optional[Fraction] = None
    attempts: int = 0
    iterations: int = 0
    failures: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        def text(x):
            return None if x is None else f"{x.numerator}/{x.denominator}"

        return {
            "success": self.success,
            "allocation": None
            if self.allocation is None
            else [[j + 1 for j in items_of(bundle)] for bundle in self.allocation],
            "interior_point": None if self.interior_point is None else [text(p) for p in self.interior_point],
            "gamma": text(self.gamma),
            "shifted_member": self.shifted_member,
            "unshifted_member": self.unshifted_member,
            "welfare": text(self.welfare),
            "optimal_welfare": text(self.optimal_welfare),
            "attempts": self.attempts,
            "iterations": self.iterations,
            "failures": list(self.failures),
        }


def _interior_search(perturbed_instance: MarketInstance):
    n = perturbed_instance.n
    M = max(magnitude_bound(perturbed_instance), 1)
    radius = 2 * M * math.sqrt(n)
    budget = interior_query_budget(n, radius, Fraction(1, n))

    def callback(point: PriceVector) -> OracleAnswer:
        answer = evaluate_potential(perturbed_instance, point, "regularized")
        return OracleAnswer(subgradient=answer.subgradient, value=answer.value)

    return ellipsoid_minimize(callback, M, Fraction(1, 2 * n), max_iters=budget, dimension=n, lipschitz=1.0)


def find_allocation_by_isolation(
    instance: MarketInstance, seed: int = 0, attempts: int = 3, budget: Optional[int] = None
) -> IsolationReport:
    """
    Perturb, find an interior minimizer of the regularized potential and
    read off the allocation; every answer is verified against the original market.

    Attempt k > 0 reseeds the perturbation with (seed, k).
    """
    if not instance.is_single_unit():
        raise DomainError("allocation recovery through the regularized potential needs a single-unit market")
    budget = resolve_budget(budget)
    optimum = None
    if allocation_count(instance) <= budget:
        optimum = brute_force_welfare(instance, budget).value
    failures: List[str] = []
    iterations = 0
    for attempt in range(attempts):
        derived = seed if attempt == 0 else [seed, attempt]
        market, _ = isolation_perturb(instance, derived)
        state = _interior_search(market)
        iterations += state.iterations
        if state.zero_point is None:
            failures.append(f"attempt {attempt + 1}: no zero-subgradient query ({state.stop_reason})")
            continue
        point = state.zero_point
        allocation = recover_allocation_interior(market, point)
        gamma = all_greedy(market, point).gamma
        shifted = tuple(p + gamma for p in point)
        shifted_member = walrasian_membership(market, shifted, allocation, budget).member
        unshifted_member = walrasian_membership(market, point, allocation, budget).member
        welfare = social_welfare(instance, allocation)
        optimal = welfare == optimum if optimum is not None else shifted_member
        if not optimal:
            failures.append(f"attempt {attempt + 1}: recovered allocation is not optimal (welfare {welfare})")
            continue
        logger.info("Isolation pipeline succeeded on attempt %d", attempt + 1)
        return IsolationReport(
            success=True,
            allocation=allocation,
            interior_point=point,
            gamma=gamma,
            shifted_member=shifted_member,
            unshifted_member=unshifted_member,
            welfare=welfare,
            optimal_welfare=optimum,
            attempts=attempt + 1,
            iterations=iterations,
            failures=tuple(failures),
        )
    logger.warning("Isolation pipeline failed after %d attempts", attempts)
    return IsolationReport(
        success=False, optimal_welfare=optimum, attempts=attempts, iterations=iterations, failures=tuple(failures)
    )
