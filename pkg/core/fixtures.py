"""
Canonical Markets
Small reference markets shared by tests, docs and the CLI examples
"""

from core.market import MarketInstance
from core.valuations import additive, explicit_table, unit_demand, uniform_matroid


def instance_a() -> MarketInstance:
    """Two unit-supply items, three buyers with v(S) = 1 for every non-empty S."""
    buyers = tuple(unit_demand([1, 1]) for _ in range(3))
    return MarketInstance(n=2, supply=(1, 1), buyers=buyers)


def instance_b() -> MarketInstance:
    """One additive buyer with weights (3, 5)."""
    return MarketInstance(n=2, supply=(1, 1), buyers=(additive([3, 5]),))


def instance_c() -> MarketInstance:
    """v1 = min(|S|, 2), v2 additive (1, 1, 1); several optimal allocations."""
    return MarketInstance(
        n=3,
        supply=(1, 1, 1),
        buyers=(uniform_matroid(2, [1, 1, 1]), additive([1, 1, 1])),
    )


def instance_d() -> MarketInstance:
    """Additive (4, 1, 1) and (1, 3, 2); unique optimum {1} -> buyer 1, {2, 3} -> buyer 2."""
    return MarketInstance(
        n=3,
        supply=(1, 1, 1),
        buyers=(additive([4, 1, 1]), additive([1, 3, 2])),
    )


def complements_table(pair_value: int = 1):
    """Pure complements on two items: only the pair is worth anything."""
    return explicit_table({(0, 0): 0, (1, 0): 0, (0, 1): 0, (1, 1): pair_value}, 2)


def complements_market() -> MarketInstance:
    """
    A complements buyer (pair worth 3) against a unit-demand buyer (2, 2).

    The fractional optimum 7/2 beats every allocation (3), so no Walrasian
    equilibrium exists.
    """
    return MarketInstance(n=2, supply=(1, 1), buyers=(complements_table(3), unit_demand([2, 2])))


def identical_complements() -> MarketInstance:
    """Two copies of the pure complements table; (1, 0) is a Walrasian price."""
    return MarketInstance(n=2, supply=(1, 1), buyers=(complements_table(), complements_table()))


FIXTURES = {
    "A": instance_a,
    "B": instance_b,
    "C": instance_c,
    "D": instance_d,
    "complements": complements_market,
    "identical_complements": identical_complements,
}
