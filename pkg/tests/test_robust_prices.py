"""Allocation exchange graphs, zero-weight cycles, robust prices and the isolation pipeline."""

from fractions import Fraction

import numpy as np
import pytest

from core.errors import DomainError, NonOptimalAllocationError, PreconditionError
from core.market import social_welfare, validate_allocation
from solvers.potential import all_greedy, brute_force_demand
from solvers.robust_prices import (
    apply_cycle,
    build_allocation_exchange_graph,
    compute_robust_prices,
    detect_zero_weight_cycle,
    find_allocation_by_isolation,
    isolation_perturb,
    recover_allocation_interior,
)
from verification.brute_force import brute_force_welfare, walrasian_membership

D_OPTIMUM = ((1, 0, 0), (0, 1, 1))
SEVEN_SIXTHS = Fraction(7, 6)


def test_exchange_graph_weights_instance_d(market_d):
    exchange = build_allocation_exchange_graph(market_d, D_OPTIMUM)
    graph = exchange.graph
    # buyer 1 trades item 1 for item 2: 4 - 1
    assert graph[0][1]["weight"] == 3
    # buyer 2 drops item 3: 5 - 3
    assert graph[2][exchange.dummy]["weight"] == 2
    # buyer 1 is the only taker for item 2: 4 - 5
    assert graph[exchange.dummy][1]["weight"] == -1
    assert graph[exchange.dummy][1]["buyer"] == 0
    assert exchange.label(exchange.dummy) == "D"


def test_non_optimal_allocation_has_negative_cycle(market_d):
    with pytest.raises(NonOptimalAllocationError):
        build_allocation_exchange_graph(market_d, ((0, 0, 0), (1, 1, 1)))


def test_invalid_allocation_is_rejected(market_d):
    with pytest.raises(DomainError):
        build_allocation_exchange_graph(market_d, ((1, 0, 0), (0, 1, 0)))


def test_unique_optimum_has_no_zero_cycle(market_d):
    assert detect_zero_weight_cycle(build_allocation_exchange_graph(market_d, D_OPTIMUM)) is None


def test_zero_cycle_moves_to_another_optimum(market_c):
    start = ((1, 1, 0), (0, 0, 1))
    exchange = build_allocation_exchange_graph(market_c, start)
    cycle = detect_zero_weight_cycle(exchange)
    assert cycle is not None
    assert exchange.cycle_weight(cycle) == 0
    moved = apply_cycle(exchange, cycle)
    assert moved != start
    assert validate_allocation(market_c, moved).valid
    assert social_welfare(market_c, moved) == social_welfare(market_c, start)


def test_robust_prices_instance_d(market_d):
    report = compute_robust_prices(market_d, D_OPTIMUM)
    assert report.exists
    assert report.prices == (SEVEN_SIXTHS, SEVEN_SIXTHS, SEVEN_SIXTHS)
    assert report.slack_exchange >= Fraction(1, 3)
    assert report.slack_add_remove >= Fraction(1, 6)
    assert report.robust_radius > 0
    for i, spec in enumerate(market_d.buyers):
        demand = brute_force_demand(spec, report.prices)
        assert demand.full_set == (D_OPTIMUM[i],)


def _cube_samples(prices, count=50, seed=0, grid=1000):
    """Exact uniform samples from the closed cube of half-width 1/(2n) around prices."""
    n = len(prices)
    steps = np.random.default_rng(seed).integers(-grid, grid + 1, size=(count, n))
    return [tuple(p + Fraction(int(k), 2 * n * grid) for p, k in zip(prices, row)) for row in steps]


def test_robust_cube_instance_d(market_d):
    report = compute_robust_prices(market_d, D_OPTIMUM)
    corners = [tuple(p + Fraction(sign, 6) for p in report.prices) for sign in (-1, 1)]
    for shifted in _cube_samples(report.prices) + corners:
        assert walrasian_membership(market_d, shifted, D_OPTIMUM).member


def test_robust_cube_on_corpus(gs_corpus):
    for market in gs_corpus:
        welfare = brute_force_welfare(market)
        if not welfare.unique:
            continue
        optimum = welfare.allocations[0]
        report = compute_robust_prices(market, optimum)
        assert report.exists
        for shifted in _cube_samples(report.prices, seed=market.n):
            assert walrasian_membership(market, shifted, optimum).member


def test_robust_prices_missing_for_multiple_optima(market_c):
    report = compute_robust_prices(market_c, ((1, 1, 0), (0, 0, 1)))
    assert not report.exists
    assert report.prices is None
    assert report.witness_cycle
    assert report.to_dict()["exists"] is False


def test_robust_report_serializes_rationals(market_d):
    data = compute_robust_prices(market_d, D_OPTIMUM).to_dict()
    assert data["prices"] == ["7/6", "7/6", "7/6"]
    assert data["potential"]["D"] == "0/1"


def test_isolation_perturb_is_seeded(market_c):
    first, record = isolation_perturb(market_c, 11)
    again, _ = isolation_perturb(market_c, 11)
    assert first == again
    n, m = market_c.n, market_c.m
    assert record.bound == 2 * m * n ** 3
    assert record.scale == 2 * n * record.bound
    assert all(1 <= w <= record.bound for row in record.weights for w in row)


def test_recover_allocation_at_zero_subgradient(market_d):
    assert recover_allocation_interior(market_d, (2, 2, Fraction(3, 2))) == D_OPTIMUM
    assert recover_allocation_interior(market_d, (SEVEN_SIXTHS,) * 3) == D_OPTIMUM


def test_recover_allocation_rejects_double_cover(market_a):
    # both unit-demand buyers take item 1 at (1, 1)
    with pytest.raises(PreconditionError):
        recover_allocation_interior(market_a, (1, 1))


def test_recover_allocation_requires_zero_subgradient(market_a):
    with pytest.raises(PreconditionError):
        recover_allocation_interior(market_a, (0, 0))


def test_isolation_pipeline_unique_optimum(market_d):
    report = find_allocation_by_isolation(market_d, seed=0)
    assert report.success
    assert report.allocation == D_OPTIMUM
    assert report.welfare == 9


def test_isolation_pipeline_never_accepts_wrong_answers(market_c):
    optimum = brute_force_welfare(market_c).value
    for seed in range(3):
        report = find_allocation_by_isolation(market_c, seed=seed)
        if report.success:
            assert report.welfare == optimum
        else:
            assert report.failures


def test_recovered_bundles_are_demanded_at_shifted_prices(market_d):
    point = (2, 2, Fraction(3, 2))
    gamma = all_greedy(market_d, point).gamma
    shifted = tuple(p + gamma for p in point)
    for spec, bundle in zip(market_d.buyers, recover_allocation_interior(market_d, point)):
        assert bundle in brute_force_demand(spec, shifted).full_set


def test_isolation_bundles_are_demanded_at_shifted_prices(market_d):
    report = find_allocation_by_isolation(market_d, seed=0)
    assert report.success and report.shifted_member
    derived = 0 if report.attempts == 1 else [0, report.attempts - 1]
    perturbed_market, _ = isolation_perturb(market_d, derived)
    shifted = tuple(p + report.gamma for p in report.interior_point)
    for spec, bundle in zip(perturbed_market.buyers, report.allocation):
        assert bundle in brute_force_demand(spec, shifted, perturbed_market.supply).full_set


def test_isolation_makes_the_optimum_unique(market_c):
    assert not brute_force_welfare(market_c).unique
    unique = sum(brute_force_welfare(isolation_perturb(market_c, seed)[0]).unique for seed in range(200))
    assert unique >= 190


@pytest.mark.slow
def test_isolation_pipeline_success_rate(market_c):
    optimum = brute_force_welfare(market_c).value
    successes = 0
    for seed in range(100):
        report = find_allocation_by_isolation(market_c, seed=seed)
        if report.success:
            successes += 1
            assert report.welfare == optimum
        else:
            assert report.failures
    assert successes >= 95
