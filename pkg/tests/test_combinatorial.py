"""Incremental exchange-graph solver."""

import json
from fractions import Fraction

import pytest

from core.errors import DomainError, MalformedInstanceError
from core.market import MarketInstance, social_welfare
from core.valuations import OracleCounter, additive, generate_random_gs
from solvers.combinatorial import (
    ExchangeGraphView,
    LexDistance,
    PhaseState,
    apply_augmentation,
    init_phase_price,
    resolve_item_order,
    shortest_augmentation,
    solve_welfare_incremental,
)
from utils.trace import TraceWriter
from verification.brute_force import brute_force_welfare, check_welfare_theorems


def test_instance_a_prices_and_allocation(market_a):
    report = solve_welfare_incremental(market_a)
    assert report.certified
    assert report.method == "combinatorial"
    assert report.prices == (1, 1)
    assert report.certificate.allocation == ((1, 0), (0, 1), (0, 0))


def test_instance_b_prices_reach_values(market_b):
    """A lone additive buyer pays exactly its values."""
    report = solve_welfare_incremental(market_b)
    assert report.prices == (3, 5)
    assert report.certificate.allocation == ((1, 1),)


def test_instance_d_is_welfare_optimal(market_d):
    report = solve_welfare_incremental(market_d)
    assert report.certificate.allocation == ((1, 0, 0), (0, 1, 1))
    assert check_welfare_theorems(market_d, report.certificate).passed


def test_instance_c_reaches_optimum(market_c):
    report = solve_welfare_incremental(market_c)
    assert social_welfare(market_c, report.certificate.allocation) == 3


def test_phase_counts_add_up(market_d):
    counter = OracleCounter()
    report = solve_welfare_incremental(market_d, counter=counter)
    assert len(report.phases) == 3
    assert [p["item"] for p in report.phases] == [1, 2, 3]
    assert sum(p["value_calls"] for p in report.phases) == counter.value_calls
    # the first phase pays for every singleton query
    assert report.phases[0]["value_calls"] >= market_d.n * market_d.m


def test_final_audit_matches_every_phase(market_d):
    eager = solve_welfare_incremental(market_d, audit="every_phase")
    lazy = solve_welfare_incremental(market_d, audit="final")
    assert eager.prices == lazy.prices
    assert eager.oracle_calls == lazy.oracle_calls


def test_random_order_keeps_welfare(market_c):
    optimum = brute_force_welfare(market_c).value
    for seed in range(5):
        report = solve_welfare_incremental(market_c, order_seed=seed)
        assert social_welfare(market_c, report.certificate.allocation) == optimum


def test_trace_has_one_record_per_phase(market_d, tmp_path):
    path = tmp_path / "phases.jsonl"
    with TraceWriter(path) as trace:
        solve_welfare_incremental(market_d, trace=trace)
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    first = json.loads(lines[0])
    assert first["phase"] == 1 and first["item"] == 1


def test_opening_price_of_first_item(market_d):
    state = PhaseState.start(market_d, OracleCounter())
    assert init_phase_price(state, 0) == 4


def test_lex_distance_prefers_fewer_hops():
    assert LexDistance(3, 1) < LexDistance(3, 2)
    assert LexDistance(2, 5).extend(1) == LexDistance(3, 6)


def test_item_order_validation():
    assert resolve_item_order(3) == [0, 1, 2]
    assert resolve_item_order(3, [2, 0, 1]) == [2, 0, 1]
    assert sorted(resolve_item_order(4, seed=9)) == [0, 1, 2, 3]
    with pytest.raises(DomainError):
        resolve_item_order(3, [0, 0, 1])


def test_rejects_non_monotone_buyer():
    market = MarketInstance(n=2, supply=(1, 1), buyers=(additive([2, -1]),))
    with pytest.raises(MalformedInstanceError) as excinfo:
        solve_welfare_incremental(market)
    assert excinfo.value.field == "buyers[1]"


def test_rejects_multi_unit_market():
    market = MarketInstance(n=1, supply=(2,), buyers=(additive([1]),))
    with pytest.raises(DomainError):
        solve_welfare_incremental(market)


def test_rejects_unknown_audit(market_a):
    with pytest.raises(ValueError):
        solve_welfare_incremental(market_a, audit="never")


def test_corpus_matches_brute_force(gs_corpus):
    """Welfare agrees with exhaustive search and every certificate passes both welfare theorems."""
    for market in gs_corpus:
        report = solve_welfare_incremental(market)
        optimum = brute_force_welfare(market).value
        assert social_welfare(market, report.certificate.allocation) == optimum
        assert check_welfare_theorems(market, report.certificate).passed
        assert all(isinstance(p, Fraction) for p in report.prices)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
def test_larger_markets_match_brute_force(seed):
    market = generate_random_gs("matroid_rank_mix", 6, 4, 20, seed)
    report = solve_welfare_incremental(market, audit="final")
    assert social_welfare(market, report.certificate.allocation) == brute_force_welfare(market).value


def _run_phases(market):
    """Drive the phases by hand, yielding the prices before each augmentation and the state after it."""
    state = PhaseState.start(market, OracleCounter())
    for item in range(market.n):
        state.k += 1
        state.memo = {}
        state.inserted.append(item)
        state.prices[item] = init_phase_price(state, item)
        opening = dict(state.prices)
        augmentation = shortest_augmentation(state, item)
        assert all(d >= 0 for d in augmentation.distances.values())
        apply_augmentation(state, augmentation)
        yield opening, state


def test_prices_only_descend(gs_corpus):
    for market in gs_corpus:
        previous = {}
        for opening, state in _run_phases(market):
            assert all(opening[j] == price for j, price in previous.items())
            assert all(state.prices[j] <= opening[j] for j in state.inserted)
            previous = dict(state.prices)


def test_reduced_weights_stay_non_negative(gs_corpus):
    for market in gs_corpus:
        for _, state in _run_phases(market):
            graph = ExchangeGraphView(state)
            for j in state.inserted:
                arc = graph.source_arc(j)
                assert arc is None or arc[0] >= 0
                assert all(weight >= 0 for _, weight in graph.out_arcs(j))
