"""Perturbations, the ellipsoid minimizer, rounding and the price pipeline."""

from fractions import Fraction

import pytest

from core.errors import AmbiguousRoundingError, DomainError
from core.fixtures import instance_a
from core.market import MarketInstance, magnitude_bound
from core.valuations import GS_FAMILIES, additive, generate_random_general, generate_random_gs, uniform_matroid
from solvers.cutting_plane import (
    OracleAnswer,
    default_epsilon,
    ellipsoid_minimize,
    interior_query_budget,
    lipschitz_bound,
    make_perturbation,
    round_prices,
    solve_walrasian_prices,
)
from solvers.potential import evaluate_potential, potential_value
from verification.brute_force import check_welfare_theorems, enumerate_integral_walrasian, walrasian_membership

D_OPTIMUM = ((1, 0, 0), (0, 1, 1))


def _abs_objective(target):
    """|x - target|_1 with its sign subgradient."""
    def callback(point):
        diffs = [x - t for x, t in zip(point, target)]
        signs = tuple(Fraction((d > 0) - (d < 0)) for d in diffs)
        return OracleAnswer(subgradient=signs, value=sum(abs(d) for d in diffs))

    return callback


def test_gs_perturbation_is_deterministic(market_b):
    perturbation = make_perturbation(market_b, "gs_deterministic")
    assert perturbation.r == (Fraction(1, 4), Fraction(1, 4))


def test_general_perturbation_is_seeded_and_small(market_d):
    first = make_perturbation(market_d, "general_random", seed=3, attempt=1)
    again = make_perturbation(market_d, "general_random", seed=3, attempt=1)
    other = make_perturbation(market_d, "general_random", seed=3, attempt=2)
    assert first.r == again.r
    assert first.r != other.r
    bound = Fraction(1, 3 ** 7)  # (nS)^-(2n+1) with n = 3, S = 1
    assert all(0 <= r < bound for r in first.r)


def test_default_epsilon(market_a):
    assert default_epsilon(market_a, "gs_deterministic") == Fraction(1, 10)
    assert default_epsilon(market_a, "general_random") == Fraction(1, 2 ** 13)


def test_lipschitz_bound(market_a):
    assert lipschitz_bound(market_a) == pytest.approx(2 ** 0.5 * 5)


def test_interior_budget_grows_with_radius():
    assert interior_query_budget(2, 8.0, Fraction(1, 2)) < interior_query_budget(2, 64.0, Fraction(1, 2))


def test_float_ellipsoid_finds_minimizer():
    target = (Fraction(1), Fraction(-2))
    state = ellipsoid_minimize(
        _abs_objective(target), 4, Fraction(1, 100), dimension=2, lipschitz=2 ** 0.5
    )
    assert state.best_value <= Fraction(1, 50)


def test_exact_ellipsoid_one_dimension():
    state = ellipsoid_minimize(
        _abs_objective((Fraction(3, 4),)), 2, Fraction(1, 64), dimension=1, exact=True
    )
    assert state.exact
    assert abs(state.best_point[0] - Fraction(3, 4)) <= Fraction(1, 32)


def test_zero_subgradient_stops_immediately():
    state = ellipsoid_minimize(lambda p: (0, 0), 1, Fraction(1, 10), dimension=2)
    assert state.stop_reason == "zero-subgradient"
    assert state.iterations == 1
    assert state.zero_point == (0, 0)


def test_iteration_cap_is_respected():
    state = ellipsoid_minimize(_abs_objective((Fraction(1, 3),)), 1, Fraction(1, 10 ** 6), max_iters=3, dimension=1)
    assert state.iterations == 3
    assert state.stop_reason == "max-iterations"


def test_ellipsoid_needs_dimension():
    with pytest.raises(DomainError):
        ellipsoid_minimize(lambda p: (0,), 1, Fraction(1, 10))


def test_round_gs_nearest_integer(market_a):
    assert round_prices((Fraction(9, 10), Fraction(-21, 10)), market_a, "gs_deterministic") == (1, -2)


def test_round_gs_refuses_half_integers(market_a):
    with pytest.raises(AmbiguousRoundingError) as excinfo:
        round_prices((Fraction(1, 2), 0), market_a, "gs_deterministic")
    assert excinfo.value.coordinate == 0


def test_round_general_snaps_to_small_denominator(market_a):
    # D = (nS)^n = 4
    close = Fraction(1, 3) + Fraction(1, 1000)
    assert round_prices((close, Fraction(3, 4)), market_a, "general_random") == (Fraction(1, 3), Fraction(3, 4))


def test_round_general_rejects_far_points(market_a):
    with pytest.raises(AmbiguousRoundingError):
        round_prices((Fraction(1, 3) + Fraction(1, 10), 0), market_a, "general_random")


def test_gs_ellipsoid_instance_a():
    """Instance A has the single Walrasian price (1, 1)."""
    report = solve_walrasian_prices(instance_a(), "ellipsoid_gs")
    assert report.certified
    assert report.prices == (1, 1)
    assert report.oracle_calls["demand_calls"] > 0


def test_regularized_ellipsoid_instance_a():
    report = solve_walrasian_prices(instance_a(), "ellipsoid_gs_regularized")
    assert report.certified
    assert report.prices == (1, 1)


def test_gs_ellipsoid_price_in_integral_set(market_d):
    report = solve_walrasian_prices(market_d, "ellipsoid_gs")
    assert report.certified
    assert report.prices in enumerate_integral_walrasian(market_d)
    assert walrasian_membership(market_d, report.prices, report.certificate.allocation).member


def test_general_ellipsoid_instance_a():
    report = solve_walrasian_prices(instance_a(), "ellipsoid_general", seed=1)
    assert report.certified
    assert report.prices == (1, 1)


def test_general_ellipsoid_reports_missing_equilibrium(complements_market):
    report = solve_walrasian_prices(complements_market, "ellipsoid_general", retry_cap=2)
    assert report.verdict == "no-equilibrium-found"
    assert report.certificate is None
    assert report.retries == 1


def test_gs_algorithms_need_single_unit():
    market = MarketInstance(n=1, supply=(2,), buyers=(additive([3]),))
    with pytest.raises(DomainError):
        solve_walrasian_prices(market, "ellipsoid_gs")


def test_unknown_algorithm(market_a):
    with pytest.raises(ValueError):
        solve_walrasian_prices(market_a, "simplex")


def test_gs_perturbation_selects_lattice_minimum(market_d):
    """A positive r.p term is smallest at the componentwise-least Walrasian price."""
    report = solve_walrasian_prices(market_d, "ellipsoid_gs")
    assert report.prices == enumerate_integral_walrasian(market_d).lattice_min == (1, 1, 1)


def _first_axis_objective(point):
    """|x_1 - 1/3|: no cut ever touches the second axis."""
    d = point[0] - Fraction(1, 3)
    return OracleAnswer(subgradient=(Fraction((d > 0) - (d < 0)), Fraction(0)), value=abs(d))


def test_float_ellipsoid_restarts_a_collapsing_shape():
    state = ellipsoid_minimize(_first_axis_objective, 1, Fraction(1, 1000), dimension=2, lipschitz=1.0)
    assert state.restarts >= 1
    assert state.stop_reason == "max-iterations"
    assert state.best_value <= Fraction(1, 1000)


def _rank_one_market():
    """Additive (7, 0) against a rank-1 uniform matroid weighted (5, 6); the float shape used to collapse here."""
    return MarketInstance(n=2, supply=(1, 1), buyers=(additive([7, 0]), uniform_matroid(1, [5, 6])))


@pytest.mark.parametrize("algorithm", ["ellipsoid_gs", "ellipsoid_gs_regularized"])
def test_gs_solvers_certify_rank_one_market(algorithm):
    market = _rank_one_market()
    walrasian = enumerate_integral_walrasian(market)
    assert len(walrasian.integral_points) == 41
    report = solve_walrasian_prices(market, algorithm)
    assert report.certified
    assert report.prices in walrasian
    if algorithm == "ellipsoid_gs":
        assert report.prices == walrasian.lattice_min == (0, 0)


def _seeded_gs_market(seed, max_value=7):
    return generate_random_gs(GS_FAMILIES[seed % 3], 2 + (seed // 3) % 2, 2 + seed % 2, max_value, seed)


@pytest.fixture(scope="module")
def gs_price_corpus():
    markets = [_seeded_gs_market(seed) for seed in range(24)]
    return [(market, enumerate_integral_walrasian(market)) for market in markets]


@pytest.mark.parametrize("algorithm", ["ellipsoid_gs", "ellipsoid_gs_regularized"])
def test_gs_solvers_land_in_integral_walrasian_set(gs_price_corpus, algorithm):
    for market, walrasian in gs_price_corpus:
        report = solve_walrasian_prices(market, algorithm)
        assert report.certified, report.notes
        assert report.prices in walrasian


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(90))
def test_gs_ellipsoid_larger_corpus(seed):
    market = _seeded_gs_market(seed, max_value=9)
    walrasian = enumerate_integral_walrasian(market)
    for algorithm in ("ellipsoid_gs", "ellipsoid_gs_regularized"):
        report = solve_walrasian_prices(market, algorithm)
        assert report.certified, report.notes
        assert report.prices in walrasian


@pytest.mark.parametrize("seed", range(6))
def test_general_verdict_matches_brute_force_existence(seed):
    market = generate_random_general(2, 2, 2, 4, seed)
    integral = enumerate_integral_walrasian(market)
    report = solve_walrasian_prices(market, "ellipsoid_general", seed=seed, retry_cap=4)
    if report.certified:
        assert check_welfare_theorems(market, report.certificate).passed
    else:
        assert report.verdict == "no-equilibrium-found"
        assert not integral.exists
    if integral.exists:
        assert report.certified


def test_plain_potential_interior_query_on_instance_d(market_d):
    answer = evaluate_potential(market_d, (2, 2, Fraction(3, 2)), mode="greedy_gs")
    assert answer.subgradient == (0, 0, 0)
    assert answer.value == 9

    def callback(point):
        answer = evaluate_potential(market_d, point, "plain", mode="greedy_gs")
        return OracleAnswer(subgradient=answer.subgradient, value=answer.value)

    state = ellipsoid_minimize(
        callback, magnitude_bound(market_d), Fraction(1, 100), dimension=3, lipschitz=lipschitz_bound(market_d)
    )
    assert state.stop_reason == "zero-subgradient"
    assert state.best_value == 9
    assert walrasian_membership(market_d, state.zero_point, D_OPTIMUM).member


def test_perturbed_potential_has_a_unique_minimizer(market_d):
    r = make_perturbation(market_d, "gs_deterministic").r
    walrasian = enumerate_integral_walrasian(market_d)
    assert len(walrasian.integral_points) == 24
    values = {p: potential_value(market_d, p, "perturbed", r) for p in walrasian.integral_points}
    lowest = min(values.values())
    assert [p for p, value in values.items() if value == lowest] == [walrasian.lattice_min]
    for j in range(market_d.n):
        for step in (Fraction(-1, 2), Fraction(1, 2)):
            moved = list(walrasian.lattice_min)
            moved[j] += step
            assert potential_value(market_d, moved, "perturbed", r) > lowest
