"""Valuation families, value oracle, monotonicity and the gross-substitutes checker."""

import pytest

from core.errors import CheckLimitExceededError, DomainError, MalformedInstanceError
from core.fixtures import complements_table
from core.valuations import (
    OracleCounter,
    additive,
    check_gross_substitutes,
    check_monotone,
    evaluate,
    explicit_table,
    generate_random_general,
    generate_random_gs,
    partition_matroid,
    perturbed,
    uniform_matroid,
    unit_demand,
)


def test_value_oracle_counts_calls():
    counter = OracleCounter()
    spec = additive([3, 5])
    assert evaluate(spec, (1, 1), counter) == 8
    assert evaluate(spec, (0, 1), counter) == 5
    assert counter.value_calls == 2
    assert counter.as_dict() == {"value_calls": 2, "demand_calls": 0, "aggregate_calls": 0}


def test_unit_demand_takes_best_item():
    spec = unit_demand([2, 7, 4])
    assert evaluate(spec, (1, 0, 1)) == 4
    assert evaluate(spec, (1, 1, 1)) == 7
    assert evaluate(spec, (0, 0, 0)) == 0


def test_matroid_ranks():
    assert evaluate(uniform_matroid(2, [1, 1, 1]), (1, 1, 1)) == 2
    spec = partition_matroid([[0, 1], [2]], [1, 1], [3, 2, 4])
    assert evaluate(spec, (1, 1, 1)) == 7
    assert evaluate(spec, (0, 1, 0)) == 2


def test_perturbed_scales_base():
    spec = perturbed(additive([1, 2]), 10, [3, 4])
    assert evaluate(spec, (1, 1)) == 37


def test_wrong_bundle_length_is_domain_error():
    with pytest.raises(DomainError):
        evaluate(additive([1, 2]), (1,))


def test_table_requires_zero_empty_bundle():
    with pytest.raises(MalformedInstanceError):
        explicit_table({(0,): 1, (1,): 2}, 1)


def test_partition_blocks_must_be_disjoint():
    with pytest.raises(MalformedInstanceError):
        partition_matroid([[0, 1], [1]], [1, 1], [1, 1])


def test_monotonicity():
    assert check_monotone(additive([1, 0, 2])) == (True, None)
    monotone, reason = check_monotone(additive([1, -1]))
    assert not monotone and "item 2" in reason
    dip = explicit_table({(0, 0): 0, (1, 0): 2, (0, 1): 1, (1, 1): 1}, 2)
    assert not check_monotone(dip)[0]


@pytest.mark.parametrize(
    "spec",
    [
        additive([3, 1, 4]),
        unit_demand([1, 5, 9]),
        uniform_matroid(2, [2, 7, 1]),
        partition_matroid([[0, 2], [1]], [1, 1], [5, 3, 2]),
    ],
)
def test_gs_families_pass_checker(spec):
    """Additive, unit-demand and matroid-rank valuations are gross substitutes."""
    assert check_gross_substitutes(spec).is_gs


def test_complements_fail_checker():
    result = check_gross_substitutes(complements_table())
    assert not result.is_gs
    assert result.counterexample is not None
    assert result.to_dict()["gross_substitutes"] is False


def test_checker_item_limit():
    with pytest.raises(CheckLimitExceededError) as excinfo:
        check_gross_substitutes(additive([1] * 9))
    assert "exceeds-check-limit" in str(excinfo.value)


def test_checker_rejects_multi_unit_tables():
    table = explicit_table({(0,): 0, (1,): 1, (2,): 2}, 1)
    with pytest.raises(DomainError):
        check_gross_substitutes(table)


def test_generators_are_deterministic():
    first = generate_random_gs("matroid_rank_mix", 4, 3, 10, seed=7)
    second = generate_random_gs("matroid_rank_mix", 4, 3, 10, seed=7)
    assert first == second
    general = generate_random_general(2, 2, 2, 5, seed=3)
    assert general.n == 2 and all(1 <= s <= 2 for s in general.supply)


def test_unknown_family():
    with pytest.raises(ValueError):
        generate_random_gs("complements", 2, 2, 5, seed=0)
