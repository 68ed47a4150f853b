"""Instance and result JSON codecs."""

import json
from fractions import Fraction

import pytest

from core.errors import MalformedInstanceError
from core.fixtures import FIXTURES, complements_market
from core.market import MarketInstance
from core.valuations import partition_matroid, perturbed, unit_demand
from utils.formats import (
    allocation_from_json,
    allocation_to_json,
    dumps_canonical,
    format_rational,
    instance_from_json,
    instance_to_json,
    load_instance,
    load_result,
    parse_rational,
    save_instance,
)


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_instance_file_is_byte_stable(name, tmp_path):
    path = tmp_path / f"{name}.json"
    save_instance(FIXTURES[name](), path)
    loaded = load_instance(path)
    assert loaded == FIXTURES[name]()
    assert dumps_canonical(instance_to_json(loaded)) == path.read_text()


def test_matroid_and_perturbed_specs_survive(tmp_path):
    market = MarketInstance(
        n=3,
        supply=(1, 1, 1),
        buyers=(
            partition_matroid([[0, 2], [1]], [1, 1], [4, 2, 3]),
            perturbed(unit_demand([1, 2, 3]), 18, [1, 5, 2]),
        ),
    )
    data = instance_to_json(market)
    assert data["buyers"][0]["matroid"]["blocks"] == [[1, 3], [2]]
    assert instance_from_json(json.loads(dumps_canonical(data))) == market


def test_explicit_table_keys_are_bundle_indices():
    data = instance_to_json(complements_market())
    assert sorted(data["buyers"][0]["table"]) == ["0", "1", "2", "3"]
    assert sorted(data["buyers"][0]["table"].values()) == [0, 0, 0, 3]


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"schema_version": 1,\n  "items": }')
    with pytest.raises(MalformedInstanceError) as excinfo:
        load_instance(path)
    assert "line 2" in str(excinfo.value)


def test_missing_file(tmp_path):
    with pytest.raises(MalformedInstanceError):
        load_instance(tmp_path / "absent.json")


def test_missing_field_reports_path():
    data = instance_to_json(FIXTURES["D"]())
    del data["buyers"][1]["weights"]
    with pytest.raises(MalformedInstanceError) as excinfo:
        instance_from_json(data)
    assert excinfo.value.field == "buyers[2]"


def test_wrong_valuation_length_reports_buyer():
    data = instance_to_json(FIXTURES["D"]())
    data["buyers"][0]["weights"] = [1, 2]
    with pytest.raises(MalformedInstanceError) as excinfo:
        instance_from_json(data)
    assert excinfo.value.field == "buyers[1]"


def test_unknown_schema_version():
    data = instance_to_json(FIXTURES["A"]())
    data["schema_version"] = 2
    with pytest.raises(MalformedInstanceError) as excinfo:
        instance_from_json(data)
    assert excinfo.value.field == "schema_version"


def test_rationals_always_carry_a_denominator():
    assert format_rational(2) == "2/1"
    assert format_rational(Fraction(-7, 6)) == "-7/6"
    assert parse_rational("3/4", "prices[1]") == Fraction(3, 4)
    with pytest.raises(MalformedInstanceError) as excinfo:
        parse_rational("0.75", "prices[1]")
    assert excinfo.value.field == "prices[1]"


def test_allocations_are_one_based():
    allocation = ((1, 0, 0), (0, 1, 1))
    assert allocation_to_json(allocation) == [[1], [2, 3]]
    assert allocation_from_json([[1], [2, 3]], 3) == allocation
    with pytest.raises(MalformedInstanceError):
        allocation_from_json([[4]], 3)


def test_result_file(tmp_path):
    path = tmp_path / "result.json"
    path.write_text(
        dumps_canonical(
            {"method": "combinatorial", "verdict": "certified", "prices": ["1/1", "1/1"],
             "allocation": [[1], [2], []], "verified": True}
        )
    )
    result = load_result(path, FIXTURES["A"]())
    assert result.prices == (1, 1)
    assert result.allocation == ((1, 0), (0, 1), (0, 0))
    assert result.verified


def test_result_with_wrong_price_count(tmp_path):
    path = tmp_path / "result.json"
    path.write_text(dumps_canonical({"prices": ["1/1"]}))
    with pytest.raises(MalformedInstanceError):
        load_result(path, FIXTURES["A"]())
