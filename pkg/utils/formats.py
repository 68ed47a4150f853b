"""
File Formats
Instance, result and report JSON codecs; rationals travel as "a/b" strings
"""

import json
import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from core.errors import MalformedInstanceError
from core.market import (
    Allocation,
    MarketInstance,
    PriceVector,
    SolveReport,
    bundle_from_index,
    bundle_index,
    social_welfare,
)
from core.valuations import (
    ValuationSpec,
    additive,
    explicit_table,
    partition_matroid,
    perturbed,
    uniform_matroid,
    unit_demand,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RATIONAL_PATTERN = re.compile(r"^-?\d+(/\d+)?$")

PathLike = Union[str, Path]


def format_rational(value) -> str:
    """Always "a/b", integers included ("1/1")."""
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def parse_rational(text: Any, field: str) -> Fraction:
    if isinstance(text, bool) or not isinstance(text, (str, int)):
        raise MalformedInstanceError(f"expected an 'a/b' string, got {text!r}", field=field)
    text = str(text).strip()
    if not RATIONAL_PATTERN.match(text):
        raise MalformedInstanceError(f"expected an 'a/b' string, got {text!r}", field=field)
    try:
        return Fraction(text)
    except ZeroDivisionError:
        raise MalformedInstanceError("zero denominator", field=field)


def dumps_canonical(data: Any) -> str:
    """Sorted keys, two-space indent, trailing newline; byte-stable across runs."""
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def write_json(data: Any, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_canonical(data))


def read_json(path: PathLike) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise MalformedInstanceError(f"cannot read file: {exc.strerror}", field=str(path))
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInstanceError(
            f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", field=str(path)
        )


def _require(obj: Dict, key: str, field: str):
    if not isinstance(obj, dict):
        raise MalformedInstanceError("expected an object", field=field)
    if key not in obj:
        raise MalformedInstanceError(f"missing '{key}'", field=field)
    return obj[key]


def _int_list(value: Any, field: str) -> List[int]:
    if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, int) for v in value):
        raise MalformedInstanceError("expected a list of integers", field=field)
    return list(value)


# ---------------------------------------------------------------------------
# Valuations
# ---------------------------------------------------------------------------

def spec_to_json(spec: ValuationSpec, supply: Sequence[int]) -> Dict:
    if spec.kind == "additive":
        return {"kind": "additive", "weights": list(spec.weights)}
    if spec.kind == "unit_demand":
        return {"kind": "unit_demand", "values": list(spec.weights)}
    if spec.kind == "weighted_matroid_rank":
        matroid = spec.matroid
        if matroid.type == "uniform":
            body = {"type": "uniform", "rank": matroid.rank}
        else:
            body = {
                "type": "partition",
                "blocks": [[j + 1 for j in block] for block in matroid.blocks],
                "capacities": list(matroid.capacities),
            }
        return {"kind": "weighted_matroid_rank", "weights": list(spec.weights), "matroid": body}
    if spec.kind == "explicit_table":
        table = {str(bundle_index(bundle, supply)): value for bundle, value in spec.table.items()}
        return {"kind": "explicit_table", "table": table}
    return {
        "kind": "perturbed",
        "base": spec_to_json(spec.base, supply),
        "scale": spec.scale,
        "weights": list(spec.weights),
    }


def spec_from_json(obj: Any, n: int, supply: Sequence[int], field: str) -> ValuationSpec:
    kind = _require(obj, "kind", field)
    if kind == "additive":
        weights = _int_list(_require(obj, "weights", field), f"{field}.weights")
        spec = additive(weights)
    elif kind == "unit_demand":
        values = _int_list(_require(obj, "values", field), f"{field}.values")
        spec = unit_demand(values)
    elif kind == "weighted_matroid_rank":
        weights = _int_list(_require(obj, "weights", field), f"{field}.weights")
        matroid = _require(obj, "matroid", field)
        mtype = _require(matroid, "type", f"{field}.matroid")
        if mtype == "uniform":
            rank = _require(matroid, "rank", f"{field}.matroid")
            if isinstance(rank, bool) or not isinstance(rank, int):
                raise MalformedInstanceError("expected an integer", field=f"{field}.matroid.rank")
            spec = uniform_matroid(rank, weights)
        elif mtype == "partition":
            blocks = _require(matroid, "blocks", f"{field}.matroid")
            if not isinstance(blocks, list):
                raise MalformedInstanceError("expected a list of item lists", field=f"{field}.matroid.blocks")
            zero_based = [
                [j - 1 for j in _int_list(block, f"{field}.matroid.blocks[{b + 1}]")]
                for b, block in enumerate(blocks)
            ]
            capacities = _int_list(_require(matroid, "capacities", f"{field}.matroid"), f"{field}.matroid.capacities")
            spec = partition_matroid(zero_based, capacities, weights)
        else:
            raise MalformedInstanceError(f"unknown matroid type {mtype!r}", field=f"{field}.matroid.type")
    elif kind == "explicit_table":
        raw = _require(obj, "table", field)
        if not isinstance(raw, dict):
            raise MalformedInstanceError("expected an object keyed by bundle index", field=f"{field}.table")
        table = {}
        for key, value in raw.items():
            if not str(key).isdigit():
                raise MalformedInstanceError(f"bundle key {key!r} is not a decimal index", field=f"{field}.table")
            if isinstance(value, bool) or not isinstance(value, int):
                raise MalformedInstanceError(f"value for bundle {key} must be an integer", field=f"{field}.table")
            try:
                table[bundle_from_index(int(key), supply)] = value
            except Exception:
                raise MalformedInstanceError(f"bundle key {key} outside the supply domain", field=f"{field}.table")
        try:
            spec = explicit_table(table, n)
        except MalformedInstanceError as exc:
            raise MalformedInstanceError(str(exc), field=field)
    elif kind == "perturbed":
        base = spec_from_json(_require(obj, "base", field), n, supply, f"{field}.base")
        scale = _require(obj, "scale", field)
        if isinstance(scale, bool) or not isinstance(scale, int):
            raise MalformedInstanceError("expected an integer", field=f"{field}.scale")
        weights = _int_list(_require(obj, "weights", field), f"{field}.weights")
        spec = perturbed(base, scale, weights)
    else:
        raise MalformedInstanceError(f"unknown valuation kind {kind!r}", field=f"{field}.kind")
    if spec.n != n:
        raise MalformedInstanceError(f"valuation defined on {spec.n} items, instance has {n}", field=field)
    return spec


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------

def instance_to_json(instance: MarketInstance) -> Dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "items": instance.n,
        "supply": list(instance.supply),
        "buyers": [spec_to_json(spec, instance.supply) for spec in instance.buyers],
    }


def instance_from_json(obj: Any) -> MarketInstance:
    version = _require(obj, "schema_version", "instance")
    if version != SCHEMA_VERSION:
        raise MalformedInstanceError(f"unsupported schema version {version!r}", field="schema_version")
    n = _require(obj, "items", "instance")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise MalformedInstanceError("expected a positive integer", field="items")
    supply = _int_list(_require(obj, "supply", "instance"), "supply")
    if len(supply) != n:
        raise MalformedInstanceError(f"supply has {len(supply)} entries for {n} items", field="supply")
    buyers = _require(obj, "buyers", "instance")
    if not isinstance(buyers, list) or not buyers:
        raise MalformedInstanceError("expected a non-empty list", field="buyers")
    specs = tuple(spec_from_json(b, n, supply, f"buyers[{i + 1}]") for i, b in enumerate(buyers))
    return MarketInstance(n=n, supply=tuple(supply), buyers=specs)


def save_instance(instance: MarketInstance, path: PathLike) -> None:
    write_json(instance_to_json(instance), path)


def load_instance(path: PathLike) -> MarketInstance:
    return instance_from_json(read_json(path))


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

def allocation_to_json(allocation: Allocation) -> List[List[int]]:
    """1-based item lists; an item held q times appears q times."""
    return [[j + 1 for j, q in enumerate(bundle) for _ in range(q)] for bundle in allocation]


def allocation_from_json(obj: Any, n: int, field: str = "allocation") -> Allocation:
    if not isinstance(obj, list):
        raise MalformedInstanceError("expected a list of item lists", field=field)
    allocation = []
    for i, items in enumerate(obj):
        bundle = [0] * n
        for j in _int_list(items, f"{field}[{i + 1}]"):
            if j < 1 or j > n:
                raise MalformedInstanceError(f"item {j} outside 1..{n}", field=f"{field}[{i + 1}]")
            bundle[j - 1] += 1
        allocation.append(tuple(bundle))
    return tuple(allocation)


@dataclass(frozen=True)
class ResultData:
    prices: Optional[PriceVector]
    allocation: Optional[Allocation]
    method: str
    verdict: str
    verified: bool
    raw: Dict


def result_to_json(
    instance: MarketInstance,
    report: SolveReport,
    verified: bool,
    trace_path: Optional[str] = None,
) -> Dict:
    certificate = report.certificate
    data = {
        "schema_version": SCHEMA_VERSION,
        "method": report.method,
        "verdict": report.verdict,
        "prices": None if report.prices is None else [format_rational(p) for p in report.prices],
        "allocation": None if certificate is None else allocation_to_json(certificate.allocation),
        "welfare": None
        if certificate is None
        else format_rational(social_welfare(instance, certificate.allocation)),
        "oracle_calls": dict(report.oracle_calls),
        "iterations": report.iterations,
        "retries": report.retries,
        "verified": bool(verified),
    }
    if report.epsilon is not None:
        data["epsilon"] = format_rational(report.epsilon)
    if report.phases:
        data["phases"] = list(report.phases)
    if trace_path:
        data["trace"] = str(trace_path)
    return data


def result_from_json(obj: Any, n: int) -> ResultData:
    if not isinstance(obj, dict):
        raise MalformedInstanceError("expected an object", field="result")
    prices_raw = obj.get("prices")
    prices = None
    if prices_raw is not None:
        if not isinstance(prices_raw, list) or len(prices_raw) != n:
            raise MalformedInstanceError(f"expected {n} prices", field="prices")
        prices = tuple(parse_rational(p, f"prices[{j + 1}]") for j, p in enumerate(prices_raw))
    allocation_raw = obj.get("allocation")
    allocation = None if allocation_raw is None else allocation_from_json(allocation_raw, n)
    return ResultData(
        prices=prices,
        allocation=allocation,
        method=str(obj.get("method", "")),
        verdict=str(obj.get("verdict", "")),
        verified=bool(obj.get("verified", False)),
        raw=obj,
    )


def load_result(path: PathLike, instance: MarketInstance) -> ResultData:
    return result_from_json(read_json(path), instance.n)
