"""End-to-end runs of the walrus command line."""

import json

import pandas as pd
import pytest

from app import run_cli
from core.fixtures import FIXTURES
from utils.bench import ROW_COLUMNS
from utils.formats import dumps_canonical, save_instance


@pytest.fixture
def instance_file(tmp_path):
    def write(name):
        path = tmp_path / f"{name}.json"
        save_instance(FIXTURES[name](), path)
        return str(path)

    return write


def test_gen_writes_instance(tmp_path):
    path = tmp_path / "market.json"
    code = run_cli(["gen", "--family", "unit_demand", "--items", "3", "--buyers", "2", "--seed", "4", "-o", str(path)])
    assert code == 0
    data = json.loads(path.read_text())
    assert data["items"] == 3 and len(data["buyers"]) == 2


def test_gen_is_seeded(capsys):
    run_cli(["gen", "--items", "3", "--buyers", "2", "--seed", "5"])
    first = capsys.readouterr().out
    run_cli(["gen", "--items", "3", "--buyers", "2", "--seed", "5"])
    assert capsys.readouterr().out == first


def test_solve_instance_a(instance_file, tmp_path):
    out = tmp_path / "result.json"
    assert run_cli(["solve", instance_file("A"), "-o", str(out)]) == 0
    result = json.loads(out.read_text())
    assert result["prices"] == ["1/1", "1/1"]
    assert result["allocation"] == [[1], [2], []]
    assert result["verdict"] == "certified"
    assert result["verified"] is True
    assert result["welfare"] == "2/1"


def test_solve_with_trace(instance_file, tmp_path):
    trace = tmp_path / "trace.jsonl"
    assert run_cli(["solve", instance_file("D"), "--trace", str(trace), "-o", str(tmp_path / "r.json")]) == 0
    assert len(trace.read_text().splitlines()) == 3


def test_solve_general_without_equilibrium(instance_file, tmp_path):
    code = run_cli([
        "solve", instance_file("complements"), "--algorithm", "ellipsoid-general",
        "--retry-cap", "2", "-o", str(tmp_path / "r.json"),
    ])
    assert code == 2


def test_solve_then_verify(instance_file, tmp_path, capsys):
    instance = instance_file("D")
    out = tmp_path / "result.json"
    run_cli(["solve", instance, "-o", str(out)])
    assert run_cli(["verify", instance, str(out)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is True


def test_verify_rejects_tampered_allocation(instance_file, tmp_path):
    out = tmp_path / "result.json"
    out.write_text(
        dumps_canonical({"method": "combinatorial", "verdict": "certified",
                         "prices": ["1/1", "1/1"], "allocation": [[1, 2], [], []]})
    )
    assert run_cli(["verify", instance_file("A"), str(out)]) == 1


def test_verify_budget(instance_file, tmp_path):
    out = tmp_path / "result.json"
    out.write_text(dumps_canonical({"prices": ["1/1", "1/1"], "allocation": [[1], [2], []]}))
    assert run_cli(["verify", instance_file("A"), str(out), "--budget", "2"]) == 1


def test_robust_unique_optimum(instance_file, capsys):
    assert run_cli(["robust", instance_file("D")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["robust"]["prices"] == ["7/6", "7/6", "7/6"]
    assert report["allocation"] == [[1], [2, 3]]


def test_robust_reports_zero_cycle(instance_file, capsys):
    assert run_cli(["robust", instance_file("C"), "--source", "brute-force"]) == 2
    report = json.loads(capsys.readouterr().out)
    assert report["robust"]["exists"] is False


def test_check_gs(instance_file):
    assert run_cli(["check-gs", instance_file("D")]) == 0
    assert run_cli(["check-gs", instance_file("complements")]) == 2


def test_malformed_instance_exits_one(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{ not json")
    assert run_cli(["solve", str(path)]) == 1


def test_unknown_subcommand_exits_one():
    assert run_cli(["teleport"]) == 1


def test_bench_writes_csv(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    assert run_cli(["bench", "--items", "2", "3", "4", "--buyers", "2", "-o", str(out)]) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ROW_COLUMNS
    assert sorted(frame["items"].unique()) == [2, 3, 4]
    summary = json.loads(capsys.readouterr().out)
    assert set(summary["fit"]) == {"a", "b", "c"}
