import os
from pathlib import Path

import pytest

import regemu

SCENARIOS = Path(os.environ.get("REGEMU_SCENARIO_DIR", Path(__file__).resolve().parents[2] / "scenarios"))


def scenario(name):
    return regemu.Scenario.load(str(SCENARIOS / f"{name}.yaml"))


def test_load_scenario():
    sc = scenario("casabd_smoke")
    assert sc.algorithm == "cas-abd"
    assert sc.n == 2 * sc.f + 1
    assert len(sc.digest()) == 16


def test_run_passes_default_checks():
    rep = regemu.run(scenario("casabd_smoke"))
    assert rep["exit_code"] == 0
    assert {c["name"] for c in rep["checks"]} >= {"lin", "linpoints", "ts"}
    assert all(c["verdict"] == "pass" for c in rep["checks"])
    assert rep["diagnostics"] == {"guard_violations": 0, "monotonic_violations": 0, "ts_ties": 0}


def test_run_is_deterministic():
    sc = scenario("mixed_k2")
    a = regemu.run(sc, seed=7)
    b = regemu.run(sc, seed=7)
    assert a["trace"] == b["trace"]
    assert a["trace_hash"] == b["trace_hash"]


def test_check_trace_round_trip():
    rep = regemu.run(scenario("mixed_k2"), seed=3)
    outcomes = regemu.check_trace(rep["trace"], ["lin", "ts"])
    assert [c["verdict"] for c in outcomes] == ["pass", "pass"]


def test_unknown_check_raises():
    rep = regemu.run(scenario("casabd_smoke"))
    with pytest.raises(regemu.ConfigError):
        regemu.check_trace(rep["trace"], ["no_such_check"])


def test_bad_yaml_raises():
    with pytest.raises(ValueError):
        regemu.Scenario.parse("algorithm: cas_abd\nn: 3\nf: 2\n")


def test_enumerate_tiny():
    res = regemu.enumerate(scenario("tiny_enum"))
    assert res["verdict"] == "pass"
    assert res["violations"] == 0
    assert res["outcomes"] > 0


def test_enumerate_cap_reports_partial():
    res = regemu.enumerate(scenario("tiny_enum"), state_cap=10)
    assert res["verdict"] == "partial"
    assert res["capped"]


def test_sweep_storage_grows_with_clients():
    sc = scenario("contention_k2")
    res = regemu.sweep(sc, 0, 4, clients=[1, 2])
    assert not res["failed"]
    assert [p["k"] for p in res["points"]] == [1, 2]
    assert all(p["runs"] == 5 for p in res["points"])


def test_obstruction_bound():
    assert [regemu.obstruction_bound(c) for c in (1, 2, 3)] == [6, 12, 20]
