import dataclasses
import json
import random

import pytest

from coexist_sim import cli
from coexist_sim.config import DEFAULT_SWEEP, ConfigError, ExperimentPlan, load_config, plan_from_dict
from coexist_sim.metrics import summary_rows
from coexist_sim.scenario import RunSpec, derive_seed, plan_runs, plan_seeds, run_experiment, run_single
from coexist_sim.topology import (HIDDEN_WINDOW, PRESETS, SERVING_MIN_DBM, CalibrationError, hidden_fraction,
                                  place_users, preset)


def write(tmp_path, text):
    p = tmp_path / "plan.yaml"
    p.write_text(text)
    return p


def test_minimal_config_takes_defaults(tmp_path):
    plan = load_config(write(tmp_path, "preset: indoor5\n"))
    assert plan.drops == 20 and plan.duration == 30.0 and plan.lambda_sweep == DEFAULT_SWEEP
    assert plan.nru.priority_class == "P3" and plan.wifi.ac == "AC_BE"


def test_sweep_and_nested_sections(tmp_path):
    plan = load_config(write(tmp_path, "lambda_sweep: [0.5, 1, 1.5, 2, 2.5]\nnru:\n  timers: {d1: 3}\n"))
    assert plan.lambda_sweep == [0.5, 1, 1.5, 2, 2.5] and plan.nru.timers.d1 == 3


@pytest.mark.parametrize("text,kind,field", [
    ("duration: -1\n", "domain", "duration"),
    ("lambda_sweep: [0]\n", "domain", "lambda_sweep"),
    ("drops: 0\n", "domain", "drops"),
    ("bogus: 1\n", "unknown-key", "bogus"),
    ("wifi: {colour: red}\n", "unknown-key", "colour"),
    ("nru: {timers: {d2: 0}}\n", "domain", "d2"),
    ("preset: [unclosed\n", "parse", ""),
])
def test_config_errors_are_distinct(tmp_path, text, kind, field):
    with pytest.raises(ConfigError) as e:
        load_config(write(tmp_path, text))
    assert e.value.kind == kind and field in str(e.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError) as e:
        load_config(tmp_path / "nope.yaml")
    assert e.value.kind == "missing-file"


def test_run_count_and_seed_uniqueness():
    plan = ExperimentPlan(lambda_sweep=list(DEFAULT_SWEEP), drops=20)
    runs = plan_runs(plan)
    assert len(runs) == 100
    assert len(set(plan_seeds(plan).values())) == 100
    assert derive_seed(0, 1.0, 3) != derive_seed(1, 1.0, 3)


def test_presets_differ_only_in_declared_fields():
    a, b = preset("indoor5").dump(), preset("indoor6").dump()
    assert set(a) == set(b)
    assert {k for k in a if a[k] != b[k]} == {"name", "carrier_ghz", "bs_power", "ue_power", "calibration_ref"}
    assert (a["carrier_ghz"], a["bs_power"], a["ue_power"]) == (5.18, 23.0, 18.0)
    assert (b["carrier_ghz"], b["bs_power"], b["ue_power"]) == (6.18, 18.0, 12.0)
    assert PRESETS["outdoor5"].bs_power == 23.0


@pytest.mark.parametrize("name", ["indoor5", "outdoor5"])
def test_placement_meets_both_constraints(name):
    t = place_users(preset(name), random.Random(4))
    users = [u for u in t.server]
    assert len(users) == 30
    assert all(t.rx_dbm(t.server[u], u) >= SERVING_MIN_DBM for u in users)
    lo, hi = HIDDEN_WINDOW
    assert lo <= t.calibration_fraction <= hi
    assert t.calibration_fraction == pytest.approx(hidden_fraction(t.techs, t.roles, t.tx_power, t.loss_db))


def test_impossible_room_fails_calibration():
    with pytest.raises(CalibrationError) as e:
        place_users(preset("indoor5"), random.Random(0), hall=(1.0, 1.0), max_attempts=50)
    assert e.value.constraint in ("serving power", "strongest server", "hidden-terminal fraction")


def test_single_drop_summary_equals_run_values():
    plan = ExperimentPlan(lambda_sweep=[1.0], drops=1, duration=1.0)
    runs = run_experiment(plan)
    m = runs[0]
    row = [r for r in summary_rows(runs) if r[1] == "nru"][0]
    assert float(row[2]) == pytest.approx(m.mean_upt("nru"), abs=1e-3)
    assert float(row[5]) == pytest.approx(m.rho["nru"], abs=1e-6)
    assert m.extra["ue_attached"] >= 1


def test_rerun_is_byte_identical(tmp_path):
    plan = ExperimentPlan(lambda_sweep=[1.0, 2.0], drops=2, duration=0.5)
    run_experiment(plan, tmp_path / "a")
    run_experiment(plan, tmp_path / "b")
    for name in ("summary.csv", "upt.csv", "latency.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    meta = json.loads((tmp_path / "a" / "metadata.json").read_text())
    assert len(meta["runs"]) == 4
    assert all(HIDDEN_WINDOW[0] <= r["calibration_fraction"] <= HIDDEN_WINDOW[1] for r in meta["runs"])


def test_trace_digest_is_reproducible():
    spec = RunSpec("indoor5", 1.5, 42, duration=0.3, trace=True)
    assert run_single(spec).extra["trace"] == run_single(spec).extra["trace"]


def test_cli_exit_codes(tmp_path, monkeypatch, capsys):
    assert cli.main(["validate", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert cli.main(["validate", "--config", str(write(tmp_path, "duration: 0\n"))]) == 2
    good = write(tmp_path, "preset: indoor5\ndrops: 1\nduration: 0.2\nlambda_sweep: [1]\n")
    assert cli.main(["validate", "--config", str(good)]) == 0
    out = tmp_path / "out"
    assert cli.main(["sweep", "--config", str(good), "--out", str(out)]) == 0
    assert (out / "summary.csv").exists() and (out / "metadata.json").exists()
    assert cli.main(["run", "--config", str(good), "--drops", "0"]) == 2

    def boom(*a, **k):
        raise CalibrationError("hidden-terminal fraction", 10_000)
    monkeypatch.setattr("coexist_sim.scenario.make_topology", boom)
    assert cli.main(["run", "--config", str(good)]) == 3
