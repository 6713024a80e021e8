import csv
import json
import math
import textwrap
from dataclasses import replace

import numpy as np
import pytest

from chemolab.errors import ConfigError, InvalidParams
from chemolab.harness import (
    bundled_names,
    convergence_study,
    load_final_state,
    load_scenario,
    run_scenario,
    scenario_from_dict,
    sweep,
)
from chemolab.harness.cli import main
from chemolab.harness.config import OUTPUT_ROOT_ENV, read_document, resolve, set_path
from chemolab.harness.runs import SWEEP_COLUMNS, time_to_threshold
from chemolab.profiles import Verdict
from chemolab.solver import RunStatus, validate_scenario

SMALL = textwrap.dedent("""\
    name = "small-decay"

    [model]
    variant = "pp"
    gamma = 1.0

    [boundary.alpha1]
    family = "one-plus-exp-decay"
    c = 0.5
    rate = 1.0
    [boundary.alpha2]
    family = "one-plus-exp-decay"
    c = -0.3
    rate = 1.0
    [boundary.beta1]
    family = "exp-decay"
    c = 0.2
    rate = 1.0
    [boundary.beta2]
    family = "exp-decay"
    c = -0.1
    rate = 1.0

    [initial.u]
    family = "profile-plus-sine"
    amplitude = 0.05
    [initial.v]
    family = "profile-plus-sine"
    amplitude = 0.05
    mode = 2

    [numerics]
    dt = 0.004
    t_end = 8.0
    n = 51

    [diagnostics]
    cadence = 25
    """)


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return p


# -- configuration ---------------------------------------------------------------

def test_missing_gamma_names_the_field(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text(SMALL.replace("gamma = 1.0\n", ""))
    with pytest.raises(ConfigError) as exc:
        load_scenario(p)
    assert exc.value.field == "model.gamma" and "model.gamma" in str(exc.value)


def test_syntax_error_reports_line(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text(SMALL.replace("t_end = 8.0", "t_end = = 8.0"))
    with pytest.raises(ConfigError) as exc:
        load_scenario(p)
    assert exc.value.line == SMALL.splitlines().index("t_end = 8.0") + 1


def test_unknown_family_and_key(small):
    doc = read_document(small)
    doc["boundary"]["alpha1"]["family"] = "wiggle"
    with pytest.raises(ConfigError) as exc:
        scenario_from_dict(doc)
    assert exc.value.field == "boundary.alpha1.family"
    doc = read_document(small)
    doc["numerics"]["dtt"] = 1.0
    with pytest.raises(ConfigError):
        scenario_from_dict(doc)


def test_missing_file_and_unknown_name():
    with pytest.raises((ConfigError, OSError)):
        load_scenario("/nonexistent/x.toml")
    with pytest.raises(ConfigError):
        resolve("no-such-bundled-scenario")


def test_set_path():
    doc = {"model": {"gamma": 1.0, "variant": "pp"}, "numerics": {"n": 51}}
    assert set_path(doc, "model.gamma", 3)["model"]["gamma"] == 3.0
    assert set_path(doc, "numerics.n", 101.0)["numerics"]["n"] == 101
    assert doc["model"]["gamma"] == 1.0
    with pytest.raises(ConfigError):
        set_path(doc, "model.variant", 1)
    with pytest.raises(ConfigError):
        set_path(doc, "model.missing", 1)


@pytest.mark.parametrize("name", bundled_names())
def test_bundled_scenarios_validate(name):
    sc = load_scenario(name)
    _, flags = validate_scenario(sc)
    expected = "Suspect" if name == "ba-violation" else "Satisfied"
    assert flags["ba_verdict"] == expected


def test_bundled_library_contents():
    assert {"equilibrium", "thm1-decay", "thm1-decay-g2", "thm2-decay", "thm2-decay-g2",
            "asymmetric-u", "ba-violation"} <= set(bundled_names())


def test_tabulated_inputs(tmp_path):
    (tmp_path / "a1.csv").write_text("t,value\n0,1.5\n1,1.2\n30,1.0\n")
    (tmp_path / "u0.csv").write_text("x,u\n0,1.5\n0.5,1.3\n1,0.7\n")
    text = SMALL.replace('family = "one-plus-exp-decay"\nc = 0.5\nrate = 1.0',
                         'family = "table"\ncsv = "a1.csv"')
    text = text.replace('[initial.u]\nfamily = "profile-plus-sine"\namplitude = 0.05',
                        '[initial.u]\nfamily = "table"\ncsv = "u0.csv"')
    p = tmp_path / "tab.toml"
    p.write_text(text)
    sc = load_scenario(p)
    u0 = sc.initial_u.evaluate(sc.grid, None)
    assert u0[0] == 1.5 and u0[-1] == 0.7 and u0[25] == pytest.approx(1.3)
    assert sc.boundary.alpha1.value(0.5) == pytest.approx(1.35)


# -- runs and artifacts ----------------------------------------------------------

def test_equilibrium_artifacts(tmp_path):
    result, out = run_scenario("equilibrium", out_dir=tmp_path / "eq")
    assert result.status is RunStatus.COMPLETED
    with open(out / "diagnostics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(result.records)
    for col in ("l2_u_dev", "l2_v_dev", "h1_u_dev", "h1_v_dev"):
        assert all(float(r[col]) == 0.0 for r in rows)
    meta = json.loads((out / "run.json").read_text())
    assert meta["status"] == "Completed" and meta["final_time"] == pytest.approx(10.0)
    assert meta["metadata"]["alpha_bounds"]["alpha_min"] == 1.0


@pytest.mark.parametrize("name", ["thm2-decay", "manufactured"])
def test_final_state_round_trip(tmp_path, name):
    sc = load_scenario(name)
    sc = replace(sc, numerics=replace(sc.numerics, t_end=20 * sc.numerics.dt))
    result, out = run_scenario(sc, out_dir=tmp_path / name)
    back = load_final_state(out / "final_state.csv")
    fs = result.final_state
    assert back.grid == fs.grid and back.t == fs.t and back.psi == fs.psi
    assert np.array_equal(back.u.values, fs.u.values) and np.array_equal(back.v.values, fs.v.values)
    header = (out / "final_state.csv").read_text().splitlines()[0]
    assert header == ("x,u,v,alpha,psi" if sc.model.hyperbolic else "x,u,v,alpha,beta")


def test_output_root_override(tmp_path, monkeypatch, small):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "root"))
    sc = load_scenario(small)
    sc = replace(sc, numerics=replace(sc.numerics, t_end=0.04))
    _, out = run_scenario(sc)
    assert out == tmp_path / "root" / "small-decay"
    assert (out / "diagnostics.csv").exists()


def test_rejected_run_still_writes_metadata(tmp_path, small):
    doc = read_document(small)
    doc["initial"]["u"] = {"family": "constant", "value": 1.0}
    result, out = run_scenario(scenario_from_dict(doc), out_dir=tmp_path / "r")
    assert result.status is RunStatus.REJECTED
    assert json.loads((out / "run.json").read_text())["status"] == "Rejected"
    assert not (out / "final_state.csv").exists()


def test_time_to_threshold():
    class R:
        def __init__(self, t, h):
            self.t, self.h1_total = t, h
    recs = [R(0, 1.0), R(1, 0.5), R(2, 0.009), R(3, 0.001)]
    assert time_to_threshold(recs, 1e-2) == 2
    assert time_to_threshold(recs[:2], 1e-2) is None
    assert time_to_threshold([], 1e-2) is None


# -- convergence -----------------------------------------------------------------

def test_convergence_preconditions():
    sc = load_scenario("manufactured")
    with pytest.raises(InvalidParams):
        convergence_study(sc, [51, 101], 151)
    with pytest.raises(InvalidParams):
        convergence_study(sc, [51, 70], 401)


def test_convergence_flags_degenerate_equilibrium():
    sc = load_scenario("equilibrium")
    sc = replace(sc, numerics=replace(sc.numerics, t_end=0.5))
    rep = convergence_study(sc, [11, 21], 41)
    assert rep.degenerate and "degenerate" in rep.note
    assert all(e == 0.0 for e in rep.errors_u + rep.errors_v)
    assert math.isnan(rep.min_order())


def test_convergence_order_small():
    sc = load_scenario("manufactured")
    sc = replace(sc, numerics=replace(sc.numerics, t_end=0.1))
    rep = convergence_study(sc, [21, 41], 161)
    assert not rep.degenerate and rep.min_order() > 1.7
    assert [r["n"] for r in rep.rows()] == [21, 41]


# -- sweeps ----------------------------------------------------------------------

def test_gamma_sweep_rows(tmp_path, small):
    table = sweep(small, "model.gamma", [1, 2, 3], out_dir=tmp_path / "sw")
    assert [r["value"] for r in table.rows] == [1.0, 2.0, 3.0]
    for r in table.rows:
        assert r["status"] == "Completed" and r["time_to_threshold"] is not None
        assert math.isfinite(r["c_star"])
    assert sorted(p.name for p in (tmp_path / "sw").iterdir()) == ["run_000", "run_001", "run_002"]


def test_sweep_records_failures_without_aborting(small):
    table = sweep(small, "numerics.dt", [0.004, 0.5])
    assert table.rows[0]["status"] == "Completed"
    assert table.rows[1]["status"] == "Rejected"


def test_undamped_oscillation_is_suspect():
    sc = load_scenario("oscillating-boundary")
    table = sweep("oscillating-boundary", "boundary.alpha2.rate", [0.0])
    [row] = table.rows
    assert row["ba_verdict"] == Verdict.SUSPECT.value and row["status"] == "Completed"
    assert sc.boundary.alpha2.value(0.0) == pytest.approx(1.2)


def test_sweep_parallel_matches_serial(tmp_path, small):
    a = sweep(small, "model.gamma", [1, 2], parallelism=1, out_dir=tmp_path / "a")
    b = sweep(small, "model.gamma", [1, 2], parallelism=4, out_dir=tmp_path / "b")
    a.write_csv(tmp_path / "a.csv")
    b.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().splitlines()[0].split(",") == SWEEP_COLUMNS
    for k in range(2):
        name = f"run_{k:03d}/diagnostics.csv"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


# -- CLI -------------------------------------------------------------------------

def test_cli_simulate_exit_codes(tmp_path, small, capsys):
    assert main(["simulate", "equilibrium", "--out", str(tmp_path / "e")]) == 0
    bad = tmp_path / "bad.toml"
    bad.write_text(SMALL.replace("gamma = 1.0\n", ""))
    assert main(["simulate", str(bad)]) == 1
    assert "model.gamma" in capsys.readouterr().err
    rej = tmp_path / "rej.toml"
    rej.write_text(SMALL.replace("dt = 0.004", "dt = 0.5"))
    assert main(["simulate", str(rej), "--out", str(tmp_path / "r")]) == 1


def test_cli_run_failure_exit_code(tmp_path):
    # a positivity floor above the data makes every run stop with PositivityLost
    q = tmp_path / "g.toml"
    q.write_text(SMALL.replace("[numerics]\n", "[numerics]\npositivity_floor = 2.0\n"))
    assert main(["convergence", str(q), "--grids", "11,21", "--reference", "41"]) == 2
    assert main(["simulate", str(q), "--out", str(tmp_path / "g")]) == 2


def test_cli_convergence_precondition_exit_code():
    assert main(["convergence", "manufactured", "--grids", "51,70", "--reference", "401"]) == 1


def test_cli_output_root_env(tmp_path, monkeypatch, small):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "out"))
    short = tmp_path / "short.toml"
    short.write_text(SMALL.replace("t_end = 8.0", "t_end = 0.04"))
    assert main(["simulate", str(short)]) == 0
    assert (tmp_path / "out" / "small-decay" / "run.json").exists()


def test_cli_verify_lemmas(capsys):
    assert main(["verify-lemmas", "--samples", "2000"]) == 0
    out = capsys.readouterr().out
    assert all(f"T{k}: PASS" in out for k in range(1, 6))


def test_cli_transform(tmp_path):
    x = np.linspace(0, 1, 101)
    src = tmp_path / "c.csv"
    src.write_text("x,c\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(x, np.exp(2 * x))))
    out = tmp_path / "v.csv"
    assert main(["transform", str(src), "--direction", "forward", "--out", str(out)]) == 0
    vals = np.loadtxt(out, delimiter=",", skiprows=1)[:, 1]
    assert np.max(np.abs(vals - 2.0)) < 1e-3
    back = tmp_path / "c2.csv"
    assert main(["transform", str(out), "--direction", "inverse", "--anchor", "1.0",
                 "--out", str(back)]) == 0
    c = np.loadtxt(back, delimiter=",", skiprows=1)[:, 1]
    assert c[-1] == pytest.approx(math.e ** 2, rel=1e-3)
    bad = tmp_path / "bad.csv"
    bad.write_text("x,c\n0,1\n0.3,1\n1,1\n")
    assert main(["transform", str(bad), "--direction", "forward"]) == 1
