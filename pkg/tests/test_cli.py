import csv
import json
import math

import numpy as np
import pytest

from forcedflow import cli
from forcedflow import flow as fl
from forcedflow import generators as gen
from forcedflow import network as nw

SWIRL = {"kind": "gaussian-swirl", "amplitude": 1.0, "width": 0.5, "center": [0.5, 0.0]}


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def circle_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("circle")
    opts = d / "opts.json"
    opts.write_text(json.dumps({"record_every": 40, "record_density": False}))
    rc = run("simulate", "--init", "circle(1,128)", "--T", 0.3, "--opts", opts,
             "--out", d / "trace.jsonl", "--budget-out", d / "budget.json", "--quiet")
    assert rc == 0
    return d


# --- simulate -----------------------------------------------------------------

def test_simulate_writes_trace_and_budget(circle_files):
    tr = fl.trace_from_lines((circle_files / "trace.jsonl").read_text().splitlines())
    assert tr.times[-1] == pytest.approx(0.3)
    assert json.loads((circle_files / "budget.json").read_text())["sup_l2"] == 0.0


def test_simulate_prints_endpoints(tmp_path, capsys):
    assert run("simulate", "--init", "circle(1,32)", "--T", 0.05, "--out", tmp_path / "t.jsonl") == 0
    out = capsys.readouterr().out
    for key in ("Phi:", "H:", "U:"):
        assert key in out


def test_simulate_triod_stays_put(tmp_path):
    assert run("simulate", "--init", "triod(1)", "--T", 1.0, "--out", tmp_path / "t.jsonl", "--quiet") == 0
    tr = fl.trace_from_lines((tmp_path / "t.jsonl").read_text().splitlines())
    a, b = tr.snapshots[0].network.vertices, tr.snapshots[-1].network.vertices
    assert a.shape == b.shape and np.max(np.abs(a - b)) <= 1e-9


def test_simulate_from_config_with_forcing_file(tmp_path):
    (tmp_path / "u.json").write_text(json.dumps(SWIRL))
    cfg = {"init": "circle(1,48)", "forcing": "u.json", "T": 0.05, "options": {"record_every": 25},
           "outputs": {"trace": str(tmp_path / "t.jsonl")}}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert run("--quiet", "simulate", "--config", tmp_path / "cfg.json") == 0
    tr = fl.trace_from_lines((tmp_path / "t.jsonl").read_text().splitlines())
    assert tr.forcing.kind == "gaussian-swirl"


def test_simulate_network_file(tmp_path):
    nw.save_network(gen.square(1.0, 8), tmp_path / "sq.json")
    assert run("simulate", "--init", tmp_path / "sq.json", "--T", 0.01, "--out", tmp_path / "t.jsonl",
               "--quiet") == 0


def test_missing_forcing_file_exit_2_no_output(tmp_path, capsys):
    out = tmp_path / "t.jsonl"
    assert run("simulate", "--init", "circle(1,32)", "--forcing", tmp_path / "nope.json", "--T", 0.1,
               "--out", out) == 2
    assert not out.exists()
    assert "does not exist" in capsys.readouterr().err


@pytest.mark.parametrize("init", ["circle(-1,32)", "hexagon(1)", "missing.json"])
def test_bad_initial_network_exit_2(tmp_path, init):
    assert run("simulate", "--init", init, "--T", 0.1, "--out", tmp_path / "t.jsonl", "--quiet") == 2


def test_unknown_config_key_exit_2(tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps({"init": "circle(1,16)", "seed": 3}))
    assert run("simulate", "--config", tmp_path / "cfg.json", "--out", tmp_path / "t.jsonl", "--quiet") == 2


def test_bad_arguments_exit_2():
    assert run("simulate", "--T", "soon") == 2
    assert run("frobnicate") == 2


def test_identical_configs_give_identical_bytes(tmp_path):
    for name in ("a", "b"):
        assert run("simulate", "--init", "circle(1,40)", "--T", 0.05, "--out", tmp_path / f"{name}.jsonl",
                   "--quiet") == 0
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


# --- verify -------------------------------------------------------------------

def test_verify_all_passes(circle_files):
    d = circle_files
    rc = run("verify", "--trace", d / "trace.jsonl", "--budget", d / "budget.json", "--suite", "all",
             "--out", d / "report.json", "--quiet")
    assert rc == 0
    names = [r["name"] for r in json.loads((d / "report.json").read_text())]
    assert names == sorted(names) and "gronwall" in names


def test_verify_single_failure_exit_1_names_check(circle_files, tmp_path, capsys):
    (tmp_path / "cfg.json").write_text(json.dumps({"constants": {"holder_constant": 1e-9}}))
    rc = run("verify", "--config", tmp_path / "cfg.json", "--trace", circle_files / "trace.jsonl",
             "--suite", "phases", "--out", tmp_path / "r.json")
    assert rc == 1
    failed = [r["name"] for r in json.loads((tmp_path / "r.json").read_text()) if not r["passed"]]
    assert failed and all(n.startswith("phase_holder") for n in failed)
    assert "phase_holder" in capsys.readouterr().out


@pytest.mark.parametrize("text", ["not json at all\n", '{"type": "snapshot"}\n', ""])
def test_verify_corrupt_trace_exit_2(tmp_path, text):
    (tmp_path / "bad.jsonl").write_text(text)
    assert run("verify", "--trace", tmp_path / "bad.jsonl", "--quiet") == 2


def test_verify_unknown_suite_exit_2(circle_files):
    assert run("verify", "--trace", circle_files / "trace.jsonl", "--suite", "astrology", "--quiet") == 2


def test_round_tripped_trace_verifies_identically(circle_files, tmp_path):
    d = circle_files
    tr = fl.trace_from_lines((d / "trace.jsonl").read_text().splitlines())
    (tmp_path / "again.jsonl").write_text("\n".join(fl.trace_lines(tr)) + "\n")
    assert (tmp_path / "again.jsonl").read_bytes() == (d / "trace.jsonl").read_bytes()
    for name in ("again", "orig"):
        src = tmp_path / "again.jsonl" if name == "again" else d / "trace.jsonl"
        assert run("verify", "--trace", src, "--out", tmp_path / f"{name}.json", "--quiet") == 0
    assert (tmp_path / "again.json").read_bytes() == (tmp_path / "orig.json").read_bytes()


def test_verify_fit_reports_constant(circle_files, capsys):
    assert run("verify", "--trace", circle_files / "trace.jsonl", "--suite", "budgets", "--fit") == 0
    assert "fitted C" in capsys.readouterr().out


# --- plotdata -----------------------------------------------------------------

def test_plotdata_circle_mass_column(circle_files, tmp_path):
    out = tmp_path / "p.csv"
    assert run("plotdata", "--trace", circle_files / "trace.jsonl", "--out", out, "--quiet") == 0
    rows = list(csv.reader(out.open()))
    header, body = rows[0], rows[1:]
    assert header[:5] == ["t", "mass", "density", "H", "U"]
    assert len(header) == 5 + 2
    assert all(len(r) == len(header) for r in body)
    for r in body:
        t, mass = float(r[0]), float(r[1])
        assert mass == pytest.approx(2 * math.pi * math.sqrt(1 - 2 * t), abs=5e-3)


def test_plotdata_triod_has_three_area_columns(tmp_path):
    assert run("simulate", "--init", "triod(1)", "--T", 0.01, "--out", tmp_path / "t.jsonl", "--quiet") == 0
    assert run("plotdata", "--trace", tmp_path / "t.jsonl", "--out", tmp_path / "p.csv", "--quiet") == 0
    header = (tmp_path / "p.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 5 + 3


def test_plotdata_empty_trace_header_only(tmp_path):
    (tmp_path / "empty.jsonl").write_text("")
    assert run("plotdata", "--trace", tmp_path / "empty.jsonl", "--out", tmp_path / "p.csv", "--quiet") == 0
    assert (tmp_path / "p.csv").read_text() == "t,mass,density,H,U\n"


# --- mollify and params -------------------------------------------------------------

def _mollify(tmp_path, capsys, spec, m):
    (tmp_path / "u.json").write_text(json.dumps(spec))
    rc = run("mollify", "--field", tmp_path / "u.json", "--m", m, "--T", 0.5, "--n", 11,
             "--out", tmp_path / f"g{m}.csv")
    out = capsys.readouterr().out
    return rc, out


def test_mollify_swirl_distances_decrease(tmp_path, capsys):
    d = []
    for m in (8, 16):
        rc, out = _mollify(tmp_path, capsys, SWIRL, m)
        assert rc == 0 and (tmp_path / f"g{m}.csv").exists()
        d.append(float(out.strip().rsplit("=", 1)[1]))
    assert d[0] > d[1] > 0


def test_mollify_zero_field(tmp_path, capsys):
    rc, out = _mollify(tmp_path, capsys, {"kind": "zero"}, 4)
    assert rc == 0 and float(out.strip().rsplit("=", 1)[1]) == 0.0
    vals = np.loadtxt(tmp_path / "g4.csv", delimiter=",", skiprows=1)
    assert np.all(vals[:, -2:] == 0.0)


def test_mollify_m0_exit_2(tmp_path, capsys):
    rc, _ = _mollify(tmp_path, capsys, SWIRL, 0)
    assert rc == 2 and not (tmp_path / "g0.csv").exists()


def test_params_prints_and_writes(tmp_path, capsys):
    assert run("params", "--eps", 0.5, "--out", tmp_path / "p.json") == 0
    assert json.loads(capsys.readouterr().out)["c2"] == 23
    assert json.loads((tmp_path / "p.json").read_text())["p"] == 23


def test_params_rejects_eps_one():
    assert run("params", "--eps", 1.0, "--quiet") == 2


def test_quiet_suppresses_stdout(tmp_path, capsys):
    assert run("--quiet", "params", "--eps", 0.5) == 0
    assert capsys.readouterr().out == ""
