import csv
import json

import numpy as np
import pytest

from conftest import DATA_DIR
from nkpclearn import cli
from nkpclearn.domain import DegenerateScale, InvalidData
from nkpclearn.harness import McAborted

FIXTURE = DATA_DIR / "sim_fixture.csv"


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_simulate_writes_csv(tmp_path):
    out = tmp_path / "s.csv"
    assert run("--seed", 3, "simulate", "--n", 50, "-o", out) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0][:3] == ["t", "pi", "y"] and len(rows) == 51
    rec = json.loads((tmp_path / "s.csv.record.json").read_text())
    assert rec["config"]["seed"] == 3 and rec["config"]["command"] == "simulate"


def test_global_flag_position(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run("--seed", 7, "simulate", "--n", 40, "-o", a)
    run("simulate", "--n", 40, "--seed", 7, "-o", b)
    assert a.read_text() == b.read_text()


def test_estimate_fixture_near_truth(tmp_path):
    out = tmp_path / "e.json"
    assert run("estimate", "-i", FIXTURE, "--init", "fixed", "--init-value", 0, "-o", out) == 0
    rep = json.loads(out.read_text())
    truth = {"gamma": 0.076, "delta": 0.998, "psi": 0.09}
    for name, v in truth.items():
        e = rep["params"][name]
        assert abs(e["estimate"] - v) < 3 * e["se"], name
    assert rep["params"]["rho"]["estimate"] == pytest.approx(0.93, abs=0.03)


def test_estimate_tsv(tmp_path):
    out = tmp_path / "e.tsv"
    run("--format", "tsv", "estimate", "-i", FIXTURE, "-o", out)
    lines = out.read_text().splitlines()
    assert lines[0].split("\t") == ["param", "estimate", "se", "ci_lo", "ci_hi"]
    assert len(lines) == 7


def test_roots_from_lambda(tmp_path):
    out, curve = tmp_path / "r.json", tmp_path / "g.tsv"
    code = run("roots", "--lambda", 0.998, 0.09, 0.93, 0.44 ** 2, 0.76 ** 2,
               "--g-curve", curve, "-o", out)
    assert code == 0
    rep = json.loads(out.read_text())["report"]
    assert rep["count"] == 3
    np.testing.assert_allclose(rep["roots"], [0.174, 0.856, 0.999], atol=1e-3)
    assert curve.read_text().startswith("beta\tG")


def test_roots_from_data(tmp_path):
    out = tmp_path / "r.json"
    assert run("roots", "-i", FIXTURE, "-o", out) == 0
    obj = json.loads(out.read_text())
    assert len(obj["intervals"]) == obj["report"]["count"]


def test_bands_contain_curve(tmp_path):
    out = tmp_path / "b.tsv"
    assert run("--seed", 1, "bands", "-i", FIXTURE, "--B", 199, "--alpha", 0.1, "-o", out) == 0
    rows = list(csv.reader(out.open(), delimiter="\t"))
    assert rows[0] == ["grid", "G", "lo", "hi"] and len(rows) == 402
    vals = np.array(rows[1:], dtype=float)
    assert np.all(vals[:, 2] <= vals[:, 1]) and np.all(vals[:, 1] <= vals[:, 3])


def test_supf(tmp_path):
    out = tmp_path / "f.json"
    assert run("--seed", 2, "supf", "-i", FIXTURE, "--B", 199, "-o", out) == 0
    obj = json.loads(out.read_text())
    assert 0 <= obj["p_value"] <= 1 and obj["B"] == 199


def test_mc_small(tmp_path):
    out, recs = tmp_path / "mc.csv", tmp_path / "recs.csv"
    code = run("--seed", 5, "mc", "--scenario", "A", "--sizes", 300, "--reps", 4, "--B", 99,
               "--records", recs, "-o", out)
    assert code == 0
    assert out.read_text().startswith("n,block,key,stat,value")
    assert len(recs.read_text().splitlines()) == 5


def test_determinism_and_replay(tmp_path):
    a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
    argv = ("--seed", 4, "bands", "-i", FIXTURE, "--B", 99, "--format", "json")
    run(*argv, "-o", a)
    run(*argv, "-o", b)
    assert a.read_text() == b.read_text()
    assert run("replay", tmp_path / "a.json.record.json", "-o", c) == 0
    assert c.read_text() == a.read_text()


def test_exit_codes(tmp_path, capsys):
    assert run("simulate", "--scenario", "Q") == 2
    assert run("simulate", "--n", 0) == 2
    assert run("estimate", "-i", tmp_path / "missing.csv") == 2
    assert run("roots", "--lambda", 0.5, 1.0, -0.9, 1.0, 1.0) == 4
    assert run("replay", tmp_path / "missing.json") == 2
    assert run("no-such-command") == 2
    flat = tmp_path / "flat.csv"
    flat.write_text("pi,y\n" + "".join(f"{np.sin(i)},1.0\n" for i in range(40)))
    assert run("estimate", "-i", flat) == 3
    assert cli._exit_code(DegenerateScale("x")) == 5
    assert cli._exit_code(McAborted("x")) == 6


def test_bad_row_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("pi,y\n" + "".join(f"{i},{i % 3}\n" for i in range(20)) + "nan,1\n")
    assert run("estimate", "-i", bad) == 2
    assert "row" in capsys.readouterr().err


def test_read_series_missing_column(tmp_path):
    f = tmp_path / "x.csv"
    f.write_text("a,b\n1,2\n")
    with pytest.raises(InvalidData):
        cli.read_series(f)


def test_pct_change():
    np.testing.assert_allclose(cli.pct_change(np.array([100.0, 110.0, 99.0])), [10.0, -10.0])


def test_pct_change_transform(tmp_path):
    f = tmp_path / "lvl.csv"
    v = 100 * np.cumprod(1 + 0.01 * np.sin(np.arange(30)))
    f.write_text("pi,y\n" + "".join(f"{a},{a}\n" for a in v))
    d = cli.read_series(f, y_transform="pct_change")
    assert d.n == 29
    np.testing.assert_allclose(d.y, cli.pct_change(v))
    np.testing.assert_allclose(d.pi, v[1:])
