"""Acceptance criteria, one test per criterion.

Each test prints a single ``C<k> PASS|FAIL ...`` line; the lines are repeated
in the terminal summary (see ``conftest.py``).
"""
import time

import numpy as np
import pytest

from conftest import DATA_DIR
from oracles import brute_force_roots, central_diff, draw_lambda_b2, rel_err
from nkpclearn import cli
from nkpclearn.domain import (
    Lambda,
    SCENARIO_A_AUX,
    SCENARIO_A_THETA,
    SCENARIO_B_AUX,
    SCENARIO_B_THETA,
)
from nkpclearn.equilibria import eval_G, eval_G_derivatives, find_roots
from nkpclearn.filter import run_filter
from nkpclearn.harness import builtin_scenario, run_mc
from nkpclearn.simulator import SimConfig, simulate

pytestmark = pytest.mark.acceptance

LINES: list[str] = []
REPS = 500


def verdict(cid: str, ok: bool, detail: str):
    line = f"{cid} {'PASS' if ok else 'FAIL'} {detail}"
    LINES.append(line)
    print(line)
    assert ok, line


# --- shared Monte Carlo runs --------------------------------------------------------

@pytest.fixture(scope="module")
def mc_a():
    return run_mc(builtin_scenario("A", sample_sizes=(1000, 2000), reps=REPS, bootstrap_B=199))


@pytest.fixture(scope="module")
def mc_b():
    return run_mc(builtin_scenario("B", sample_sizes=(500, 2000), reps=REPS, bootstrap_B=0))


@pytest.fixture(scope="module")
def mc_supf():
    null = run_mc(builtin_scenario("NULL", sample_sizes=(500,), reps=REPS, supf_B=199))
    alt = run_mc(builtin_scenario("A", sample_sizes=(500,), reps=REPS, bootstrap_B=0,
                                  supf_B=199))
    return null, alt


# --- criteria ------------------------------------------------------------------

def test_c1_roots_exact():
    t0 = time.perf_counter()
    a = find_roots(Lambda.from_params(SCENARIO_A_THETA, SCENARIO_A_AUX))
    b = find_roots(Lambda.from_params(SCENARIO_B_THETA, SCENARIO_B_AUX))
    e = find_roots(Lambda(0.90173298, 0.12586481, 0.15752518, 0.4673309 ** 2, 1.1100973 ** 2))
    dt = time.perf_counter() - t0
    ok_a = (a.count == 3 and a.classification == ("simple",) * 3
            and np.allclose(a.roots, [0.174, 0.856, 0.999], atol=1e-3))
    ok_b = (b.count == 2 and b.classification == ("double", "simple")
            and np.allclose(b.roots, [0.5551, 0.9766], atol=1e-3))
    ok_e = e.count == 1 and abs(e.roots[0] - 0.01341) < 1e-3
    verdict("C1", ok_a and ok_b and ok_e and dt < 1.0,
            f"A={np.round(a.roots, 4).tolist()} B={np.round(b.roots, 4).tolist()}"
            f"{list(b.classification)} emp={e.roots[0]:.5f} time={dt:.3f}s")


def test_c2_root_oracle():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    bad_count, worst = 0, 0.0
    counts: dict = {}
    for k in range(1000):
        lam = draw_lambda_b2(rng, focused=k % 2 == 1)
        rep = find_roots(lam)
        brute = brute_force_roots(lam)
        counts[rep.count] = counts.get(rep.count, 0) + 1
        if rep.count != brute.size:
            bad_count += 1
            continue
        worst = max(worst, float(np.max(np.abs(np.asarray(rep.roots) - brute))))
    dt = time.perf_counter() - t0
    verdict("C2", bad_count == 0 and worst < 1e-5 and dt < 60,
            f"count mismatches={bad_count} max loc err={worst:.2e} counts={counts} time={dt:.1f}s")


def test_c3_derivatives():
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    path = simulate(SimConfig(SCENARIO_A_THETA, SCENARIO_A_AUX, 500, seed=3))
    d = path.dataset()
    worst_f = 0.0
    for g in rng.uniform(0.005, 0.3, 100):
        lp = run_filter(d, g, with_derivatives=True)
        hi, lo = run_filter(d, g + 1e-6), run_filter(d, g - 1e-6)
        for an, k in ((lp.alpha_dot, "alpha"), (lp.r_dot, "r"), (lp.beta_dot, "beta"),
                      (lp.h_dot, "h")):
            fd = (getattr(hi, k) - getattr(lo, k)) / 2e-6
            worst_f = max(worst_f, rel_err(an, fd))
    worst_g = 0.0
    eps = 1e-6
    for _ in range(100):
        lam = draw_lambda_b2(rng)
        b = rng.uniform(0.02, 0.98)
        der = eval_G_derivatives(b, lam)
        worst_g = max(worst_g,
                      rel_err(der.G_b, central_diff(lambda x: eval_G(x, lam), b, eps)),
                      rel_err(der.G_bb, central_diff(
                          lambda x: eval_G_derivatives(x, lam).G_b, b, eps)),
                      rel_err(der.G_bbb, central_diff(
                          lambda x: eval_G_derivatives(x, lam).G_bb, b, eps)))
        x = lam.as_array()
        fd_l, fd_bl = np.empty(5), np.empty(5)
        for j in range(5):
            e = np.zeros(5)
            e[j] = eps * max(1.0, abs(x[j]))
            up, dn = Lambda.from_array(x + e), Lambda.from_array(x - e)
            fd_l[j] = (eval_G(b, up) - eval_G(b, dn)) / (2 * e[j])
            fd_bl[j] = (eval_G_derivatives(b, up).G_b - eval_G_derivatives(b, dn).G_b) / (2 * e[j])
        worst_g = max(worst_g, rel_err(der.G_lam, fd_l), rel_err(der.G_blam, fd_bl))
    dt = time.perf_counter() - t0
    verdict("C3", worst_f < 1e-5 and worst_g < 1e-5 and dt < 10,
            f"filter max rel err={worst_f:.2e} G max rel err={worst_g:.2e} time={dt:.1f}s")


def test_c4_estimator_recovery(mc_a):
    p = mc_a.block(1000)["params"]
    bias = np.array([p[k]["bias"] for k in ("gamma", "delta", "psi")])
    sd = np.array([p[k]["sd"] for k in ("gamma", "delta", "psi")])
    ref = np.array([0.0086, 0.0104, 0.0077])
    ok = np.all(np.abs(bias) <= [0.003, 0.015, 0.003]) and np.all(np.abs(sd / ref - 1) <= 0.3)
    verdict("C4", bool(ok), f"bias={np.round(bias, 4).tolist()} sd={np.round(sd, 4).tolist()} "
            f"ref sd={ref.tolist()}")


def test_c5_test_size(mc_a):
    p = mc_a.block(1000)["params"]
    size = np.array([p[k]["size"] for k in ("gamma", "delta", "psi")])
    verdict("C5", bool(np.all((size >= 0.03) & (size <= 0.07))),
            f"size={np.round(size, 4).tolist()}")


def test_c6_root_counts(mc_a, mc_b):
    pa = mc_a.block(2000)["count_freq"]["3"]
    pb = mc_b.block(2000)["count_freq"]["1"]
    verdict("C6", pa >= 0.95 and 0.42 <= pb <= 0.58, f"A P(r=3)={pa:.4f} B P(r=1)={pb:.4f}")


def test_c7_rate_separation(mc_b):
    three = lambda r: r.get("count") == 3
    out = {}
    for key in ("double_left", "double_right", "averaged_pair"):
        sds = [np.std(mc_b.column(n, f"root_{key}", three), ddof=1) for n in (500, 2000)]
        out[key] = (sds[0] / sds[1]) ** 0.5  # two doublings from 500 to 2000
    mean2000 = float(np.mean(mc_b.column(2000, "root_averaged_pair", three)))
    ok = (out["double_left"] < 1.3 and out["double_right"] < 1.3
          and 1.2 <= out["averaged_pair"] <= 1.7 and abs(mean2000 - 0.5551) <= 0.03)
    verdict("C7", ok, "per-doubling sd ratio " + " ".join(f"{k}={v:.3f}" for k, v in out.items())
            + f" averaged mean(n=2000)={mean2000:.4f}")


def test_c8_band_coverage(mc_a):
    cov = mc_a.block(1000)["cover_s"]
    verdict("C8", 0.90 <= cov <= 0.98,
            f"studentized coverage={cov:.4f} percentile={mc_a.block(1000)['cover_p']:.4f}")


def test_c9_supf(mc_supf):
    null, alt = mc_supf
    size = null.block(500)["supf_reject_5"]
    power = alt.block(500)["supf_reject_5"]
    verdict("C9", 0.02 <= size <= 0.09 and power > 0.95, f"size={size:.4f} power={power:.4f}")


def _cli_outputs(tmp, tag):
    fx = DATA_DIR / "sim_fixture.csv"
    cmds = {
        "simulate": ("--seed", 9, "simulate", "--n", 300),
        "estimate": ("estimate", "-i", fx),
        "roots": ("roots", "-i", fx),
        "bands": ("--seed", 9, "bands", "-i", fx, "--B", 99),
        "supf": ("--seed", 9, "supf", "-i", fx, "--B", 99),
        "mc": ("--seed", 9, "mc", "--sizes", 300, "--reps", 4, "--B", 99, "--supf-B", 99),
    }
    out = {}
    for name, argv in cmds.items():
        f = tmp / f"{name}-{tag}.out"
        code = cli.main([str(a) for a in argv] + ["-o", str(f)])
        out[name] = (code, f.read_bytes())
    return out


def test_c10_determinism(tmp_path):
    first, second = _cli_outputs(tmp_path, "1"), _cli_outputs(tmp_path, "2")
    cli_ok = all(first[k] == second[k] and first[k][0] == 0 for k in first)
    scn = builtin_scenario("B", sample_sizes=(300,), reps=8, bootstrap_B=99, supf_B=99)
    a, b, c = run_mc(scn), run_mc(scn), run_mc(scn, threads=2)
    mc_ok = a.records_csv() == b.records_csv() == c.records_csv() and a.to_json() == c.to_json()
    bad = [k for k in first if first[k] != second[k]]
    verdict("C10", cli_ok and mc_ok,
            f"cli commands identical={len(first) - len(bad)}/{len(first)} "
            f"mc identical across runs and threads={mc_ok}")
