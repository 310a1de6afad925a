from dataclasses import replace

import numpy as np
import pytest

from nkpclearn.domain import (
    AuxParams,
    DegenerateVariance,
    SCENARIO_A_AUX,
    SCENARIO_A_THETA,
    StructuralParams,
)
from nkpclearn.equilibria import equilibrium_mean
from nkpclearn.filter import InitPolicy, run_filter
from nkpclearn.simulator import SimConfig, SimPath, simulate, simulate_batch, split_seed


def cfg(**kw):
    base = dict(theta=SCENARIO_A_THETA, aux=SCENARIO_A_AUX, n=300, seed=3)
    base.update(kw)
    return SimConfig(**base)


def test_shapes_and_determinism():
    a, b = simulate(cfg()), simulate(cfg())
    assert a.n == 300
    for name in ("pi", "y", "alpha", "beta", "r", "u", "eps"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert not np.array_equal(a.pi, simulate(cfg(seed=4)).pi)


def test_first_period_convention():
    p = simulate(cfg())
    assert p.beta[0] == 0.0
    g = SCENARIO_A_THETA.gamma
    assert p.r[0] == pytest.approx(g * (p.pi[0] - 0.0) ** 2, rel=1e-14)


def test_noise_free_fixed_point():
    th = StructuralParams(0.076, 0.9, 0.3)
    aux = AuxParams(-0.02, 0.93, 0.0, 0.0)
    mean = equilibrium_mean(th, aux)
    p = simulate(SimConfig(th, aux, 200, init_pi=mean))
    np.testing.assert_allclose(p.pi, mean, rtol=1e-12)
    assert np.all(p.beta == 0.0)


def test_guard_off_raises():
    th = StructuralParams(0.076, 0.9, 0.3)
    aux = AuxParams(-0.02, 0.93, 0.0, 0.0)
    with pytest.raises(DegenerateVariance):
        simulate(SimConfig(th, aux, 50, init_pi=equilibrium_mean(th, aux), guard=False))


def test_batch_first_rep_equals_simulate():
    c = cfg()
    first = next(simulate_batch(c, 3))
    np.testing.assert_array_equal(first.pi, simulate(c).pi)
    paths = list(simulate_batch(c, 3))
    assert len({p.pi[5] for p in paths}) == 3


def test_split_seed():
    assert split_seed(9, 0) == 9
    assert split_seed(9, 1) == split_seed(9, 1) != split_seed(9, 2)


def test_reconstruction():
    p = simulate(cfg(n=1000))
    lp = run_filter(p.dataset(), SCENARIO_A_THETA.gamma, InitPolicy.fixed(0.0))
    for name in ("alpha", "beta", "r"):
        np.testing.assert_allclose(getattr(lp, name), getattr(p, name), rtol=0, atol=1e-12)


def test_burn_in_carries_state():
    long = simulate(cfg(n=400, burn_in=0))
    cut = simulate(cfg(n=300, burn_in=100))
    np.testing.assert_array_equal(long.pi[100:], cut.pi)
    np.testing.assert_array_equal(long.beta[100:], cut.beta)


def test_forgetting_initial_value():
    # fast-forgetting design: the mean of beliefs contracts at rate 1 - gamma (1 - delta)
    th = StructuralParams(0.2, 0.5, 0.3)
    a = simulate(cfg(theta=th, n=500, init_pi=0.0))
    b = simulate(cfg(theta=th, n=500, init_pi=10.0))
    assert np.max(np.abs(a.pi - b.pi)[250:]) < 1e-6


def test_forgetting_rate_scenario_a():
    # near-unit delta forgets slowly, at rate 1 - gamma (1 - delta) per period
    a = simulate(cfg(n=2000, init_pi=0.0))
    b = simulate(cfg(n=2000, init_pi=10.0))
    d = np.abs(a.alpha - b.alpha)
    rate = (d[1999] / d[999]) ** (1 / 1000)
    g, dl = SCENARIO_A_THETA.gamma, SCENARIO_A_THETA.delta
    assert rate == pytest.approx(1 - g * (1 - dl), abs=5e-5)


def test_csv_roundtrip(tmp_path):
    p = simulate(cfg(n=50))
    f = p.to_csv(tmp_path / "p.csv")
    q = SimPath.from_csv(f)
    np.testing.assert_array_equal(p.pi, q.pi)
    np.testing.assert_array_equal(p.eps, q.eps)
    assert f.read_text() == p.csv_text()


def test_custom_shocks():
    def student(rng, size):
        return rng.standard_t(5, size) / np.sqrt(5 / 3)
    p = simulate(cfg(shock_dist=student))
    assert np.all(np.isfinite(p.pi))


@pytest.mark.parametrize("kw", [dict(n=0), dict(burn_in=-1),
                                dict(theta=StructuralParams(1.2, 0.5, 0.1)),
                                dict(aux=replace(SCENARIO_A_AUX, rho=1.0))])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        cfg(**kw)
