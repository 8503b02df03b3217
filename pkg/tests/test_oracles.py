import json

import numpy as np
import pytest

import effcap.power as power
from effcap.channel import FadingState, RateStrategy, SystemParams
from effcap.config import RunConfig
from effcap.oracles import (
    DEFAULT_2X2, CheckResult, _user_state_objectives, DiscreteFadingModel, ValidationReport, brute_force_policy,
    closed_form_objective, fd_gradient_residual, run_fusion_oracle, run_kkt_check,
    run_policy_oracle, run_validation, stationarity_residuals,
)
from effcap.power import ExpectationEstimator, PowerSplit, policy_powers, solve_gammas


@pytest.fixture(scope="module")
def setup():
    cfg = RunConfig()
    det = cfg.detection("majority")
    return cfg, cfg.system_params(), cfg.qos(), det, cfg.scenarios(det)


def test_discrete_model_validation():
    m = DiscreteFadingModel.product((1.0, 2.0), (0.5, 0.5), (1.0,), (1.0,))
    assert len(m.probs) == 2 and sum(m.probs) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        DiscreteFadingModel((1.0, 1.0), (1.0, 1.0), (0.4, 0.4))


def test_fusion_oracle_passes():
    r = run_fusion_oracle()
    assert r.passed and r.error < 1e-14


def test_single_state_single_user(setup):
    cfg, p, q, det, scen = setup
    model = DiscreteFadingModel((1.2,), (0.8,), (1.0,))
    r = run_policy_oracle(model, [(1.0, 1), (1.0, 2)], p, q, det, scen)
    assert r.passed, r.detail


def test_two_by_two_policy_oracle(setup):
    cfg, p, q, det, scen = setup
    r = run_policy_oracle(DEFAULT_2X2, [(d, s) for s in (1, 2) for d in (0.3, 0.7)], p, q, det, scen)
    assert r.passed and r.error < 1e-6, r.detail


def test_lattice_beats_perturbed_policies(setup):
    cfg, p, q, det, scen = setup
    est = DEFAULT_2X2.to_estimator()
    pol = solve_gammas(PowerSplit(0.5), 2, est, p, q, det, scen, tol=1e-12)
    pw = policy_powers(DEFAULT_2X2.state(), pol, p, q)
    bf = brute_force_policy(1, DEFAULT_2X2, pol.split, pol.strategy, p, q, pol.fused_pd, scen,
                            pw.busy2, pw.idle2)
    assert bf.budget_used == pytest.approx(0.5, rel=1e-6)
    # equal power in every state and mode spends the same budget
    terms, const = _user_state_objectives(1, DEFAULT_2X2, pol.strategy, p, q, scen, pw.busy2, pw.idle2)
    uniform = const + sum(float(f(np.array([0.5]))[0]) for f in terms)
    assert uniform > bf.objective * (1 + 1e-3)
    assert closed_form_objective(1, pol, DEFAULT_2X2, p, q) == pytest.approx(bf.objective, rel=1e-6)


def test_kkt_on_random_states(setup):
    cfg, p, q, det, scen = setup
    est = ExpectationEstimator.monte_carlo(20_000, 3)
    for s in (1, 2):
        pol = solve_gammas(PowerSplit(0.4), s, est, p, q, det, scen)
        z = FadingState(est.z.z1[:2000], est.z.z2[:2000])
        interior, clamp, n = stationarity_residuals(pol, z, p, q)
        assert interior < 1e-10 and clamp <= 1e-12 and n > 1000
        assert fd_gradient_residual(pol, z, p, q) < 1e-6
        assert run_kkt_check(pol, z, p, q).passed


def test_kkt_clamped_states(setup):
    cfg, p, q, det, scen = setup
    est = ExpectationEstimator.monte_carlo(20_000, 3)
    pol = solve_gammas(PowerSplit(0.5), 2, est, p, q, det, scen)
    tiny = FadingState(np.full(10, 1e-6), np.full(10, 2e-6))
    pw = policy_powers(tiny, pol, p, q)
    assert np.all(pw.busy1 == 0) and np.all(pw.idle2 == 0)
    assert stationarity_residuals(pol, tiny, p, q)[1] <= 1e-12


def test_kkt_detects_wrong_policy(setup, monkeypatch):
    cfg, p, q, det, scen = setup
    est = ExpectationEstimator.monte_carlo(20_000, 3)
    pol = solve_gammas(PowerSplit(0.5), 2, est, p, q, det, scen)
    z = FadingState(est.z.z1[:500], est.z.z2[:500])
    assert run_kkt_check(pol, z, p, q).passed
    orig = power.branch_power
    monkeypatch.setattr(power, "branch_power", lambda *a: 1.05 * orig(*a))
    assert not run_kkt_check(pol, z, p, q).passed


def test_report_serialization_and_duplicates():
    rep = ValidationReport()
    rep.add(CheckResult("a", True, 0.0, 1.0))
    with pytest.raises(ValueError):
        rep.add(CheckResult("a", True, 0.0, 1.0))
    assert json.loads(rep.to_json())["checks"][0]["name"] == "a"
    assert "a" in rep.to_text()


def test_validation_deterministic():
    cfg = RunConfig(samples=20_000, frames=20_000)
    a, b = run_validation(cfg, kkt_states=200), run_validation(cfg, kkt_states=200)
    assert a.passed and b.passed
    strip = lambda r: [(c.name, c.passed, c.error, c.detail) for c in r.checks]
    assert strip(a) == strip(b)
