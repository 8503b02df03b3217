"""Acceptance criteria, one test each, with the stated tolerance and time budget.

Every test records a PASS/FAIL line that is printed in the terminal summary.
"""
import math
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from effcap.capacity import default_delta_grid, region_sweep
from effcap.channel import FadingState, RateStrategy, make_rng
from effcap.config import RunConfig
from effcap.oracles import DEFAULT_2X2, run_fusion_oracle, run_kkt_check, run_mgf_sim_check, run_policy_oracle
from effcap.power import PowerSplit, expected_constraint_power, solve_gammas

pytestmark = pytest.mark.acceptance

GRID = default_delta_grid(11)


@contextmanager
def criterion(num, title, budget):
    t0 = time.perf_counter()
    state = {"detail": ""}
    ok = False
    try:
        yield state
        ok = True
    finally:
        dt = time.perf_counter() - t0
        within = dt < budget
        tag = "PASS" if ok and within else "FAIL"
        ACCEPTANCE_LINES.append(f"criterion {num:02d} [{tag}] {title} ({dt:.1f}s / {budget:g}s) {state['detail']}")
    assert within, f"runtime {dt:.1f}s over budget {budget}s"


def sweep(cfg, strategy, rule="majority", grid=GRID):
    det = cfg.detection(rule)
    res = region_sweep(grid, strategy, cfg.make_estimator(), cfg.system_params(), cfg.qos(), det,
                       cfg.scenarios(det), rule=rule, tol=cfg.tol)
    assert not any(p.error for p in res.points)
    return res


def arrays(res):
    return (np.array(res.c1), np.array(res.c2), np.array([p.se1 for p in res.points]),
            np.array([p.se2 for p in res.points]))


def margins(win, lose):
    """Per-coordinate (winner - loser) / combined standard error."""
    a1, a2, s1, s2 = arrays(win)
    b1, b2, t1, t2 = arrays(lose)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (a1 - b1) / np.hypot(s1, t1), (a2 - b2) / np.hypot(s2, t2)


def test_fusion_exactness():
    with criterion(1, "fusion closed form vs enumeration", 1) as c:
        r = run_fusion_oracle(trials=100)
        c["detail"] = f"max dev {r.error:.1e}"
        assert r.error < 1e-14


def test_sensing_pair():
    with criterion(2, "single threshold gives the quoted per-SU pair", 1) as c:
        cfg = RunConfig()
        det = cfg.detection("majority")
        c["detail"] = f"lambda={cfg.threshold_value():.4f} pf={det.per_su_pf:.4f} pd={det.per_su_pd:.4f}"
        assert cfg.sample_count == 20 and cfg.beta == 2.0
        assert cfg.threshold_value() == pytest.approx(1.356, abs=5e-4)
        assert abs(det.per_su_pf - 0.13) <= 0.005
        assert abs(det.per_su_pd - 0.84) <= 0.01


def test_constraint_saturation():
    with criterion(3, "budgets met on 20 random configurations", 120) as c:
        rng = np.random.default_rng(2024)
        worst = 0.0
        for k in range(20):
            cfg = RunConfig(theta1=10 ** rng.uniform(-3, -1), theta2=10 ** rng.uniform(-3, -1),
                            beta=float(rng.uniform(1.0, 5.0)), snr_db=float(rng.uniform(-15, 10)),
                            samples=50_000, seed=k)
            strategy = RateStrategy(int(rng.integers(1, 3)))
            delta = float(rng.uniform(0.01, 0.99))
            det = cfg.detection("majority")
            params, qos, est = cfg.system_params(), cfg.qos(), cfg.make_estimator()
            pol = solve_gammas(PowerSplit(delta), strategy, est, params, qos, det, cfg.scenarios(det),
                               tol=cfg.tol)
            for j in (1, 2):
                eta = pol.split.eta(j)
                worst = max(worst, abs(expected_constraint_power(j, pol, est, params, qos) - eta) / eta)
        c["detail"] = f"worst relative residual {worst:.1e}"
        assert worst <= 1e-3


def test_policy_optimality_discrete():
    with criterion(4, "closed-form policy vs lattice minimum on 2x2 fading", 300) as c:
        cfg = RunConfig()
        det = cfg.detection("majority")
        configs = [(d, s) for s in RateStrategy for d in (0.3, 0.5, 0.7)]
        r = run_policy_oracle(DEFAULT_2X2, configs, cfg.system_params(), cfg.qos(), det, cfg.scenarios(det))
        c["detail"] = f"worst gap {r.error:.1e}"
        assert r.passed and r.error <= 1e-3


def test_kkt_residuals():
    with criterion(5, "interior stationarity on 1000 states", 10) as c:
        cfg = RunConfig()
        det = cfg.detection("majority")
        params, qos, est = cfg.system_params(), cfg.qos(), cfg.make_estimator()
        pol = solve_gammas(PowerSplit(0.5), RateStrategy.PRECAUTIOUS, est, params, qos, det,
                           cfg.scenarios(det), tol=cfg.tol)
        idx = make_rng(cfg.seed, 2000).choice(len(est), size=1000, replace=False)
        r = run_kkt_check(pol, FadingState(est.z.z1[idx], est.z.z2[idx]), params, qos, tol=1e-8)
        c["detail"] = f"worst {r.error:.1e}; {r.detail}"
        assert r.passed


def test_mgf_simulation():
    with criterion(6, "frame simulation vs closed form, 1e5 frames", 60) as c:
        r = run_mgf_sim_check(RunConfig(frames=100_000), sigmas=3.0)
        c["detail"] = f"worst z-score {r.error:.2f}"
        assert r.passed


def test_precautious_dominates_at_0db():
    with criterion(7, "0 dB: Strategy 2 dominates Strategy 1 at every delta", 600) as c:
        cfg = RunConfig(snr_db=0.0)
        s1, s2 = sweep(cfg, 1), sweep(cfg, 2)
        m1, m2 = margins(s2, s1)
        interior = slice(1, -1)
        worst = min(np.min(m1[interior]), np.min(m2[interior]))
        c["detail"] = (f"worst interior margin {worst:.1f} sigma; areas S1 {s1.area():.4f} "
                       f"S2 {s2.area():.4f}")
        lost = [d for d, a1, b1, a2, b2 in zip(GRID, s2.c1, s1.c1, s2.c2, s1.c2) if a1 < b1 or a2 < b2]
        assert not lost, f"Strategy 1 ahead in a coordinate at delta {lost}"
        assert worst > 3


def test_greedy_dominates_at_low_snr_and_saturates():
    with criterion(8, "-15 dB: Strategy 1 dominates; Strategy 1 saturates 5->7 dB", 900) as c:
        low = RunConfig(snr_db=-15.0)
        m1, m2 = margins(sweep(low, 1), sweep(low, 2))
        worst = min(np.min(m1[1:-1]), np.min(m2[1:-1]))
        a = {(s, db): sweep(RunConfig(snr_db=db), s).area() for s in (1, 2) for db in (5.0, 7.0)}
        g1 = a[1, 7.0] / a[1, 5.0] - 1
        g2 = a[2, 7.0] / a[2, 5.0] - 1
        c["detail"] = f"worst interior margin {worst:.1f} sigma; growth S1 {g1:.3f} vs S2 {g2:.3f}"
        assert worst > 3
        assert g1 < g2


def test_delay_exponent_shrinks_region():
    with criterion(9, "larger theta shrinks both coordinates; C2 at delta=0 ignores theta1", 600) as c:
        checked = 0
        for strategy in (1, 2):
            prev = None
            for th in (0.001, 0.01, 0.1):
                c1, c2, _, _ = arrays(sweep(RunConfig(theta1=th, theta2=th), strategy))
                if prev is not None:
                    assert np.all(c1[1:-1] < prev[0][1:-1]) and np.all(c2[1:-1] < prev[1][1:-1])
                    checked += 1
                prev = (c1, c2)
        zero = [0.0, 1.0]
        r_lo = sweep(RunConfig(theta1=0.001), 2, grid=zero).points[0]
        r_hi = sweep(RunConfig(theta1=0.1), 2, grid=zero).points[0]
        diff = abs(r_lo.c2 - r_hi.c2)
        c["detail"] = f"{checked} theta steps shrink; C2(0) diff {diff:.1e} (se {r_lo.se2:.1e})"
        assert diff <= 3 * math.hypot(r_lo.se2, r_hi.se2)


def test_pu_interference_lowers_capacity():
    with criterion(10, "larger beta lowers Strategy 2 capacities at delta=0.5", 600) as c:
        grid = [0.0, 0.5, 1.0]
        vals = []
        for beta in (2.0, 3.0, 5.0):
            cfg = RunConfig(beta=beta)
            p = sweep(cfg, 2, grid=grid).points[1]
            vals.append((p.c1, p.c2))
        c["detail"] = " ".join(f"({a:.4f},{b:.4f})" for a, b in vals)
        for (a1, a2), (b1, b2) in zip(vals, vals[1:]):
            assert b1 < a1 and b2 < a2


def test_region_output_deterministic(tmp_path):
    with criterion(11, "identical region CSV across runs", 120) as c:
        outs = []
        for k in range(2):
            path = tmp_path / f"run{k}.csv"
            subprocess.run([sys.executable, "-m", "effcap", "region", "--strategy", "both",
                            "--rule", "majority", "--delta-steps", "11", "--out", str(path)],
                           check=True, capture_output=True)
            outs.append(path.read_bytes())
        c["detail"] = f"{len(outs[0])} bytes"
        assert outs[0] == outs[1]
