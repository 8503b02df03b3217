"""Effective capacities under a solved policy, the delta sweep, and a frame simulator."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .channel import RateStrategy, Scenario, effective_service_bits, rate_busy, rate_idle, sample_fading
from .power import PowerSplit, SolverError, policy_powers, solve_gammas
from .sensing import N_SENSORS, FusionRule


@dataclass(frozen=True)
class EffCapPoint:
    delta: float
    c1: float  # bits/s/Hz, on the solve sample set
    c2: float
    strategy: RateStrategy
    rule: object = None
    gamma1: float = math.nan
    gamma2: float = math.nan
    iterations: int = 0
    residual1: float = 0.0
    residual2: float = 0.0
    se1: float = 0.0
    se2: float = 0.0
    c1_indep: float = math.nan  # re-evaluated on an independent sample set
    c2_indep: float = math.nan
    error: str = ""


@dataclass
class RegionResult:
    points: list
    strategy: RateStrategy
    rule: object = None
    metadata: dict = field(default_factory=dict)

    @property
    def deltas(self):
        return np.array([p.delta for p in self.points])

    @property
    def c1(self):
        return np.array([p.c1 for p in self.points])

    @property
    def c2(self):
        return np.array([p.c2 for p in self.points])

    def area(self):
        return region_area(self.c1, self.c2)


def region_area(c1, c2):
    """Area enclosed by the origin and the delta-ordered frontier (shoelace)."""
    x = np.concatenate([[0.0], np.asarray(c1, dtype=float), [0.0]])
    y = np.concatenate([[0.0], np.asarray(c2, dtype=float), [0.0]])
    return 0.5 * abs(np.dot(x[:-1], y[1:]) - np.dot(x[1:], y[:-1]))


def _log_terms(j, policy, z, params, qos):
    """Log-weights and exponents of the per-state MGF sum, shape (terms, states)."""
    powers = policy_powers(z, policy, params, qos)
    th = qos.theta(j) * params.data_duration
    sc = policy.scenarios
    xb = -th * rate_busy(j, z, powers, params)
    xi = -th * rate_idle(j, z, powers, params, policy.strategy)
    if policy.strategy is RateStrategy.GREEDY:
        coef = [sc.p_b, sc.p_4, sc.p_2]
        expo = [xb, xi, np.zeros_like(xb)]
    else:
        coef = [sc.p_b, sc.p_i]
        expo = [xb, xi]
    return np.asarray(coef)[:, None], np.vstack(expo)


def log_mgf(j, policy, estimator, params, qos):
    """ln E{sum_k p_k exp(-theta_j (T-N) R_k)} in max-shifted form."""
    coef, expo = _log_terms(j, policy, estimator.z, params, qos)
    b = coef * estimator.weights[None, :]
    return float(logsumexp(expo, b=b))


def effective_capacity(j, policy, estimator, params, qos):
    """Normalized effective capacity of receiver j in bits/s/Hz."""
    if policy.split.eta(j) == 0:
        return 0.0
    lm = log_mgf(j, policy, estimator, params, qos)
    return max(0.0, -lm / (qos.theta(j) * params.frame_duration * params.bandwidth))


def effective_capacity_stderr(j, policy, estimator, params, qos):
    """Delta-method standard error of `effective_capacity` for Monte Carlo sets."""
    if estimator.kind != "monte_carlo" or policy.split.eta(j) == 0:
        return 0.0
    coef, expo = _log_terms(j, policy, estimator.z, params, qos)
    shift = expo.max()
    per_state = (coef * np.exp(expo - shift)).sum(axis=0)
    mean = per_state.mean()
    if mean == 0:
        return math.inf
    rel = per_state.std(ddof=1) / math.sqrt(per_state.size) / mean
    return float(rel / (qos.theta(j) * params.frame_duration * params.bandwidth))


def _sweep_point(args):
    delta, strategy, rule, estimator, report, params, qos, detection, scenarios, tol = args
    try:
        pol = solve_gammas(PowerSplit(delta), strategy, estimator, params, qos, detection,
                           scenarios, tol=tol)
    except SolverError as exc:
        return EffCapPoint(delta, math.nan, math.nan, strategy, rule, error=str(exc),
                           residual1=(exc.residuals or (math.nan,) * 2)[0],
                           residual2=(exc.residuals or (math.nan,) * 2)[1])
    c = [effective_capacity(j, pol, estimator, params, qos) for j in (1, 2)]
    se = [effective_capacity_stderr(j, pol, estimator, params, qos) for j in (1, 2)]
    if report is not None:
        ci = [effective_capacity(j, pol, report, params, qos) for j in (1, 2)]
    else:
        ci = [math.nan, math.nan]
    return EffCapPoint(delta, c[0], c[1], strategy, rule, pol.gamma1, pol.gamma2,
                       pol.iterations, pol.residuals[0], pol.residuals[1], se[0], se[1],
                       ci[0], ci[1])


def region_sweep(delta_grid, strategy, estimator, params, qos, detection, scenarios,
                 rule=None, report_estimator=None, tol=1e-6, workers=1):
    """Trace the delta-parameterized effective-capacity frontier.

    Solver failures are recorded on the point (NaN capacities, `error` set)
    rather than aborting the sweep.
    """
    strategy = RateStrategy.parse(strategy)
    grid = [float(d) for d in delta_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("delta grid must be strictly increasing")
    if not grid or grid[0] != 0.0 or grid[-1] != 1.0:
        raise ValueError("delta grid must include both endpoints 0 and 1")
    tasks = [(d, strategy, rule, estimator, report_estimator, params, qos, detection,
              scenarios, tol) for d in grid]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            points = list(pool.map(_sweep_point, tasks))
    else:
        points = [_sweep_point(t) for t in tasks]
    return RegionResult(points, strategy, rule)


def default_delta_grid(steps=41):
    if steps < 2:
        raise ValueError("need at least two delta points")
    # rounding keeps printed values like 0.3 exact-looking
    return np.round(np.linspace(0.0, 1.0, steps), 12)


@dataclass(frozen=True)
class SimEstimate:
    capacity: float
    stderr: float
    frames: int
    scenario_counts: dict


def mgf_simulation(policy, params, qos, frames, rng, rho=None, per_su=None, rule=None,
                   mean_z1=1.0, mean_z2=1.0):
    """Frame-by-frame estimate of both receivers' effective capacities.

    Each frame draws fading, PU activity and the sensing outcome.  With
    `per_su=(pf, pd)` and `rule` the three sensor votes are drawn and fused
    explicitly; otherwise the fused probabilities on the policy are used.
    Returns one `SimEstimate` per receiver.
    """
    if frames < 1:
        raise ValueError("frames must be positive")
    rho = policy.scenarios.rho if rho is None else rho
    z = sample_fading(rng, mean_z1, mean_z2, frames)
    active = rng.random(frames) < rho
    if per_su is not None:
        pf, pd = per_su
        k = FusionRule.parse(rule).votes
        p_vote = np.where(active, pd, pf)
        votes = (rng.random((N_SENSORS, frames)) < p_vote[None, :]).sum(axis=0)
        sensed_busy = votes >= k
    else:
        fpf = policy.scenarios.p_b - rho * policy.fused_pd
        fpf = fpf / (1 - rho) if rho < 1 else 0.0
        sensed_busy = rng.random(frames) < np.where(active, policy.fused_pd, fpf)
    tau = np.where(active, np.where(sensed_busy, 1, 2), np.where(sensed_busy, 3, 4))
    powers = policy_powers(z, policy, params, qos)
    out = []
    for j in (1, 2):
        bits = np.zeros(frames)
        for t in Scenario:
            sel = tau == int(t)
            if np.any(sel):
                bits[sel] = effective_service_bits(j, t, z, powers, params, policy.strategy)[sel]
        x = -qos.theta(j) * bits
        lm = float(logsumexp(x) - math.log(frames))
        scale = qos.theta(j) * params.frame_duration * params.bandwidth
        v = np.exp(x - x.max())
        rel = v.std(ddof=1) / math.sqrt(frames) / v.mean() if frames > 1 else math.inf
        counts = {int(t): int(np.sum(tau == int(t))) for t in Scenario}
        out.append(SimEstimate(max(0.0, -lm / scale), float(rel / scale), frames, counts))
    return out
