"""Optimal threshold power policies and the per-user interference-budget solve.

The transmitter gives receiver j a share eta_j of the normalized interference
budget.  Given the budget multiplier gamma_j, the power in each fading state
has a closed form; the stronger receiver's branch is self-contained and the
weaker receiver's branch sees the stronger one's power as extra noise, so
states are evaluated stronger-first.  gamma_j is found numerically from the
saturated budget equality.
"""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .channel import FadingState, NormalizedPowers, RateStrategy, make_rng, sample_fading
from .sensing import ScenarioProbs

log = logging.getLogger(__name__)

GAMMA_BRACKET = (1e-8, 1e8)
MAX_OUTER_ITER = 100


class SolverError(RuntimeError):
    def __init__(self, msg, residuals=None, delta=None):
        super().__init__(msg)
        self.residuals = residuals
        self.delta = delta


@dataclass(frozen=True)
class QoSParams:
    theta1: float = 0.01  # 1/bit
    theta2: float = 0.01

    def __post_init__(self):
        if not (self.theta1 > 0 and self.theta2 > 0):
            raise ValueError("QoS exponents must be positive")

    def theta(self, j):
        return self.theta1 if j == 1 else self.theta2

    def kappa(self, j, params):
        """Exponent of (1 + SINR) in the per-frame MGF term: theta (T-N) B / ln 2."""
        return self.theta(j) * params.data_duration * params.bandwidth / math.log(2)


@dataclass(frozen=True)
class PowerSplit:
    delta: float

    def __post_init__(self):
        if not 0 <= self.delta <= 1:
            raise ValueError("delta must lie in [0, 1]")

    def eta(self, j):
        return self.delta if j == 1 else 1.0 - self.delta


@dataclass(frozen=True)
class PowerPolicy:
    gamma1: float
    gamma2: float
    strategy: RateStrategy
    split: PowerSplit
    fused_pd: float
    scenarios: ScenarioProbs
    iterations: int = 0
    residuals: tuple = (0.0, 0.0)

    def gamma(self, j):
        return self.gamma1 if j == 1 else self.gamma2

    @property
    def fused_pm(self):
        return 1.0 - self.fused_pd

    def alpha(self, j, params, qos):
        """Lagrange multiplier of user j's budget constraint."""
        return self.gamma(j) * qos.kappa(j, params) * params.snr

    def idle_terms(self, params):
        """(scenario weight, base noise) used by the sensed-idle branch."""
        if self.strategy is RateStrategy.GREEDY:
            return self.scenarios.p_4, 1.0
        return self.scenarios.p_i, params.beta


class ExpectationEstimator:
    """Weighted point set standing in for E_z{.} over the fading law.

    The same points are reused for every gamma evaluation within a solve, so
    the budget functions are deterministic and monotone.
    """

    def __init__(self, z, weights=None, kind="discrete"):
        self.z = z
        n = len(z)
        if weights is None:
            weights = np.full(n, 1.0 / n)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if weights.size != n or np.any(weights < 0):
            raise ValueError("weights must be nonnegative, one per state")
        if not math.isclose(weights.sum(), 1.0, rel_tol=0, abs_tol=1e-12):
            raise ValueError("weights must sum to 1")
        self.weights = weights
        self.kind = kind

    @classmethod
    def monte_carlo(cls, samples, seed, stream=0, mean_z1=1.0, mean_z2=1.0, exchangeable=False):
        """Plain Monte Carlo set drawn from stream (seed, stream).

        With `exchangeable` (equal means only) each draw is paired with its
        swap, so the set is exactly symmetric under relabeling the receivers.
        """
        rng = make_rng(seed, stream)
        if exchangeable:
            if mean_z1 != mean_z2:
                raise ValueError("exchangeable sampling needs equal mean gains")
            half = sample_fading(rng, mean_z1, mean_z2, (samples + 1) // 2)
            z = FadingState(np.concatenate([half.z1, half.z2]), np.concatenate([half.z2, half.z1]))
        else:
            z = sample_fading(rng, mean_z1, mean_z2, samples)
        est = cls(z, kind="monte_carlo")
        est.seed, est.stream, est.exchangeable = seed, stream, exchangeable
        return est

    @classmethod
    def gauss_laguerre(cls, nodes=32, mean_z1=1.0, mean_z2=1.0):
        """Tensor Gauss-Laguerre rule for two independent exponential gains."""
        x, w = np.polynomial.laguerre.laggauss(nodes)
        z1, z2 = np.meshgrid(x * mean_z1, x * mean_z2, indexing="ij")
        ww = np.outer(w, w).reshape(-1)
        return cls(FadingState(z1.reshape(-1), z2.reshape(-1)), ww / ww.sum(), kind="quadrature")

    def __len__(self):
        return len(self.z)

    def mean(self, values):
        return float(np.dot(self.weights, values))

    def stderr(self, values):
        """Standard error of `mean`; zero for deterministic rules."""
        if self.kind != "monte_carlo":
            return 0.0
        values = np.asarray(values, dtype=float)
        return float(values.std(ddof=1) / math.sqrt(values.size))


def branch_power(z, weight, gamma, cost, noise, kappa, snr):
    """Threshold power for one user and one sensing outcome.

    `noise` is the effective noise (base noise plus any interference from the
    stronger receiver), `weight` the scenario probability and `cost` the
    probability with which this power counts against the budget.
    """
    z = np.asarray(z, dtype=float)
    noise = np.broadcast_to(np.asarray(noise, dtype=float), z.shape)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = weight * z / (gamma * cost * noise)
        ratio = np.where(z > 0, ratio, 0.0)
        level = np.power(ratio, 1.0 / (kappa + 1.0)) - 1.0
        mu = np.where(ratio > 1.0, noise / (snr * z) * level, 0.0)
    return mu


def _pair(z, g1, g2, weight, cost, base, k1, k2, snr):
    s1 = branch_power(z.z1, weight, g1, cost, base, k1, snr)
    s2 = branch_power(z.z2, weight, g2, cost, base, k2, snr)
    w1 = branch_power(z.z1, weight, g1, cost, base + snr * s2 * z.z1, k1, snr)
    w2 = branch_power(z.z2, weight, g2, cost, base + snr * s1 * z.z2, k2, snr)
    # ties use the stronger branch for both
    mu1 = np.where(z.z1 >= z.z2, s1, w1)
    mu2 = np.where(z.z2 >= z.z1, s2, w2)
    return mu1, mu2


def policy_busy(z, policy, params, qos):
    return _pair(z, policy.gamma1, policy.gamma2, policy.scenarios.p_b, policy.fused_pd,
                 params.beta, qos.kappa(1, params), qos.kappa(2, params), params.snr)


def policy_idle(z, policy, params, qos):
    weight, base = policy.idle_terms(params)
    return _pair(z, policy.gamma1, policy.gamma2, weight, policy.fused_pm,
                 base, qos.kappa(1, params), qos.kappa(2, params), params.snr)


def policy_powers(z, policy, params, qos):
    b1, b2 = policy_busy(z, policy, params, qos)
    i1, i2 = policy_idle(z, policy, params, qos)
    return NormalizedPowers(b1, b2, i1, i2)


def expected_constraint_power(j, policy, estimator, params, qos):
    """P_d E{mu_j^b} + (1 - P_d) E{mu_j^i} on the estimator's point set."""
    busy = policy_busy(estimator.z, policy, params, qos)[j - 1]
    idle = policy_idle(estimator.z, policy, params, qos)[j - 1]
    return policy.fused_pd * estimator.mean(busy) + policy.fused_pm * estimator.mean(idle)


class _BudgetFunction:
    """Budget use of one user as a function of (own gamma, other gamma).

    Splits the point set into states where the user is stronger (depends on
    its own gamma only) and weaker (also on the other's stronger-branch power).
    """

    def __init__(self, j, estimator, pd, scen, strategy, params, qos):
        m = 2 if j == 1 else 1
        z = estimator.z
        zj, zm = z.gain(j), z.gain(m)
        w = estimator.weights
        strong = zj >= zm
        self.snr = params.snr
        self.pd, self.pm = pd, 1.0 - pd
        self.kj, self.km = qos.kappa(j, params), qos.kappa(m, params)
        if strategy is RateStrategy.GREEDY:
            idle_w, idle_base = scen.p_4, 1.0
        else:
            idle_w, idle_base = scen.p_i, params.beta
        self.terms = [(scen.p_b, pd, params.beta), (idle_w, 1.0 - pd, idle_base)]
        self.zs, self.ws = zj[strong], w[strong]
        self.zw, self.ww = zj[~strong], w[~strong]
        self.zm_w = zm[~strong]
        self._cache_key = None

    def _other(self, gamma_m):
        if self._cache_key != gamma_m:
            self._other_mu = [
                branch_power(self.zm_w, wt, gamma_m, cost, base, self.km, self.snr)
                for wt, cost, base in self.terms
            ]
            self._cache_key = gamma_m
        return self._other_mu

    def __call__(self, gamma_j, gamma_m):
        other = self._other(gamma_m)
        total = 0.0
        for (wt, cost, base), mu_m in zip(self.terms, other):
            if cost == 0.0:
                continue
            s = branch_power(self.zs, wt, gamma_j, cost, base, self.kj, self.snr)
            noise = base + self.snr * mu_m * self.zw
            wk = branch_power(self.zw, wt, gamma_j, cost, noise, self.kj, self.snr)
            total += cost * (np.dot(self.ws, s) + np.dot(self.ww, wk))
        return float(total)


def _solve_one(f, eta, gamma_m, tol, start=None):
    """Root of f(gamma, gamma_m) = eta in log(gamma); f is decreasing."""
    lo, hi = GAMMA_BRACKET
    if start is not None and math.isfinite(start):
        lo, hi = start / 4.0, start * 4.0
    for _ in range(200):
        if f(lo, gamma_m) > eta:
            break
        lo /= 10.0
    else:
        raise SolverError("could not bracket gamma from below")
    for _ in range(200):
        if f(hi, gamma_m) < eta:
            break
        hi *= 10.0
    else:
        raise SolverError("could not bracket gamma from above")
    g = lambda u: f(math.exp(u), gamma_m) - eta
    u = brentq(g, math.log(lo), math.log(hi), xtol=1e-14, rtol=4 * np.finfo(float).eps,
               maxiter=500)
    return math.exp(u)


def solve_gammas(split, strategy, estimator, params, qos, detection, scenarios, tol=1e-6):
    """Find (gamma1, gamma2) meeting both users' budgets with equality.

    Alternates one-dimensional root solves (each monotone in its own gamma)
    until both relative residuals drop below `tol`.
    """
    strategy = RateStrategy.parse(strategy)
    pd = float(detection.fused_pd if hasattr(detection, "fused_pd") else detection)
    if not 0 < pd < 1:
        raise SolverError("fused detection probability must lie strictly in (0, 1)")
    etas = (split.eta(1), split.eta(2))
    fns = {j: _BudgetFunction(j, estimator, pd, scenarios, strategy, params, qos) for j in (1, 2)}
    gam = {1: math.inf, 2: math.inf}
    if etas[0] == 0 and etas[1] == 0:
        raise SolverError("empty budget", delta=split.delta)

    def residual(j):
        eta = etas[j - 1]
        if eta == 0:
            return 0.0
        return abs(fns[j](gam[j], gam[3 - j]) - eta) / eta

    res = (math.inf, math.inf)
    it = 0
    for it in range(1, MAX_OUTER_ITER + 1):
        for j in (1, 2):
            if etas[j - 1] > 0:
                gam[j] = _solve_one(fns[j], etas[j - 1], gam[3 - j], tol,
                                    start=gam[j] if math.isfinite(gam[j]) else None)
        res = (residual(1), residual(2))
        if max(res) < tol:
            break
        # single active user: no coupling to iterate on
        if min(etas) == 0:
            break
    else:
        raise SolverError(f"gamma iteration did not converge: residuals {res}",
                          residuals=res, delta=split.delta)
    if max(res) >= tol:
        raise SolverError(f"budget residuals {res} above tolerance", residuals=res,
                          delta=split.delta)
    log.debug("delta=%.3f gammas=(%.4g, %.4g) after %d sweeps", split.delta, gam[1], gam[2], it)
    return PowerPolicy(gam[1], gam[2], strategy, split, pd, scenarios, iterations=it,
                       residuals=res)


def gamma_stderr(j, policy, estimator, params, qos, rel_step=1e-4):
    """Sampling error of the solved gamma_j, by the delta method.

    Propagates the standard error of the budget average through the local
    slope of the budget function; coupling through the other user is ignored.
    """
    if estimator.kind != "monte_carlo" or policy.split.eta(j) == 0:
        return 0.0
    z = estimator.z
    per_state = (policy.fused_pd * policy_busy(z, policy, params, qos)[j - 1]
                 + policy.fused_pm * policy_idle(z, policy, params, qos)[j - 1])
    se_f = per_state.std(ddof=1) / math.sqrt(per_state.size)
    g = policy.gamma(j)
    bumped = []
    for factor in (1 + rel_step, 1 - rel_step):
        kw = {"gamma1": policy.gamma1, "gamma2": policy.gamma2}
        kw[f"gamma{j}"] = g * factor
        bumped.append(expected_constraint_power(j, replace(policy, **kw), estimator, params, qos))
    slope = (bumped[0] - bumped[1]) / (2 * rel_step * g)
    return float(se_f / abs(slope)) if slope != 0 else math.inf
