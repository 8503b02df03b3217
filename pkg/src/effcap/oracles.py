"""Independent checks of the closed forms: enumeration, lattice search, KKT, simulation."""

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .channel import FadingState, NormalizedPowers, RateStrategy, Scenario, make_rng, rate_busy, rate_idle
from .power import ExpectationEstimator, PowerSplit, expected_constraint_power, policy_powers, solve_gammas
from .sensing import FusionRule, fuse_decisions, k_out_of_n_enumerated


@dataclass(frozen=True)
class DiscreteFadingModel:
    z1: tuple
    z2: tuple
    probs: tuple

    def __post_init__(self):
        if not len(self.z1) == len(self.z2) == len(self.probs):
            raise ValueError("support and probabilities must align")
        if len(self.probs) > 16:
            raise ValueError("support limited to 16 states")
        if min(self.z1) < 0 or min(self.z2) < 0:
            raise ValueError("support points must be nonnegative")
        if abs(sum(self.probs) - 1) > 1e-12 or min(self.probs) < 0:
            raise ValueError("probabilities must be nonnegative and sum to 1")

    @classmethod
    def product(cls, z1_values, z1_probs, z2_values, z2_probs):
        """Independent marginals on each receiver's gain."""
        pts = [(a, b, pa * pb) for a, pa in zip(z1_values, z1_probs)
               for b, pb in zip(z2_values, z2_probs)]
        z1, z2, p = zip(*pts)
        return cls(tuple(z1), tuple(z2), tuple(p))

    def state(self):
        return FadingState(np.array(self.z1, dtype=float), np.array(self.z2, dtype=float))

    def to_estimator(self):
        return ExpectationEstimator(self.state(), np.array(self.probs), kind="discrete")


DEFAULT_2X2 = DiscreteFadingModel.product((0.4, 1.8), (0.5, 0.5), (0.7, 1.3), (0.35, 0.65))


@dataclass
class CheckResult:
    name: str
    passed: bool
    error: float
    tolerance: float
    runtime: float = 0.0
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    def add(self, result):
        if any(c.name == result.name for c in self.checks):
            raise ValueError(f"duplicate check {result.name!r}")
        self.checks.append(result)
        return result

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_text(self):
        lines = []
        for c in self.checks:
            tag = "PASS" if c.passed else "FAIL"
            lines.append(f"[{tag}] {c.name}: error={c.error:.3e} tol={c.tolerance:.1e} "
                         f"({c.runtime:.2f}s) {c.detail}".rstrip())
        lines.append(f"{sum(c.passed for c in self.checks)}/{len(self.checks)} checks passed")
        return "\n".join(lines)

    def to_dict(self):
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.runtime = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# -- fusion ------------------------------------------------------------------

@_timed
def run_fusion_oracle(rules=tuple(FusionRule), trials=100, seed=0):
    """Closed-form K-out-of-3 fusion against enumeration of all vote patterns."""
    rng = make_rng(seed, 101)
    ps = np.concatenate([[0.0, 1.0, 0.13], rng.random(trials)])
    worst = 0.0
    for rule in rules:
        rule = FusionRule.parse(rule)
        for p in ps:
            pf, pd = fuse_decisions(rule, float(p), float(p))
            ref = k_out_of_n_enumerated(float(p), rule.votes)
            worst = max(worst, abs(pf - ref), abs(pd - ref))
    return CheckResult("fusion_enumeration", worst < 1e-14, worst, 1e-14,
                       detail=f"{len(ps)} inputs x {len(rules)} rules")


# -- lattice search for one user's best response ------------------------------

@dataclass
class BruteForceResult:
    busy: np.ndarray
    idle: np.ndarray
    objective: float
    budget_used: float


def _user_state_objectives(j, model, strategy, params, qos, scenarios, other_busy, other_idle):
    """Per-(state, mode) objective terms of user j as functions of its own power.

    Built from the channel rate functions only: term = w_s p exp(-theta (T-N) R).
    Returns the term callables (busy, idle alternating per state) and the
    constant part of the objective.
    """
    m = 2 if j == 1 else 1
    th = qos.theta(j) * params.data_duration
    idle_weight = scenarios.p_4 if strategy is RateStrategy.GREEDY else scenarios.p_i
    terms = []
    for s, w in enumerate(model.probs):
        zs = (model.z1[s], model.z2[s])

        def busy_term(mu, s=s, w=w, zs=zs):
            mu = np.asarray(mu, dtype=float)
            z = FadingState(np.full(mu.shape, zs[0]), np.full(mu.shape, zs[1]))
            other = np.full(mu.shape, other_busy[s])
            pw = NormalizedPowers(*((mu, other) if j == 1 else (other, mu)), mu * 0, mu * 0)
            return w * scenarios.p_b * np.exp(-th * rate_busy(j, z, pw, params))

        def idle_term(mu, s=s, w=w, zs=zs):
            mu = np.asarray(mu, dtype=float)
            z = FadingState(np.full(mu.shape, zs[0]), np.full(mu.shape, zs[1]))
            other = np.full(mu.shape, other_idle[s])
            pw = NormalizedPowers(mu * 0, mu * 0, *((mu, other) if j == 1 else (other, mu)))
            return w * idle_weight * np.exp(-th * rate_idle(j, z, pw, params, strategy))

        terms += [busy_term, idle_term]
    const = scenarios.p_2 if strategy is RateStrategy.GREEDY else 0.0
    return terms, const


def _allocate(funcs, costs, base, budget, steps, caps):
    """Spend `steps` equal budget units where they lower the objective most.

    Each term is convex and decreasing, so its marginal decreases are sorted
    and taking the globally largest ones is exact on this lattice.
    """
    unit = budget / steps
    gains = []
    for f, c, b0, cap in zip(funcs, costs, base, caps):
        if c <= 0:
            gains.append(np.zeros(0))
            continue
        mu = b0 + np.arange(cap + 1) * unit / c
        vals = f(mu)
        gains.append(vals[:-1] - vals[1:])
    flat = np.concatenate(gains)
    pos = flat[flat > 0]
    take = min(steps, pos.size)
    if take == 0:
        return np.array(base, dtype=float)
    cut = np.partition(pos, pos.size - take)[pos.size - take]
    out = []
    for g, c, b0 in zip(gains, costs, base):
        n = int(np.sum(g >= cut)) if g.size else 0
        out.append(b0 + (n * unit / c if c > 0 else 0.0))
    return np.array(out)


def brute_force_policy(j, model, split, strategy, params, qos, fused_pd, scenarios,
                       other_busy, other_idle, steps=20000, refinements=3):
    """Constrained minimizer of user j's MGF objective by lattice search.

    The other user's per-state powers are held fixed.  A coarse lattice over
    the whole budget is followed by `refinements` finer lattices restricted to
    a window around the incumbent.
    """
    strategy = RateStrategy.parse(strategy)
    eta = split.eta(j)
    n_states = len(model.probs)
    if eta == 0:
        zero = np.zeros(n_states)
        terms, const = _user_state_objectives(j, model, strategy, params, qos, scenarios,
                                              other_busy, other_idle)
        obj = const + sum(float(f(np.array([0.0]))[0]) for f in terms)
        return BruteForceResult(zero, zero.copy(), obj, 0.0)
    terms, const = _user_state_objectives(j, model, strategy, params, qos, scenarios,
                                          other_busy, other_idle)
    funcs = terms
    costs = []
    for s, w in enumerate(model.probs):
        costs += [w * fused_pd, w * (1 - fused_pd)]
    costs = np.array(costs)
    if not np.any(costs > 0):
        raise ValueError("no state can use any budget")
    mu = _allocate(funcs, costs, np.zeros(len(funcs)), eta, steps, [steps] * len(funcs))
    unit = eta / steps
    window = len(funcs)
    for _ in range(refinements):
        lower = np.where(costs > 0, np.maximum(0.0, mu - window * unit / np.where(costs > 0, costs, 1)), 0.0)
        remaining = eta - float(np.dot(costs, lower))
        unit /= 10.0
        fine_steps = int(round(remaining / unit))
        if fine_steps <= 0:
            break
        mu = _allocate(funcs, costs, lower, remaining, fine_steps, [20 * window] * len(funcs))
    if float(np.dot(costs, mu)) > eta * (1 + 1e-9):
        raise ValueError("lattice search left the feasible set")
    obj = const + sum(float(f(np.array([x]))[0]) for f, x in zip(funcs, mu))
    return BruteForceResult(mu[0::2].copy(), mu[1::2].copy(), obj, float(np.dot(costs, mu)))


def closed_form_objective(j, policy, model, params, qos):
    """User j's MGF objective, sum_s w_s E{...}, under the closed-form policy."""
    z = model.state()
    pw = policy_powers(z, policy, params, qos)
    sc = policy.scenarios
    th = qos.theta(j) * params.data_duration
    terms = sc.p_b * np.exp(-th * rate_busy(j, z, pw, params))
    if policy.strategy is RateStrategy.GREEDY:
        terms = terms + sc.p_4 * np.exp(-th * rate_idle(j, z, pw, params, policy.strategy)) + sc.p_2
    else:
        terms = terms + sc.p_i * np.exp(-th * rate_idle(j, z, pw, params, policy.strategy))
    return float(np.dot(model.probs, terms))


@_timed
def run_policy_oracle(model, configs, params, qos, detection, scenarios, rel_tol=1e-3,
                      steps=20000):
    """Closed-form policy vs lattice search, for each (delta, strategy) in `configs`."""
    est = model.to_estimator()
    worst_gap, worst_res = 0.0, 0.0
    parts = []
    for delta, strategy in configs:
        pol = solve_gammas(PowerSplit(delta), strategy, est, params, qos, detection, scenarios,
                           tol=1e-12)
        pw = policy_powers(model.state(), pol, params, qos)
        for j in (1, 2):
            eta = pol.split.eta(j)
            if eta == 0:
                continue
            m = 2 if j == 1 else 1
            res = abs(expected_constraint_power(j, pol, est, params, qos) - eta) / eta
            bf = brute_force_policy(j, model, pol.split, pol.strategy, params, qos, pol.fused_pd,
                                    scenarios, pw.busy(m), pw.idle(m), steps=steps)
            cf = closed_form_objective(j, pol, model, params, qos)
            gap = abs(cf - bf.objective) / bf.objective
            worst_gap, worst_res = max(worst_gap, gap), max(worst_res, res)
            parts.append(f"d={delta:g},S{pol.strategy.value},u{j}:gap={gap:.1e}")
    ok = worst_gap <= rel_tol and worst_res < 1e-6
    return CheckResult("policy_lattice_oracle", ok, worst_gap, rel_tol,
                       detail=f"constraint residual {worst_res:.1e}; " + " ".join(parts))


# -- stationarity -------------------------------------------------------------

def stationarity_residuals(policy, z, params, qos):
    """Relative stationarity residuals at interior states and slackness violations.

    Returns (max interior residual, max clamped violation, interior count).
    """
    pw = policy_powers(z, policy, params, qos)
    sc = policy.scenarios
    idle_w, idle_base = policy.idle_terms(params)
    worst_int, worst_clamp, n_int = 0.0, 0.0, 0
    for j in (1, 2):
        if policy.split.eta(j) == 0:
            continue
        m = 2 if j == 1 else 1
        zj, zm = z.gain(j), z.gain(m)
        kappa = qos.kappa(j, params)
        alpha = policy.alpha(j, params, qos)
        for mu, mu_m, weight, cost, base in (
            (pw.busy(j), pw.busy(m), sc.p_b, policy.fused_pd, params.beta),
            (pw.idle(j), pw.idle(m), idle_w, policy.fused_pm, idle_base),
        ):
            noise = base + params.snr * mu_m * zj * (zm > zj)
            g = params.snr * zj / noise
            rhs = kappa * weight * g * (1 + mu * g) ** (-kappa - 1)
            lhs = alpha * cost
            inner = mu > 0
            if np.any(inner):
                worst_int = max(worst_int, float(np.max(np.abs(rhs[inner] - lhs) / lhs)))
                n_int += int(inner.sum())
            if np.any(~inner):
                worst_clamp = max(worst_clamp, float(np.max((rhs[~inner] - lhs) / lhs)))
    return worst_int, worst_clamp, n_int


def fd_gradient_residual(policy, z, params, qos, max_states=200):
    """Five-point finite differences of the rate-based objective vs the multiplier.

    At interior states d/dmu [w p exp(-theta (T-N) R)] must equal
    -alpha_j * cost.  Returns the worst relative mismatch.
    """
    pw = policy_powers(z, policy, params, qos)
    sc = policy.scenarios
    idle_w, _ = policy.idle_terms(params)
    th_dur = params.data_duration
    worst = 0.0
    for j in (1, 2):
        if policy.split.eta(j) == 0:
            continue
        m = 2 if j == 1 else 1
        th = qos.theta(j) * th_dur
        kappa = qos.kappa(j, params)
        alpha = policy.alpha(j, params, qos)
        for mode in ("busy", "idle"):
            own = getattr(pw, mode)(j)
            idx = np.flatnonzero(own > 0)[:max_states]
            if idx.size == 0:
                continue
            zs = FadingState(z.z1[idx], z.z2[idx])
            mu = own[idx]
            h = 1e-3 * (mu + 1.0 / np.maximum(params.snr * zs.gain(j), 1e-300)) / (kappa + 1)

            def objective(x):
                pick = lambda arr: arr[idx]
                if mode == "busy":
                    b = {j: x, m: pick(pw.busy(m))}
                    p = NormalizedPowers(b[1], b[2], pick(pw.idle1), pick(pw.idle2))
                    return sc.p_b * np.exp(-th * rate_busy(j, zs, p, params))
                i = {j: x, m: pick(pw.idle(m))}
                p = NormalizedPowers(pick(pw.busy1), pick(pw.busy2), i[1], i[2])
                return idle_w * np.exp(-th * rate_idle(j, zs, p, params, policy.strategy))

            d = (-objective(mu + 2 * h) + 8 * objective(mu + h) - 8 * objective(mu - h)
                 + objective(mu - 2 * h)) / (12 * h)
            cost = policy.fused_pd if mode == "busy" else policy.fused_pm
            worst = max(worst, float(np.max(np.abs(-d - alpha * cost) / (alpha * cost))))
    return worst


@_timed
def run_kkt_check(policy, z, params, qos, tol=1e-8, fd_tol=1e-6):
    worst_int, worst_clamp, n_int = stationarity_residuals(policy, z, params, qos)
    fd = fd_gradient_residual(policy, z, params, qos)
    ok = worst_int < tol and worst_clamp <= 1e-12 and fd < fd_tol and n_int > 0
    return CheckResult("kkt_stationarity", ok, worst_int, tol,
                       detail=f"{n_int} interior terms; slackness {worst_clamp:.1e}; "
                              f"finite-difference {fd:.1e}")


# -- frame simulation ---------------------------------------------------------

@_timed
def run_mgf_sim_check(config, delta=0.5, strategies=(RateStrategy.GREEDY, RateStrategy.PRECAUTIOUS),
                      frames=None, sigmas=3.0):
    """Closed-form effective capacity vs a frame-level simulation of the service process."""
    from .capacity import effective_capacity, effective_capacity_stderr, mgf_simulation

    params, qos = config.system_params(), config.qos()
    rule = FusionRule.parse(config.rule if config.rule != "all" else "majority")
    det = config.detection(rule)
    scen = config.scenarios(det)
    est = config.make_estimator()
    frames = frames or config.frames
    worst = 0.0
    parts = []
    ok = True
    for k, strategy in enumerate(strategies):
        pol = solve_gammas(PowerSplit(delta), strategy, est, params, qos, det, scen, tol=config.tol)
        rng = make_rng(config.seed, 1000 + k)
        sims = mgf_simulation(pol, params, qos, frames, rng, per_su=(det.per_su_pf, det.per_su_pd),
                              rule=rule, mean_z1=config.mean_z1, mean_z2=config.mean_z2)
        for j, sim in zip((1, 2), sims):
            cf = effective_capacity(j, pol, est, params, qos)
            se = math.hypot(sim.stderr, effective_capacity_stderr(j, pol, est, params, qos))
            z_score = abs(sim.capacity - cf) / se if se > 0 else (0.0 if sim.capacity == cf else math.inf)
            worst = max(worst, z_score)
            ok &= z_score <= sigmas
            parts.append(f"S{strategy.value}u{j}:{cf:.4f}/{sim.capacity:.4f}")
        # scenario frequencies against their binomial spread
        expected = {1: scen.rho * det.fused_pd, 2: scen.p_2,
                    3: (1 - scen.rho) * det.fused_pf, 4: scen.p_4}
        for t, p in expected.items():
            cnt = sims[0].scenario_counts[t]
            sd = math.sqrt(frames * p * (1 - p))
            if sd > 0 and abs(cnt - frames * p) > sigmas * sd:
                ok = False
                parts.append(f"scenario{t} off")
    return CheckResult("mgf_frame_simulation", ok, worst, sigmas,
                       detail=f"{frames} frames, z-scores vs closed form; " + " ".join(parts))


def run_validation(config, kkt_states=1000):
    """Run every registered check for `config`; deterministic given its seed."""
    report = ValidationReport()
    params, qos = config.system_params(), config.qos()
    det = config.detection("majority")
    scen = config.scenarios(det)
    report.add(run_fusion_oracle(seed=config.seed))
    configs = [(d, s) for s in RateStrategy for d in (0.3, 0.5, 0.7)]
    report.add(run_policy_oracle(DEFAULT_2X2, configs, params, qos, det, scen))
    est = config.make_estimator()
    pol = solve_gammas(PowerSplit(0.5), RateStrategy.PRECAUTIOUS, est, params, qos, det, scen,
                       tol=config.tol)
    idx = make_rng(config.seed, 2000).choice(len(est), size=min(kkt_states, len(est)), replace=False)
    report.add(run_kkt_check(pol, FadingState(est.z.z1[idx], est.z.z2[idx]), params, qos))
    report.add(run_mgf_sim_check(config))
    return report
