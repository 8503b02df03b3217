"""Cooperative energy-detection sensing with hard-decision fusion."""

from dataclasses import dataclass
from enum import Enum
from itertools import product
from math import comb, isfinite, sqrt

import numpy as np
from scipy.special import erfc, erfcinv

N_SENSORS = 3


class FusionRule(Enum):
    OR = 1
    MAJORITY = 2
    AND = 3

    @property
    def votes(self):
        """Number of busy votes needed to declare the channel busy."""
        return self.value

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls[str(name).upper()]
        except KeyError:
            raise ValueError(f"unknown fusion rule {name!r}") from None


@dataclass(frozen=True)
class SensingDesign:
    threshold: float
    sample_count: int
    rule: FusionRule = FusionRule.MAJORITY
    noise_var: float = 1.0
    pu_power_var: float = 1.0

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")
        if self.pu_power_var < 0:
            raise ValueError("pu_power_var must be nonnegative")
        object.__setattr__(self, "rule", FusionRule.parse(self.rule))


@dataclass(frozen=True)
class DetectionProbs:
    per_su_pf: float
    per_su_pd: float
    fused_pf: float
    fused_pd: float


@dataclass(frozen=True)
class ScenarioProbs:
    p_b: float  # sensed busy
    p_2: float  # busy, sensed idle
    p_4: float  # idle, sensed idle
    rho: float

    @property
    def p_i(self):
        return self.p_2 + self.p_4


def sample_count(sense_duration, bandwidth):
    """Complex samples in the sensing window, rounded to nearest and at least 1."""
    return max(1, int(round(sense_duration * bandwidth)))


def q_function(x):
    """Standard Gaussian tail probability Q(x) = P(X > x)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("q_function requires finite input")
    out = 0.5 * erfc(x / sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def q_inverse(p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)) or np.any(np.isnan(p)):
        raise ValueError("q_inverse requires 0 < p < 1")
    out = sqrt(2.0) * erfcinv(2.0 * p)
    return float(out) if out.ndim == 0 else out


def per_su_probs(design):
    """Per-sensor (Pf, Pd) under the CLT approximation of the energy statistic."""
    s = sqrt(2.0 / design.sample_count)
    n0, ps = design.noise_var, design.pu_power_var
    pf = q_function((design.threshold - n0) / (s * n0))
    pd = q_function((design.threshold - n0 - ps) / (s * (n0 + ps)))
    return pf, pd


def threshold_for_pf(target_pf, sample_count, noise_var=1.0):
    """Detection threshold giving per-sensor false-alarm probability `target_pf`."""
    if not 0 < target_pf < 1:
        raise ValueError("target_pf must lie in (0, 1)")
    return noise_var + sqrt(2.0 / sample_count) * noise_var * q_inverse(target_pf)


def k_out_of_n(p, k, n=N_SENSORS):
    """P(at least k of n independent votes are 1), each vote 1 w.p. p."""
    return sum(comb(n, i) * p**i * (1 - p) ** (n - i) for i in range(k, n + 1))


def k_out_of_n_enumerated(p, k, n=N_SENSORS):
    """Same quantity by summing over all 2**n vote patterns."""
    total = 0.0
    for votes in product((0, 1), repeat=n):
        ones = sum(votes)
        if ones >= k:
            total += p**ones * (1 - p) ** (n - ones)
    return total


def fuse_decisions(rule, per_su_pf, per_su_pd):
    rule = FusionRule.parse(rule)
    for p in (per_su_pf, per_su_pd):
        if not (isfinite(p) and 0 <= p <= 1):
            raise ValueError("probabilities must lie in [0, 1]")
    return k_out_of_n(per_su_pf, rule.votes), k_out_of_n(per_su_pd, rule.votes)


def detection_probs(design):
    pf, pd = per_su_probs(design)
    fpf, fpd = fuse_decisions(design.rule, pf, pd)
    return DetectionProbs(pf, pd, fpf, fpd)


def scenario_probs(rho, fused_pf, fused_pd):
    """Sensing-outcome probabilities from the PU prior and the fused decision."""
    for p in (rho, fused_pf, fused_pd):
        if not 0 <= p <= 1:
            raise ValueError("probabilities must lie in [0, 1]")
    return ScenarioProbs(
        p_b=rho * fused_pd + (1 - rho) * fused_pf,
        p_2=rho * (1 - fused_pd),
        p_4=(1 - rho) * (1 - fused_pf),
        rho=rho,
    )
