"""Run configuration: defaults, key = value files, and builders for the model objects."""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

from .channel import RateStrategy, SystemParams
from .power import ExpectationEstimator, QoSParams
from .sensing import FusionRule, SensingDesign, detection_probs, sample_count, scenario_probs, threshold_for_pf

SWEEP_AXES = ("none", "snr", "theta", "beta")

# streams of the counter-based generator, per purpose
SOLVE_STREAM = 0
REPORT_STREAM = 1


@dataclass(frozen=True)
class RunConfig:
    bandwidth: float = 2000.0
    frame_duration: float = 1.0
    sense_duration: float = 0.01
    rho: float = 0.1
    noise_var: float = 1.0
    beta: float = 2.0
    snr_db: float = 0.0
    theta1: float = 0.01
    theta2: float = 0.01
    target_pf: float = 0.13
    threshold: Optional[float] = None  # overrides target_pf when set
    rule: str = "majority"  # or, majority, and, all
    strategy: str = "both"  # 1, 2, both
    delta_steps: int = 41
    mean_z1: float = 1.0
    mean_z2: float = 1.0
    estimator: str = "mc"  # mc, quadrature
    samples: int = 200_000
    quad_nodes: int = 32
    seed: int = 1
    tol: float = 1e-6
    frames: int = 100_000
    sweep: str = "none"
    sweep_values: tuple = ()
    workers: int = 1
    out: Optional[str] = None
    format: str = "csv"

    def __post_init__(self):
        if self.sweep not in SWEEP_AXES:
            raise ValueError(f"sweep must be one of {SWEEP_AXES}")
        if self.estimator not in ("mc", "quadrature"):
            raise ValueError("estimator must be 'mc' or 'quadrature'")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be 'csv' or 'json'")
        if self.delta_steps < 2:
            raise ValueError("delta_steps must be >= 2")
        if self.samples < 2:
            raise ValueError("samples must be >= 2")
        self.rules()
        self.strategies()
        object.__setattr__(self, "sweep_values", tuple(float(v) for v in self.sweep_values))

    # -- parsing --------------------------------------------------------

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_text(cls, text, base=None):
        """Parse `key = value` lines; '#' starts a comment."""
        values = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {n}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key] = val
        return (base or cls()).updated(values)

    @classmethod
    def from_file(cls, path, base=None):
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), base)

    def updated(self, values):
        """Copy with string or typed overrides coerced to the field types."""
        defaults = {f.name: f.default for f in fields(self)}
        out = {}
        for key, val in values.items():
            if key not in defaults:
                raise ValueError(f"unknown config key {key!r}")
            out[key] = _coerce(key, val, defaults[key])
        return replace(self, **out)

    # -- builders ---------------------------------------------------------

    @property
    def snr(self):
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def pu_power_var(self):
        return (self.beta - 1.0) * self.noise_var

    def system_params(self):
        return SystemParams(self.bandwidth, self.frame_duration, self.sense_duration, self.rho,
                            self.noise_var, self.pu_power_var, self.snr)

    def qos(self):
        return QoSParams(self.theta1, self.theta2)

    @property
    def sample_count(self):
        return sample_count(self.sense_duration, self.bandwidth)

    def threshold_value(self):
        if self.threshold is not None:
            return self.threshold
        return threshold_for_pf(self.target_pf, self.sample_count, self.noise_var)

    def design(self, rule):
        return SensingDesign(self.threshold_value(), self.sample_count, FusionRule.parse(rule),
                             self.noise_var, self.pu_power_var)

    def detection(self, rule):
        return detection_probs(self.design(rule))

    def scenarios(self, detection):
        return scenario_probs(self.rho, detection.fused_pf, detection.fused_pd)

    def make_estimator(self, stream=SOLVE_STREAM):
        if self.estimator == "quadrature":
            return ExpectationEstimator.gauss_laguerre(self.quad_nodes, self.mean_z1, self.mean_z2)
        return ExpectationEstimator.monte_carlo(self.samples, self.seed, stream, self.mean_z1,
                                                self.mean_z2)

    def rules(self):
        if str(self.rule).lower() == "all":
            return list(FusionRule)
        return [FusionRule.parse(self.rule)]

    def strategies(self):
        if str(self.strategy).lower() == "both":
            return list(RateStrategy)
        return [RateStrategy.parse(self.strategy)]

    def at_sweep_value(self, value):
        if self.sweep == "snr":
            return replace(self, snr_db=value)
        if self.sweep == "theta":
            return replace(self, theta1=value, theta2=value)
        if self.sweep == "beta":
            return replace(self, beta=value)
        return self

    def sweep_points(self):
        if self.sweep == "none" or not self.sweep_values:
            return [(None, self)]
        return [(v, self.at_sweep_value(v)) for v in sorted(self.sweep_values)]

    def digest(self):
        """Hash of everything that affects results."""
        d = asdict(self)
        for k in ("out", "format", "workers"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _coerce(key, val, default):
    if not isinstance(val, str):
        return tuple(val) if key == "sweep_values" else val
    val = val.strip()
    if key == "sweep_values":
        return tuple(float(v) for v in val.replace(",", " ").split())
    if key in ("threshold", "out"):
        if val.lower() in ("", "none"):
            return None
        return float(val) if key == "threshold" else val
    if isinstance(default, bool):
        return val.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(val)
    if isinstance(default, float):
        return float(val)
    return val
