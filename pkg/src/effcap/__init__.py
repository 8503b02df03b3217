"""Effective-capacity regions for a two-receiver cognitive radio broadcast channel."""

__version__ = "0.1.0"

from .capacity import EffCapPoint, RegionResult, effective_capacity, mgf_simulation, region_sweep
from .channel import FadingState, NormalizedPowers, RateStrategy, Scenario, SystemParams
from .config import RunConfig
from .power import ExpectationEstimator, PowerPolicy, PowerSplit, QoSParams, SolverError, solve_gammas
from .sensing import FusionRule, SensingDesign, detection_probs, scenario_probs
