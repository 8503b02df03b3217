"""Block-fading two-receiver broadcast channel: SINRs, capacities and rate policies."""

from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np


@dataclass(frozen=True)
class SystemParams:
    bandwidth: float = 2000.0  # Hz
    frame_duration: float = 1.0  # s
    sense_duration: float = 0.01  # s
    rho: float = 0.1  # PU activity prior
    noise_var: float = 1.0
    pu_power_var: float = 1.0
    snr: float = 1.0  # linear, P_int / (B * noise_var)

    def __post_init__(self):
        if not 0 < self.sense_duration < self.frame_duration:
            raise ValueError("need 0 < sense_duration < frame_duration")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if not 0 <= self.rho <= 1:
            raise ValueError("rho must lie in [0, 1]")
        if not self.snr > 0:
            raise ValueError("snr must be positive")
        if not self.noise_var > 0 or self.pu_power_var < 0:
            raise ValueError("bad noise/PU variances")

    @property
    def beta(self):
        """Noise inflation at a receiver while the PU is active."""
        return 1.0 + self.pu_power_var / self.noise_var

    @property
    def data_duration(self):
        return self.frame_duration - self.sense_duration

    @classmethod
    def with_beta(cls, beta, **kw):
        noise_var = kw.pop("noise_var", 1.0)
        if beta < 1:
            raise ValueError("beta must be >= 1")
        return cls(noise_var=noise_var, pu_power_var=(beta - 1.0) * noise_var, **kw)


class Scenario(IntEnum):
    BUSY_SENSED_BUSY = 1
    BUSY_SENSED_IDLE = 2
    IDLE_SENSED_BUSY = 3
    IDLE_SENSED_IDLE = 4


class RateStrategy(Enum):
    GREEDY = 1  # idle-sensed rate C_{j,4}; outage on miss-detection
    PRECAUTIOUS = 2  # idle-sensed rate C_{j,2}; never in outage

    @classmethod
    def parse(cls, v):
        if isinstance(v, cls):
            return v
        s = str(v).strip().lower()
        if s in ("1", "greedy", "strategy1"):
            return cls.GREEDY
        if s in ("2", "precautious", "strategy2"):
            return cls.PRECAUTIOUS
        raise ValueError(f"unknown rate strategy {v!r}")


@dataclass(frozen=True)
class FadingState:
    """Power gains (z1, z2); scalars or equal-shape arrays."""

    z1: np.ndarray
    z2: np.ndarray

    def __post_init__(self):
        z1, z2 = np.asarray(self.z1, dtype=float), np.asarray(self.z2, dtype=float)
        if z1.shape != z2.shape:
            raise ValueError("z1 and z2 must have the same shape")
        if not (np.all(np.isfinite(z1)) and np.all(np.isfinite(z2))):
            raise ValueError("fading gains must be finite")
        if np.any(z1 < 0) or np.any(z2 < 0):
            raise ValueError("fading gains must be nonnegative")
        object.__setattr__(self, "z1", z1)
        object.__setattr__(self, "z2", z2)

    def gain(self, j):
        return self.z1 if j == 1 else self.z2

    def swapped(self):
        return FadingState(self.z2, self.z1)

    def __len__(self):
        return self.z1.size


@dataclass(frozen=True)
class NormalizedPowers:
    """Transmit powers over P_int, per user, for sensed-busy and sensed-idle frames."""

    busy1: np.ndarray
    busy2: np.ndarray
    idle1: np.ndarray
    idle2: np.ndarray

    def busy(self, j):
        return self.busy1 if j == 1 else self.busy2

    def idle(self, j):
        return self.idle1 if j == 1 else self.idle2

    def swapped(self):
        return NormalizedPowers(self.busy2, self.busy1, self.idle2, self.idle1)


def make_rng(seed, stream=0):
    """Counter-based generator fully determined by (seed, stream)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def sample_fading(rng, mean_z1=1.0, mean_z2=1.0, size=None):
    """Independent exponential (Rayleigh power) gains for both receivers."""
    if not (mean_z1 > 0 and mean_z2 > 0):
        raise ValueError("mean fading powers must be positive")
    z1 = rng.exponential(mean_z1, size)
    z2 = rng.exponential(mean_z2, size)
    return FadingState(z1, z2)


def _other(j):
    if j not in (1, 2):
        raise ValueError("user index must be 1 or 2")
    return 2 if j == 1 else 1


def sinr(j, tau, z, powers, params):
    tau = Scenario(tau)
    m = _other(j)
    noise = params.beta if tau in (Scenario.BUSY_SENSED_BUSY, Scenario.BUSY_SENSED_IDLE) else 1.0
    if tau in (Scenario.BUSY_SENSED_BUSY, Scenario.IDLE_SENSED_BUSY):
        mu_j, mu_m = powers.busy(j), powers.busy(m)
    else:
        mu_j, mu_m = powers.idle(j), powers.idle(m)
    zj, zm = z.gain(j), z.gain(m)
    # successive decoding: only the weaker receiver sees the other's signal
    interference = params.snr * mu_m * zj * (zm > zj)
    return mu_j * params.snr * zj / (noise + interference)


def inst_capacity(j, tau, z, powers, params):
    """Instantaneous capacity in bits/s."""
    return params.bandwidth * np.log2(1.0 + sinr(j, tau, z, powers, params))


def rate_busy(j, z, powers, params):
    return inst_capacity(j, Scenario.BUSY_SENSED_BUSY, z, powers, params)


def rate_idle(j, z, powers, params, strategy):
    strategy = RateStrategy.parse(strategy)
    tau = Scenario.IDLE_SENSED_IDLE if strategy is RateStrategy.GREEDY else Scenario.BUSY_SENSED_IDLE
    return inst_capacity(j, tau, z, powers, params)


def effective_service_bits(j, tau, z, powers, params, strategy):
    """Reliably delivered bits in one frame for receiver j."""
    tau = Scenario(tau)
    strategy = RateStrategy.parse(strategy)
    dur = params.data_duration
    if tau in (Scenario.BUSY_SENSED_BUSY, Scenario.IDLE_SENSED_BUSY):
        return dur * rate_busy(j, z, powers, params)
    if tau is Scenario.BUSY_SENSED_IDLE and strategy is RateStrategy.GREEDY:
        return np.zeros_like(np.asarray(z.gain(j), dtype=float))
    return dur * rate_idle(j, z, powers, params, strategy)
