"""Warden exposure analytics for covert transmission.

A session ships M messages of d compressed values, q bits each, over a link
with spectral efficiency R (bit/s/Hz) and bandwidth B. The warden samples
the air f_w times per second; each look independently misses an active
transmission with probability `miss_prob`. Staying undetected for the whole
session therefore has probability miss_prob**n with n = ceil(f_w * T) looks
during the T seconds on air. Compression shortens T, which is the entire
point of the covert codec: fewer looks, higher detection-free probability,
paid for with reconstruction error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError
from .prng import Stream

# guard for ceil(f_w * T) when the product lands on an integer boundary up
# to float rounding
_CEIL_TOL = 1e-9


@dataclass(frozen=True)
class CovertBudget:
    miss_prob: float = 0.95
    warden_rate_hz: float = 2.0
    spectral_efficiency: float = 100.0
    bandwidth_hz: float = 5e6
    bits_per_value: int = 8
    session_messages: int = 5_000_000

    def __post_init__(self):
        if not 0.0 <= self.miss_prob <= 1.0:
            raise ConfigError("miss_prob must be in [0, 1]")
        if self.warden_rate_hz <= 0 or self.spectral_efficiency <= 0 \
                or self.bandwidth_hz <= 0:
            raise ConfigError("rates and bandwidth must be positive")
        if self.bits_per_value < 1 or self.session_messages < 0:
            raise ConfigError("bits_per_value >= 1, session_messages >= 0")


def compression_dim(d_sem: int, rho: float) -> int:
    """Compressed width for a compression ratio: round(d_sem / rho)."""
    if rho <= 0:
        raise ConfigError("compression ratio must be positive")
    d = round(d_sem / rho)
    if d < 2:
        raise ConfigError(f"rho={rho:g} compresses {d_sem} below 2 values")
    return d


def payload_bits(d: int, budget: CovertBudget) -> int:
    return d * budget.bits_per_value * budget.session_messages


def transmission_time(bits: int, budget: CovertBudget) -> float:
    """Seconds on air for the session payload."""
    return bits / (budget.spectral_efficiency * budget.bandwidth_hz)


def detection_opportunities(t_seconds: float, budget: CovertBudget) -> int:
    """Warden looks during a transmission of t seconds. Zero airtime means
    zero looks; otherwise ceil, with a tolerance so products that should be
    integers do not round up."""
    if t_seconds < 0:
        raise ConfigError("airtime cannot be negative")
    if t_seconds == 0.0:
        return 0
    x = budget.warden_rate_hz * t_seconds
    if abs(x - round(x)) < _CEIL_TOL:
        return int(round(x))
    return int(math.ceil(x))


def detection_free_prob(n_looks: int, budget: CovertBudget) -> float:
    if n_looks < 0:
        raise ConfigError("look count cannot be negative")
    return budget.miss_prob ** n_looks


def dfp_for_dim(d: int, budget: CovertBudget) -> float:
    """Detection-free probability for a session of d-value messages."""
    t = transmission_time(payload_bits(d, budget), budget)
    return detection_free_prob(detection_opportunities(t, budget), budget)


def mc_detection_free(n_looks: int, budget: CovertBudget, trials: int,
                      stream: Stream) -> tuple[float, float]:
    """Monte Carlo estimate of the detection-free probability and its
    standard error: each trial draws n independent looks and survives if
    every one misses."""
    if trials <= 0:
        raise ConfigError("trials must be positive")
    u = stream.uniform(trials * n_looks).reshape(trials, n_looks)
    p = float((u < budget.miss_prob).all(axis=1).mean())
    se = math.sqrt(max(p * (1.0 - p), 1e-12) / trials)
    return p, se
