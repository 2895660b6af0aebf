"""Deterministic mixture-of-experts semantic communication simulator.

Single-machine, CPU-only research code. Every run is a pure function of the
configuration and a 64-bit master seed; see README for the PRNG recipe and
the backend selection rules.
"""

from .errors import (
    CheckpointError,
    ConfigError,
    FrozenParameterError,
    MissingExpertError,
    MoeSemComError,
)

__version__ = "0.1.0"

__all__ = [
    "CheckpointError",
    "ConfigError",
    "FrozenParameterError",
    "MissingExpertError",
    "MoeSemComError",
    "__version__",
]
