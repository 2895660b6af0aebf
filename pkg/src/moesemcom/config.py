"""Run configuration: one JSON document, strict keys, deep defaults.

Every knob an experiment run reads lives here, so a (config, seed) pair
pins the whole pipeline. Unknown keys are rejected with their full path
rather than ignored; a typo should fail the run, not silently fall back
to a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .covert import CovertBudget
from .errors import ConfigError

DEFAULTS: dict = {
    "seed": 0,
    "dataset": {
        "n_train": 4000,
        "n_test": 1000,
        "k": 8,
    },
    "training": {
        "epochs_normal": 20,
        "epochs_robust": 20,
        "epochs_private": 12,
        "epochs_covert_auto": 200,
        "epochs_covert_chan": 60,
        "epochs_eaves": 30,
        "batch_size": 64,
        "lr": 1e-3,
        "gate_samples": 4096,
        "gate_epochs": 30,
        "gate_lr": 1e-2,
        "gate_lambda": 0.01,
    },
    "attacks": {
        "source_epsilon": 8.0 / 255.0,
        "source_steps": 10,
        "channel_epsilon": 0.5,
        "channel_steps": 10,
    },
    "covert": {
        "miss_prob": 0.95,
        "warden_rate_hz": 2.0,
        "spectral_efficiency": 100.0,
        "bandwidth_hz": 5e6,
        "bits_per_value": 8,
        "session_messages": 5_000_000,
    },
    "snr_grid": [0.0, 3.0, 6.0, 9.0, 12.0],
    "eval_samples": 500,
    "paths": {
        "workdir": "artifacts",
    },
}


def _check_value(key_path: str, value, default):
    if isinstance(default, bool) or isinstance(value, bool):
        raise ConfigError(f"config key {key_path} must be a number")
    if isinstance(default, int) and not isinstance(value, int):
        raise ConfigError(f"config key {key_path} must be an integer")
    if isinstance(default, float) and not isinstance(value, (int, float)):
        raise ConfigError(f"config key {key_path} must be a number")
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"config key {key_path} must be a string")
    if isinstance(default, list):
        if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool)
                for v in value):
            raise ConfigError(f"config key {key_path} must be a number list")


def _merge(overrides: dict, defaults: dict, path: str = "") -> dict:
    out = {}
    for key, value in overrides.items():
        key_path = f"{path}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown config key: {key_path}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {key_path} must be an object")
            out[key] = _merge(value, defaults[key], f"{key_path}.")
        else:
            _check_value(key_path, value, defaults[key])
            out[key] = value
    for key, value in defaults.items():
        if key not in out:
            out[key] = _merge({}, value) if isinstance(value, dict) else value
    return out


@dataclass
class SimConfig:
    seed: int
    dataset: dict
    training: dict
    attacks: dict
    covert: dict
    snr_grid: list
    eval_samples: int
    paths: dict

    @classmethod
    def from_dict(cls, overrides: Optional[dict] = None) -> "SimConfig":
        merged = _merge(overrides or {}, DEFAULTS)
        return cls(**merged)

    def covert_budget(self) -> CovertBudget:
        return CovertBudget(**self.covert)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed, "dataset": dict(self.dataset),
            "training": dict(self.training), "attacks": dict(self.attacks),
            "covert": dict(self.covert), "snr_grid": list(self.snr_grid),
            "eval_samples": self.eval_samples, "paths": dict(self.paths),
        }


def load_config(path: Optional[str] = None) -> SimConfig:
    """Config from a JSON file, or pure defaults when no path is given."""
    if path is None:
        return SimConfig.from_dict({})
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return SimConfig.from_dict(raw)
