"""Configuration documents for the command-line tools.

One JSON file drives everything; ``DEFAULTS`` spells out every knob with
the desk-scale platform and the rig's controller constants.  A user file
only needs the entries it wants to change - dictionaries merge recursively
over the defaults, and command-line flags override the merged document.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .plant import PlatformParams, params_from_dict, params_to_dict, with_payload

DEFAULTS = {
    "platform": params_to_dict(PlatformParams(inertia=np.array([0.4, 0.4, 0.6]))),
    "payload": {"mass": 5.0, "offset": [0.2, 0.16, 0.1]},
    "collection": {
        "duration": 240.0,
        "sample_period": 0.002,
        "substeps": 5,
        "pid": {"kp": 250.0, "ki": 80.0, "kd": 32.0},
        "excitation": {
            "kind": "rgs",
            "amplitude_translation": 0.06,
            "amplitude_rotation": 0.025,
            "band": [0.2, 2.5],
            "sweep_range": [1.0, 20.0],
        },
        "accel_noise": 0.0,
        "train_fraction": 0.6666666666666666,
    },
    "training": {
        "desired_rmse": 1e-5,
        "max_neurons": 25,
        "max_inner_iterations": 200,
        "subsample": 4,
    },
    "controller": {
        "f_l": 10.0,
        "f_h": 300.0,
        "filter_length": 65,
        "mu": 0.004,
        "p": 0.001,
        "lambda": 0.998,
        "eps1": 31.4,
        "eps2": 69.08,
        "reference_band": True,
    },
    "pid": {"kp": 250.0, "ki": 80.0, "kd": 32.0},
    "transmission": {
        "resonance_hz": 0.15,
        "damping": 0.2,
        "leak_gain": 0.3,
        "leak_corner_hz": 60.0,
    },
    "disturbance": {
        "random_level": 0.05,
        "band": [2.0, 400.0],
        "tones": [[5.0, 0.5], [50.0, 0.5], [200.0, 0.5]],
        "axis": "x",
        "seed": 42,
    },
    "scenario": {
        "control_rate": 2000.0,
        "substeps": 5,
        "duration": 20.0,
        "steps": [],
        "prefilter_tau": 0.08,
        "accel_noise": 0.0,
        "pose_noise": 0.0,
    },
}


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if key not in out:
            raise ConfigurationError(f"unknown config key '{key}'")
        if isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | Path | None = None) -> dict:
    """Defaults, optionally overlaid with a user JSON document."""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        with open(path) as fh:
            user = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}")
    return _merge(DEFAULTS, user)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def platform_from_config(cfg: dict) -> tuple:
    """(bare platform, platform with the configured payload)."""
    nominal = params_from_dict(cfg["platform"])
    payload = cfg.get("payload") or {}
    if payload.get("mass", 0.0) > 0:
        loaded = with_payload(nominal, payload["mass"],
                              np.asarray(payload["offset"], dtype=float))
    else:
        loaded = nominal
    return nominal, loaded
