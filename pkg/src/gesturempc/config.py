"""Centralized defaults, config-file merging, and run manifests.

Every CLI invocation resolves its configuration as defaults <- JSON config
file <- command-line flags, hashes the result, and drops a manifest next
to its artifacts so a rerun with the same manifest reproduces the outputs
byte for byte (wall-clock timing fields excluded by construction: they
never enter manifests).
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from . import __version__

DEFAULTS: dict = {
    "seed": 0,
    "sample_rate": 60.0,
    "segmentation": {
        "threshold": 0.1,
        "open_duration": 2.0,
        "close_duration": 2.0,
        "tolerance": 0.5,
        "min_motion_samples": 12,
        "delimiter_min_duration": 0.3,
        "activation_mode": "pause",
    },
    "features": {
        "quantile_levels": [0.25, 0.75],
        "ac_lags": [1, 2],
        "rolloff_fraction": 0.85,
    },
    "train": {
        "epochs": 500,
        "learning_rate": 0.1,
        "leak_alpha": 0.01,
        "batch_size": None,
        "mode": "plain",
        "precision_t": 16,
        "n_parties": 2,
        "test_fraction": 0.2,
    },
    "lwe": {
        "dimension": 512,
        "modulus": 32768,
        "sigma": 3.2,
    },
    "feedback": {
        "pulse_ms": 150.0,
        "gap_ms": 120.0,
        "sequence_gap_ms": 600.0,
        "amplitude": 70,
    },
    "bench": {
        "epochs": 30,
        "batch_sizes": [1, 54],
        "repeats": 5,
    },
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | None = None, overrides: dict | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        with open(path) as fh:
            cfg = _deep_merge(cfg, json.load(fh))
    if overrides:
        cfg = _deep_merge(cfg, overrides)
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_manifest(out_dir, subcommand: str, cfg: dict,
                   inputs: list, outputs: list) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "subcommand": subcommand,
        "tool_version": __version__,
        "seed": cfg.get("seed"),
        "config_hash": config_hash(cfg),
        "config": cfg,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
    }
    path = out_dir / "run_manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
    return path
