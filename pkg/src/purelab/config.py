"""Experiment configuration: YAML file over built-in desk-scale defaults.

The file holds plain nested mappings; every key has a default, unknown keys
are rejected so typos fail loudly instead of silently running the default.
"""
from __future__ import annotations

import copy

import yaml

from .attacks import default_spec
from .data import SplitSpec, SyntheticSpec
from .detector import DetectorConfig
from .errors import InvariantViolation
from .purifier import DiversificationConfig, NoiseConfig, PurifierConfig

DEFAULTS: dict = {
    "seed": 7,
    "policy": "add-only",
    "data": {
        "d": 500,
        "n_malicious": 1000,
        "n_benign": 1000,
        "signal_features": 40,
        "noise_rate": 0.05,
        "background_rate": 0.05,
    },
    "split": {"train": 0.6, "val": 0.2, "test": 0.2},
    "detector": {
        "hidden": [200, 200],
        "activation": "elu",
        "epochs": 100,
        "batch_size": 128,
        "lr": 0.001,
        "threshold": 0.5,
    },
    "adversarial_training": {"iterations": 50, "step_size": 0.02},
    "purifier": {
        # Undercomplete on purpose: reconstruction has to pass through a
        # narrow code, which is what projects attacked rows back onto the
        # data manifold. Overcomplete hidden sizes learn near-identity maps
        # and defend nothing at this dimensionality.
        "encoder_hidden": [128, 32],
        "decoder_hidden": [128],
        "attention_gate": False,
        "alpha": 0.5,
        "beta": 0.5,
        "epochs": 100,
        "batch_size": 128,
        "lr": 0.001,
    },
    "diversify": {"batches": 6, "iterations": 10, "step_size": 3.0},
    # Heavy protective noise: the purifier sees half-density benign blankets
    # during training and learns to pull them toward benign reconstructions.
    "noise": {"eta": 0.5},
    "attacks": {"overrides": {}},
}

_OPTIONAL_KEYS = {"seed"}  # sections may carry their own seed on top of the schema


def _merge(base: dict, override: dict, path: str) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base and key not in _OPTIONAL_KEYS:
            raise InvariantViolation(f"unknown config key {path}{key!r}")
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            # attack overrides are free-form per attack kind
            if path == "attacks." and key == "overrides":
                out[key] = copy.deepcopy(value)
            else:
                out[key] = _merge(base[key], value, f"{path}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | None = None) -> dict:
    """Defaults, optionally overridden by a YAML mapping at path."""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    with open(path, "r", encoding="utf-8") as fh:
        loaded = yaml.safe_load(fh)
    if loaded is None:
        loaded = {}
    if not isinstance(loaded, dict):
        raise InvariantViolation("config file must hold a mapping at top level")
    return _merge(DEFAULTS, loaded, "")


def _section_seed(cfg: dict, section: str) -> int:
    return int(cfg[section].get("seed", cfg["seed"]))


def data_spec(cfg: dict) -> SyntheticSpec:
    d = cfg["data"]
    return SyntheticSpec(d=d["d"], n_malicious=d["n_malicious"], n_benign=d["n_benign"],
                         signal_features=d["signal_features"], noise_rate=d["noise_rate"],
                         background_rate=d["background_rate"],
                         seed=_section_seed(cfg, "data"))


def split_spec(cfg: dict) -> SplitSpec:
    s = cfg["split"]
    return SplitSpec(train=s["train"], val=s["val"], test=s["test"],
                     seed=_section_seed(cfg, "split"))


def detector_config(cfg: dict) -> DetectorConfig:
    d = cfg["detector"]
    return DetectorConfig(hidden=list(d["hidden"]), activation=d["activation"],
                          epochs=d["epochs"], batch_size=d["batch_size"], lr=d["lr"],
                          threshold=d["threshold"], seed=_section_seed(cfg, "detector"))


def purifier_config(cfg: dict) -> PurifierConfig:
    p = cfg["purifier"]
    return PurifierConfig(encoder_hidden=list(p["encoder_hidden"]),
                          decoder_hidden=list(p["decoder_hidden"]),
                          attention_gate=p["attention_gate"], alpha=p["alpha"],
                          beta=p["beta"], epochs=p["epochs"],
                          batch_size=p["batch_size"], lr=p["lr"],
                          seed=_section_seed(cfg, "purifier"))


def diversify_config(cfg: dict) -> DiversificationConfig:
    d = cfg["diversify"]
    return DiversificationConfig(batches=d["batches"], iterations=d["iterations"],
                                 step_size=d["step_size"], policy=cfg["policy"],
                                 seed=_section_seed(cfg, "diversify"))


def noise_config(cfg: dict) -> NoiseConfig:
    return NoiseConfig(eta=cfg["noise"]["eta"], seed=_section_seed(cfg, "noise"))


def attack_spec(cfg: dict, kind: str, scenario: str):
    """Canonical spec for (kind, scenario), patched by config overrides."""
    spec = default_spec(kind, scenario, seed=int(cfg["seed"]))
    over = cfg["attacks"].get("overrides", {}).get(kind, {})
    bad = set(over) - set(spec.__dict__)
    if bad:
        raise InvariantViolation(f"unknown attack override keys for {kind}: {sorted(bad)}")
    if over:
        from dataclasses import replace
        spec = replace(spec, **over)
    return spec
