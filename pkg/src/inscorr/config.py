"""JSON experiment configs: defaults, validation, overrides, hashing.

A config is a nested dict with the sections below. Unknown keys are
rejected by their dotted path. A null value means "derive the default":
selection.tau follows noise.rate, training.warmup_epochs is half of
training.total_epochs, data.pool_size matches data.n_train, and
attack.step_size is 2.5 * budget / steps.

The run identity is the first 12 hex digits of the sha256 of the fully
resolved config serialized canonically, so two configs that resolve to
the same settings share a hash regardless of key order or which
defaults were spelled out.
"""

import copy
import hashlib
import json

from .attack import AttackConfig
from .errors import ConfigError
from .noise import NoiseSpec
from .pipeline import INSCORR, ExperimentConfig

DEFAULT_CONFIG = {
    "method": "InsCorr",
    "model": {
        "hidden": [64],
        "optimizer": "adam",
        "lr": 0.001,
    },
    "data": {
        "n_train": 2000,
        "n_test": 1000,
        "num_classes": 4,
        "height": 16,
        "width": 16,
        "val_fraction": 0.1,
        "pool_size": None,
    },
    "noise": {
        "route": "open_set",
        "rate": 0.4,
        "gaussian_sigma": 0.25,
        "occlusion_fraction": 0.25,
        "resolution_factor": 4,
        "fog_intensity": 0.8,
        "fog_decay": 1.0,
        "blur_length": 5,
        "blur_angle_deg": 0.0,
    },
    "selection": {
        "tau": None,
        "ramp_epochs": 10,
    },
    "attack": {
        "norm": "linf",
        "budget": 8.0 / 255.0,
        "steps": 40,
        "step_size": None,
        "random_start": False,
    },
    "training": {
        "lambda": 0.5,
        "warmup_epochs": None,
        "total_epochs": 200,
        "batch_size": 128,
        "refresh_correction": False,
        "partition_rule": "agreement",
    },
    "seeds": {
        "data": 0,
        "noise": 0,
        "init": 0,
        "epochs": 0,
    },
}


def _check_keys(user, schema, path=""):
    for key, value in user.items():
        dotted = f"{path}{key}"
        if key not in schema:
            raise ConfigError(f"unknown config key: {dotted}")
        if isinstance(schema[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {dotted} must be a section")
            _check_keys(value, schema[key], dotted + ".")


def _deep_merge(base, user):
    out = copy.deepcopy(base)
    for key, value in user.items():
        if isinstance(value, dict):
            out[key] = _deep_merge(base[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None):
    """Defaults overlaid with the JSON file at path, if given."""
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    _check_keys(user, DEFAULT_CONFIG)
    return _deep_merge(DEFAULT_CONFIG, user)


def apply_overrides(cfg, assignments):
    """Apply 'dotted.path=value' strings on top of a config dict.

    Values parse as JSON when possible ("0.5", "[32,16]", "true"),
    otherwise they stay strings ("open_set").
    """
    cfg = copy.deepcopy(cfg)
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = dotted.split(".")
        node, schema = cfg, DEFAULT_CONFIG
        for part in parts[:-1]:
            if part not in schema or not isinstance(schema[part], dict):
                raise ConfigError(f"unknown config key: {dotted}")
            node, schema = node[part], schema[part]
        if parts[-1] not in schema or isinstance(schema[parts[-1]], dict):
            raise ConfigError(f"unknown config key: {dotted}")
        node[parts[-1]] = value
    return cfg


def resolve_config(cfg):
    """Fill every derived default in; the result has no nulls left."""
    out = copy.deepcopy(cfg)
    if out["selection"]["tau"] is None:
        out["selection"]["tau"] = out["noise"]["rate"]
    if out["training"]["warmup_epochs"] is None:
        out["training"]["warmup_epochs"] = out["training"]["total_epochs"] // 2
    if out["data"]["pool_size"] is None:
        out["data"]["pool_size"] = out["data"]["n_train"]
    if out["attack"]["step_size"] is None:
        budget = out["attack"]["budget"]
        steps = out["attack"]["steps"]
        out["attack"]["step_size"] = 2.5 * budget / max(steps, 1)
    if out["training"]["refresh_correction"] and out["method"] != INSCORR:
        raise ConfigError(
            "training.refresh_correction only applies when method is InsCorr"
        )
    lam = out["training"]["lambda"]
    if not isinstance(lam, (int, float)) or not 0.0 <= lam <= 1.0:
        raise ConfigError(f"training.lambda must lie in [0, 1], got {lam}")
    return out


def config_hash(resolved):
    """12 hex digits identifying the resolved config."""
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def to_experiment_config(resolved):
    """Build the runnable config; value errors surface as ConfigError."""
    noise = resolved["noise"]
    try:
        spec = NoiseSpec(
            gaussian_sigma=noise["gaussian_sigma"],
            occlusion_fraction=noise["occlusion_fraction"],
            resolution_factor=noise["resolution_factor"],
            fog_intensity=noise["fog_intensity"],
            fog_decay=noise["fog_decay"],
            blur_length=noise["blur_length"],
            blur_angle_deg=noise["blur_angle_deg"],
        )
        attack = AttackConfig(
            norm=resolved["attack"]["norm"],
            budget=resolved["attack"]["budget"],
            steps=resolved["attack"]["steps"],
            step_size=resolved["attack"]["step_size"],
            random_start=resolved["attack"]["random_start"],
        )
        return ExperimentConfig(
            method=resolved["method"],
            hidden=tuple(resolved["model"]["hidden"]),
            optimizer=resolved["model"]["optimizer"],
            lr=resolved["model"]["lr"],
            n_train=resolved["data"]["n_train"],
            n_test=resolved["data"]["n_test"],
            num_classes=resolved["data"]["num_classes"],
            height=resolved["data"]["height"],
            width=resolved["data"]["width"],
            val_fraction=resolved["data"]["val_fraction"],
            pool_size=resolved["data"]["pool_size"],
            noise_route=noise["route"],
            noise_rate=noise["rate"],
            noise_spec=spec,
            tau=resolved["selection"]["tau"],
            ramp_epochs=resolved["selection"]["ramp_epochs"],
            attack=attack,
            lam=resolved["training"]["lambda"],
            warmup_epochs=resolved["training"]["warmup_epochs"],
            total_epochs=resolved["training"]["total_epochs"],
            batch_size=resolved["training"]["batch_size"],
            refresh_correction=resolved["training"]["refresh_correction"],
            partition_rule=resolved["training"]["partition_rule"],
            seed_data=resolved["seeds"]["data"],
            seed_noise=resolved["seeds"]["noise"],
            seed_init=resolved["seeds"]["init"],
            seed_epochs=resolved["seeds"]["epochs"],
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
