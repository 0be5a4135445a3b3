"""Experiment configuration: defaults, YAML files, and dotted-key overrides.

A manifest written by a previous run is also a valid config file; its
``config`` section is used.
"""

import copy
import json
import re
from pathlib import Path

import yaml

from ..nnet import TrainConfig


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


def _train_defaults(**over):
    d = TrainConfig().to_dict()
    del d["seed"]  # always derived from the run seed
    d.update(over)
    return d


SIGNAL = {"n": 128, "f0": 0.1, "n_harmonics": 4}

DEFAULTS = {
    "simulate-cauchy": {
        "signal": dict(SIGNAL),
        "n_long": 1024,
        "noise": {"ar_order": 3, "reflection": None, "burn_in": True},
        "data": {"train": 64, "validation": 64, "context": 512, "context_long": 256},
        "train": _train_defaults(),
        "evaluation": {"trials": 10000, "snr_db": [-8.0], "snr_db_long": [-20.0],
                       "phases": "fixed", "fpr_alpha": 0.05, "fpr_grid_points": 200,
                       "calibration": {"fpr": 0.1, "tpr": 0.7}},
    },
    "gm-demo": {
        "n": 128,
        "mixture": {"weights": [0.5, 0.5], "means": [0.0, 0.0], "sigmas": [1.0, 10.0]},
        "context_sequences": 2000,
        "trials": 2000,
        "shifts": {"start": -1.0, "stop": 1.0, "count": 21},
        "step": 1e-2,
        "fpr_alpha": 0.05,
    },
    "sensor-cv": {
        "signal": dict(SIGNAL),
        "snr_db": -14.0,
        "series": None,
        "surrogate": {"length": 10000, "spike_rate": 0.01, "spike_scale": 10.0,
                      "reflection": [0.6, -0.3, 0.1]},
        "normalization": "global",
        "cv": {"outer_folds": 10, "inner_folds": 9, "repeats": 20, "inner_per_repeat": False},
        "train": _train_defaults(learning_rate=1e-2),
        "h1_draws": 10,
        "detectors": ["cnn_lrao", "limiter3", "sign", "identity"],
        "save_models": False,
        "fpr_grid_points": 200,
    },
    "train": {
        "signal": dict(SIGNAL),
        "series": None,
        "normalization": "global",
        "validation_fraction": 0.2,
        "train": _train_defaults(),
    },
    "surrogate-gen": {
        "length": 10000,
        "spike_rate": 0.01,
        "spike_scale": 10.0,
        "reflection": [0.6, -0.3, 0.1],
    },
    "detect": {
        "signal": dict(SIGNAL),
        "detector": "cnn_lrao",
        "normalization": "global",
        "fpr_alpha": 0.05,
    },
    "roc": {},
}


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-3`` as a float (PyYAML wants ``1.0e-3``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                   |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                   |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                   |[-+]?\.(?:inf|Inf|INF)
                   |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


def _load(text):
    return yaml.load(text, Loader=_Loader)  # noqa: S506 - SafeLoader subclass


def defaults(command):
    try:
        return copy.deepcopy(DEFAULTS[command])
    except KeyError:
        raise ConfigError(f"no configuration for command {command!r}") from None


def flatten(cfg, prefix=""):
    """``{"a": {"b": 1}}`` -> ``{"a.b": 1}``."""
    out = {}
    for k, v in cfg.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and v:
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def set_dotted(cfg, key, value):
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ConfigError(f"unknown configuration key {key!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown configuration key {key!r}")
    node[parts[-1]] = value


def merge(base, update, path=""):
    """Recursively overlay ``update`` on ``base``; unknown keys are rejected."""
    for k, v in update.items():
        key = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown configuration key {key!r}")
        if isinstance(base[k], dict) and base[k]:
            if not isinstance(v, dict):
                raise ConfigError(f"configuration key {key!r} must be a mapping")
            merge(base[k], v, key + ".")
        else:
            base[k] = v
    return base


def parse_value(text):
    """Flag values are parsed as YAML scalars/lists (``1e-3``, ``[1, 2]``, ``null``)."""
    try:
        return _load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value {text!r}: {exc}") from None


def read_file(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        doc = _load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if doc is None:
        return {}, None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    if "config" in doc and "command" in doc:  # a manifest
        return doc["config"], doc
    return doc, None


def resolve(command, path=None, overrides=()):
    """Defaults, then the file, then ``key=value`` overrides."""
    cfg = defaults(command)
    manifest = None
    if path is not None:
        doc, manifest = read_file(path)
        if manifest is not None and manifest.get("command") != command:
            raise ConfigError(f"manifest was written by {manifest.get('command')!r}, not {command!r}")
        merge(cfg, doc)
    for key, value in overrides:
        set_dotted(cfg, key, value)
    return cfg, manifest


def train_config(section, seed):
    d = dict(section)
    d["seed"] = int(seed)
    d["betas"] = tuple(d.get("betas", (0.9, 0.999)))
    try:
        return TrainConfig(**d)
    except TypeError as exc:
        raise ConfigError(f"train: {exc}") from None


def dumps(cfg):
    return json.dumps(cfg, sort_keys=True)
