"""Run configuration: JSON schema, defaults and validation."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Any

from .errors import ConfigError

AUTO = "auto"


def _num(positive=False, nonneg=False, integer=False, auto=False, minimum=None, choices=None):
    def check(key, v):
        if auto and v == AUTO:
            return v
        if choices is not None:
            if v not in choices:
                raise ConfigError(f"config key '{key}': expected one of {list(choices)}, got {v!r}")
            return v
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            extra = ' or "auto"' if auto else ""
            raise ConfigError(f"config key '{key}': expected a number{extra}, got {v!r}")
        if integer and int(v) != v:
            raise ConfigError(f"config key '{key}': expected an integer, got {v!r}")
        if positive and not v > 0:
            raise ConfigError(f"config key '{key}': must be > 0, got {v!r}")
        if nonneg and v < 0:
            raise ConfigError(f"config key '{key}': must be >= 0, got {v!r}")
        if minimum is not None and v < minimum:
            raise ConfigError(f"config key '{key}': must be >= {minimum}, got {v!r}")
        return int(v) if integer else float(v)
    return check


def _str(key, v):
    if not isinstance(v, str):
        raise ConfigError(f"config key '{key}': expected a string, got {v!r}")
    return v


#: key -> (default, checker); nested dicts are sections.
SCHEMA: dict = {
    "n": (8, _num(integer=True, minimum=1)),
    "c0": (1.0, _num(positive=True)),
    "c12": (1.0, _num(nonneg=True)),
    "c13": (1.0, _num(nonneg=True)),
    "c23": (1.0, _num(nonneg=True)),
    "seed": (0, _num(integer=True, nonneg=True)),
    "coulomb_g": (AUTO, _num(positive=True, auto=True)),
    "basis": ("pbw", _num(choices=("pbw", "matrix_units"))),
    "pbw_degree": (AUTO, _num(integer=True, nonneg=True, auto=True)),
    "target_states": (AUTO, _num(integer=True, minimum=2, auto=True)),
    "initial_batch": (5, _num(integer=True, minimum=1)),
    "embed_dim": (3, _num(integer=True, minimum=1)),
    "histogram_bins": (AUTO, _num(integer=True, minimum=1, auto=True)),
    "spectrum_numeric_max_n": (30, _num(integer=True, nonneg=True)),
    "volume_calibration": (AUTO, _num(positive=True, auto=True)),
    "output_dir": ("run", _str),
    "workers": (1, _num(integer=True, minimum=1)),
    "solver": {
        "method": ("barrier", _num(choices=("barrier", "subgradient"))),
        "rtol": (1e-9, _num(positive=True)),
        "max_iter": (3000, _num(integer=True, minimum=1)),
    },
    "states": {
        "restarts": (8, _num(integer=True, minimum=1)),
        "max_iter": (5000, _num(integer=True, minimum=1)),
        "tol": (1e-9, _num(positive=True)),
    },
    "smacof": {
        "max_iter": (3000, _num(integer=True, minimum=1)),
        "eps": (1e-10, _num(positive=True)),
        "restarts": (4, _num(integer=True, minimum=1)),
    },
    "fit": {
        "starts": (16, _num(integer=True, minimum=1)),
    },
}


def defaults(schema: dict = SCHEMA) -> dict:
    return {k: defaults(v) if isinstance(v, dict) else copy.deepcopy(v[0]) for k, v in schema.items()}


def _validate(data: Any, schema: dict, prefix: str = "") -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"config {prefix.rstrip('.') or 'root'}: expected a JSON object")
    unknown = sorted(set(data) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config key '{prefix}{unknown[0]}'")
    out = {}
    for key, spec in schema.items():
        if isinstance(spec, dict):
            out[key] = _validate(data.get(key, {}), spec, f"{prefix}{key}.")
        else:
            out[key] = spec[1](prefix + key, data[key]) if key in data else copy.deepcopy(spec[0])
    return out


@dataclass
class RunConfig:
    values: dict = field(default_factory=defaults)

    def __getitem__(self, key):
        return self.values[key]

    def section(self, name) -> dict:
        return self.values[name]

    @property
    def deformation(self) -> dict:
        return {k: self.values[k] for k in ("c0", "c12", "c13", "c23")}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return cls(_validate(data, SCHEMA))

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = open(path).read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text, str(path))

    def override(self, **kw) -> "RunConfig":
        data = copy.deepcopy(self.values)
        data.update({k: v for k, v in kw.items() if v is not None})
        return RunConfig.from_dict(data)

    def to_json(self) -> dict:
        return copy.deepcopy(self.values)
