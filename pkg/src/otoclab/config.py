"""Experiment configuration files (TOML).

Schema::

    [experiment]
    name = "fig1b"          # output basename
    study = "kicked"        # key of experiments.STUDIES
    seed = 1234             # master seed
    description = "..."     # optional
    out = "results"         # optional output directory
    checks = ["..."]        # optional, used by `verify <config>`

    [params]                # fields of the study's parameter dataclass
    N = 8
    N_M = inf               # inf = exact expectations

Unknown tables or keys are rejected with the offending field named.
"""
from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib
import tomli_w

from .experiments import STUDIES

EXPERIMENT_KEYS = {"name": str, "study": str, "seed": int, "description": str, "out": str, "checks": list}
REQUIRED = ("name", "study", "seed")
MAX_SEED = 2**64 - 1


class ConfigError(ValueError):
    """Invalid configuration; the message names the failing field."""


def _defaults(cls) -> dict:
    inst = cls()
    return {f.name: getattr(inst, f.name) for f in fields(cls)}


def _coerce(path: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        value = float(value)
        if math.isnan(value):
            raise ConfigError(f"{path}: NaN is not allowed")
        return value
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        if default:
            return [_coerce(f"{path}[{i}]", v, default[0]) for i, v in enumerate(value)]
        for i, v in enumerate(value):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{path}[{i}]: expected a number, got {v!r}")
        return list(value)
    raise ConfigError(f"{path}: unsupported parameter type")  # pragma: no cover


def build_params(study: str, raw: dict):
    if study not in STUDIES:
        raise ConfigError(f"experiment.study: unknown study {study!r}; expected one of {sorted(STUDIES)}")
    cls, _ = STUDIES[study]
    defaults = _defaults(cls)
    unknown = sorted(set(raw) - set(defaults))
    if unknown:
        raise ConfigError(f"params.{unknown[0]}: unknown key for study {study!r}")
    kwargs = {k: _coerce(f"params.{k}", v, defaults[k]) for k, v in raw.items()}
    params = cls(**kwargs)
    try:
        params.validate()
    except ValueError as exc:
        raise ConfigError(f"params.{exc}") from None
    return params


@dataclass
class ExperimentConfig:
    name: str
    study: str
    seed: int
    params: object
    description: str = ""
    out: str = "results"
    checks: list = field(default_factory=list)

    def to_dict(self) -> dict:
        exp = {"name": self.name, "study": self.study, "seed": self.seed}
        if self.description:
            exp["description"] = self.description
        if self.out != "results":
            exp["out"] = self.out
        if self.checks:
            exp["checks"] = list(self.checks)
        return {"experiment": exp, "params": asdict(self.params)}

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def with_seed(self, seed: int) -> "ExperimentConfig":
        d = self.to_dict()
        d["experiment"]["seed"] = int(seed)
        return config_from_dict(d)


def config_from_dict(data: dict) -> ExperimentConfig:
    unknown = sorted(set(data) - {"experiment", "params"})
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown table")
    exp = data.get("experiment")
    if not isinstance(exp, dict):
        raise ConfigError("experiment: missing [experiment] table")
    for k in exp:
        if k not in EXPERIMENT_KEYS:
            raise ConfigError(f"experiment.{k}: unknown key")
    for k in REQUIRED:
        if k not in exp:
            raise ConfigError(f"experiment.{k}: required key missing")
    for k, typ in EXPERIMENT_KEYS.items():
        if k in exp and (not isinstance(exp[k], typ) or isinstance(exp[k], bool)):
            raise ConfigError(f"experiment.{k}: expected {typ.__name__}, got {exp[k]!r}")
    if not 0 <= exp["seed"] <= MAX_SEED:
        raise ConfigError("experiment.seed: must be an unsigned 64-bit integer")
    if not exp["name"] or any(c in exp["name"] for c in "/\\"):
        raise ConfigError("experiment.name: must be a plain file stem")
    raw = data.get("params", {})
    if not isinstance(raw, dict):
        raise ConfigError("params: expected a table")
    params = build_params(exp["study"], raw)
    checks = exp.get("checks", [])
    if any(not isinstance(c, str) for c in checks):
        raise ConfigError("experiment.checks: expected a list of check names")
    return ExperimentConfig(
        name=exp["name"],
        study=exp["study"],
        seed=exp["seed"],
        params=params,
        description=exp.get("description", ""),
        out=exp.get("out", "results"),
        checks=list(checks),
    )


def loads(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"syntax: {exc}") from None
    return config_from_dict(data)


def load(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        text = fh.read().decode()
    return loads(text)
