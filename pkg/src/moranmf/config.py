"""Run configuration: a TOML file with ``[model]``, ``[model.schedule]`` and ``[run]`` tables.

Every key is checked against a whitelist; unknown keys are rejected by
name.  The resolved configuration (defaults filled in) is what gets hashed
and echoed into output headers.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import MoranError
from .model import SCHEDULE_KINDS, LevelSchedule, ModelParams

COMMANDS = ("validate", "spectra", "localdim", "lq", "ld", "aux", "sample")

MODEL_KEYS = {"A", "B", "p", "q", "schedule"}
SCHEDULE_KEYS = {"kind", "explicit", "max_index"}

RUN_DEFAULTS: dict[str, Any] = {
    "command": None,
    "seed": 0,
    "grid": 200,
    "grid_joint": 50,
    "depth_index": 8,
    "n_samples": 200,
    "out": "out",
    "workers": 1,
    "s_values": [-2.0, -0.5, 0.0, 0.5, 2.0, 4.0],
    "alpha": None,
    "alpha_p": None,
    "beta": None,
    "eps": [0.1, 0.03, 0.01],
    "target": "mu",
    "case": None,
    "n_levels": 2000,
    "address": "random",
}

ADDRESS_KINDS = ("random", "zeros", "ones", "alternating")


class ConfigError(MoranError):
    """The configuration cannot be parsed or contains invalid keys or values."""


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    run: dict
    resolved: dict

    @property
    def command(self) -> str:
        return self.run["command"]

    @property
    def hash(self) -> str:
        return config_hash(self.resolved)


def config_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _reject_unknown(table: dict, allowed: set, where: str) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key {where}.{key!s} (allowed: {', '.join(sorted(allowed))})")


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return float(value)


def _integer(value, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value!r}")
    return value


def _parse_explicit(value) -> tuple[int, ...]:
    if isinstance(value, str):
        parts = [v.strip() for v in value.split(",") if v.strip()]
        try:
            return tuple(int(v) for v in parts)
        except ValueError:
            raise ConfigError(f"model.schedule.explicit: not a comma list of integers: {value!r}") from None
    if isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        return tuple(value)
    raise ConfigError("model.schedule.explicit must be a comma list or an array of integers")


def _model_from(table: dict) -> tuple[ModelParams, dict]:
    _reject_unknown(table, MODEL_KEYS, "model")
    for key in ("A", "B", "p", "q"):
        if key not in table:
            raise ConfigError(f"missing key model.{key}")
    sched_tab = table.get("schedule", {})
    if not isinstance(sched_tab, dict):
        raise ConfigError("model.schedule must be a table")
    _reject_unknown(sched_tab, SCHEDULE_KEYS, "model.schedule")
    kind = sched_tab.get("kind", "two_pow_i_squared")
    if kind not in SCHEDULE_KINDS:
        raise ConfigError(f"model.schedule.kind must be one of {SCHEDULE_KINDS}, got {kind!r}")
    explicit = _parse_explicit(sched_tab["explicit"]) if "explicit" in sched_tab else ()
    max_index = sched_tab.get("max_index")
    if max_index is not None:
        max_index = _integer(max_index, "model.schedule.max_index", 1)
    try:
        schedule = LevelSchedule(kind, explicit, max_index)
    except MoranError as exc:
        raise ConfigError(f"model.schedule: {exc}") from None
    vals = {k: _number(table[k], f"model.{k}") for k in ("A", "B", "p", "q")}
    params = ModelParams(vals["A"], vals["B"], vals["p"], vals["q"], schedule)
    resolved = dict(vals, schedule={"kind": kind, "explicit": list(explicit), "max_index": max_index})
    return params, resolved


def _run_from(table: dict) -> dict:
    _reject_unknown(table, set(RUN_DEFAULTS), "run")
    run = dict(RUN_DEFAULTS)
    run.update(table)
    if run["command"] not in COMMANDS:
        raise ConfigError(f"run.command must be one of {COMMANDS}, got {run['command']!r}")
    for key, minimum in (("seed", 0), ("grid", 1), ("grid_joint", 1), ("depth_index", 1),
                         ("n_samples", 1), ("workers", 1), ("n_levels", 1)):
        run[key] = _integer(run[key], f"run.{key}", minimum)
    for key in ("alpha", "alpha_p", "beta"):
        if run[key] is not None:
            run[key] = _number(run[key], f"run.{key}")
    for key in ("s_values", "eps"):
        val = run[key]
        if not isinstance(val, list) or not val:
            raise ConfigError(f"run.{key} must be a non-empty array of numbers")
        run[key] = [_number(v, f"run.{key}") for v in val]
    if not isinstance(run["out"], str):
        raise ConfigError("run.out must be a string path")
    if run["address"] not in ADDRESS_KINDS:
        raise ConfigError(f"run.address must be one of {ADDRESS_KINDS}")
    return run


def parse_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    _reject_unknown(data, {"model", "run"}, "<top>")
    if "model" not in data or "run" not in data:
        raise ConfigError("config needs both [model] and [run] tables")
    params, model_resolved = _model_from(data["model"])
    run = _run_from(data["run"])
    resolved = {"model": model_resolved, "run": run}
    return RunConfig(params, run, resolved)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
