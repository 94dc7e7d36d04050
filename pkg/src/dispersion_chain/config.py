"""Run configuration: JSON parsing, defaults, strict key checking and dotted overrides."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .errors import ConfigurationError

SCENARIOS = ("state", "evolve", "check", "report")
STATE_KINDS = ("wigner", "gaussian")
CLOSURE_KINDS = ("moyal", "zero")

KNOWN_EQUATIONS = (
    "momentum",
    "energy",
    "momentum_mixed",
    "energy_mixed",
    "rank3_lower",
    "rank3_middle",
    "rank3_upper",
    "gapped_lower",
    "gapped_middle",
    "gapped_upper",
    "pressure_identity",
    "parity_identity",
    "log_chain",
    "h_theorem",
    "signed_h",
    "quantum_pressure",
)

DEFAULT_TOLERANCES = {
    "momentum": 5e-3,
    "energy": 5e-3,
    "momentum_mixed": 5e-3,
    "energy_mixed": 5e-3,
    "pressure_identity": 5e-3,
    "parity_identity": 1e-8,
    "log_chain": 5e-2,
    "h_theorem": 1e-6,
    "signed_h": 1e-6,
    "quantum_pressure": 1e-2,
    "f0_minus_drift": 2e-3,
}

DEFAULTS: dict[str, Any] = {
    "scenario": None,
    "state": {"kind": "wigner", "n": 0, "displacement": [0.0, 0.0], "widths": None},
    "params": {"mass": 1.0, "hbar": 1.0, "omega": 1.0, "potential": None},
    "grid": {"points": 256, "widths": 8.0, "axes": None},
    "closure": {"kind": "moyal", "k_max": 0},
    "dt": None,
    "steps": 0,
    "snapshot_stride": 1,
    "checks": [],
    "output": "out",
    "tolerances": {},
}

# sections whose contents are checked key by key
NESTED = ("state", "params", "grid", "closure")


@dataclass(frozen=True)
class RunConfig:
    scenario: str | None
    state: dict
    params: dict
    grid: dict
    closure: dict
    dt: float | None
    steps: int
    snapshot_stride: int
    checks: tuple[str, ...]
    output: str
    tolerances: dict

    def tolerance(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES.get(name, 0.0)))

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "state": self.state,
            "params": self.params,
            "grid": self.grid,
            "closure": self.closure,
            "dt": self.dt,
            "steps": self.steps,
            "snapshot_stride": self.snapshot_stride,
            "checks": list(self.checks),
            "output": self.output,
            "tolerances": self.tolerances,
        }


def _reject_unknown(section: Mapping, allowed: Mapping, where: str) -> None:
    for key in section:
        if key not in allowed:
            name = f"{where}.{key}" if where else key
            raise ConfigurationError(f"unknown configuration key {name!r}")


def _number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{key} must be a number, got {value!r}")
    return float(value)


def _integer(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{key} must be an integer, got {value!r}")
    return value


def _merge(raw: Mapping) -> dict:
    if not isinstance(raw, Mapping):
        raise ConfigurationError("the configuration must be a JSON object")
    _reject_unknown(raw, DEFAULTS, "")
    merged = copy.deepcopy(DEFAULTS)
    for key, value in raw.items():
        if key in NESTED:
            if not isinstance(value, Mapping):
                raise ConfigurationError(f"{key} must be an object")
            _reject_unknown(value, DEFAULTS[key], key)
            merged[key].update(copy.deepcopy(dict(value)))
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _validate_grid(grid: dict) -> None:
    if grid["axes"] is None:
        if _integer(grid["points"], "grid.points") < 2:
            raise ConfigurationError("grid.points must be at least 2")
        if not _number(grid["widths"], "grid.widths") > 0:
            raise ConfigurationError("grid.widths must be positive")
        return
    axes = grid["axes"]
    if not isinstance(axes, list) or len(axes) != 2:
        raise ConfigurationError("grid.axes must list the position and velocity axes")
    for i, spec in enumerate(axes):
        if not isinstance(spec, Mapping):
            raise ConfigurationError(f"grid.axes[{i}] must be an object")
        _reject_unknown(spec, {"index": 0, "min": 0, "max": 0, "points": 0}, f"grid.axes[{i}]")
        for key in ("index", "min", "max", "points"):
            if key not in spec:
                raise ConfigurationError(f"grid.axes[{i}] is missing {key!r}")
    if sorted(spec["index"] for spec in axes) != [1, 2]:
        raise ConfigurationError("grid.axes must cover kinematic orders 1 and 2")


def validate(merged: dict) -> RunConfig:
    scenario = merged["scenario"]
    if scenario is not None and scenario not in SCENARIOS:
        raise ConfigurationError(f"scenario must be one of {', '.join(SCENARIOS)}, got {scenario!r}")

    state = merged["state"]
    if state["kind"] not in STATE_KINDS:
        raise ConfigurationError(f"state.kind must be one of {', '.join(STATE_KINDS)}, got {state['kind']!r}")
    if _integer(state["n"], "state.n") < 0:
        raise ConfigurationError("state.n must be non-negative")
    disp = state["displacement"]
    if not (isinstance(disp, list) and len(disp) == 2):
        raise ConfigurationError("state.displacement must be a pair [x0, v0]")
    for value in disp:
        _number(value, "state.displacement")
    if state["widths"] is not None:
        widths = state["widths"]
        if not (isinstance(widths, list) and len(widths) == 2 and all(_number(w, "state.widths") > 0 for w in widths)):
            raise ConfigurationError("state.widths must be a pair of positive numbers")

    params = merged["params"]
    for key in ("mass", "omega"):
        if not _number(params[key], f"params.{key}") > 0:
            raise ConfigurationError(f"params.{key} must be positive")
    if _number(params["hbar"], "params.hbar") < 0:
        raise ConfigurationError("params.hbar must be non-negative")
    if params["potential"] is not None:
        if not isinstance(params["potential"], list) or not params["potential"]:
            raise ConfigurationError("params.potential must be a non-empty list of polynomial coefficients")
        for value in params["potential"]:
            _number(value, "params.potential")

    _validate_grid(merged["grid"])

    closure = merged["closure"]
    if closure["kind"] not in CLOSURE_KINDS:
        raise ConfigurationError(f"closure.kind must be one of {', '.join(CLOSURE_KINDS)}, got {closure['kind']!r}")
    if _integer(closure["k_max"], "closure.k_max") < 0:
        raise ConfigurationError("closure.k_max must be non-negative")

    dt = merged["dt"]
    if dt is not None and not _number(dt, "dt") > 0:
        raise ConfigurationError("dt must be positive")
    steps = _integer(merged["steps"], "steps")
    if steps < 0:
        raise ConfigurationError("steps must be non-negative")
    if steps > 0 and dt is None:
        raise ConfigurationError("dt is required when steps > 0")
    stride = _integer(merged["snapshot_stride"], "snapshot_stride")
    if stride < 1:
        raise ConfigurationError("snapshot_stride must be at least 1")

    checks = merged["checks"]
    if not isinstance(checks, list):
        raise ConfigurationError("checks must be a list of equation ids")
    for name in checks:
        if name not in KNOWN_EQUATIONS:
            raise ConfigurationError(f"unknown equation id {name!r} in checks")

    tolerances = merged["tolerances"]
    if not isinstance(tolerances, Mapping):
        raise ConfigurationError("tolerances must be an object")
    for name, value in tolerances.items():
        if name not in DEFAULT_TOLERANCES:
            raise ConfigurationError(f"unknown tolerance key 'tolerances.{name}'")
        if not _number(value, f"tolerances.{name}") >= 0:
            raise ConfigurationError(f"tolerances.{name} must be non-negative")

    if not isinstance(merged["output"], str) or not merged["output"]:
        raise ConfigurationError("output must be a non-empty path")

    return RunConfig(
        scenario=scenario,
        state=state,
        params=params,
        grid=merged["grid"],
        closure=closure,
        dt=None if dt is None else float(dt),
        steps=steps,
        snapshot_stride=stride,
        checks=tuple(checks),
        output=merged["output"],
        tolerances=dict(tolerances),
    )


def apply_overrides(raw: dict, overrides: Sequence[str]) -> dict:
    """Apply ``KEY=VALUE`` assignments; dotted keys reach into sections and values are read as JSON."""
    out = copy.deepcopy(raw)
    for item in overrides:
        key, sep, text = item.partition("=")
        if not sep or not key:
            raise ConfigurationError(f"override {item!r} is not of the form KEY=VALUE")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        target = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = target.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"override {key!r}: {part!r} is not a section")
            target = node
        target[parts[-1]] = value
    return out


def parse_config(text: str, overrides: Sequence[str] = ()) -> RunConfig:
    """Parse a JSON document into a validated RunConfig."""
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"configuration syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError("the configuration must be a JSON object")
    return validate(_merge(apply_overrides(raw, overrides)))
