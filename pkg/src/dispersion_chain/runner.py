"""Scenario orchestration behind the command-line interface.

Every scenario builds a position-velocity state from the configuration,
optionally evolves it with the configured closure and writes its artefacts
into the output directory.  Outputs depend only on the configuration, so
repeated runs produce identical bytes.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Callable

from .analytic import gaussian_field, oscillator_grid, quantum_pressure_check, wigner_oscillator
from .closures import Closure, PhysicalParams
from .config import RunConfig
from .conservation import (
    divergence_identity_check,
    energy_residual_first,
    energy_residual_second,
    momentum_residual_first,
    momentum_residual_second,
    theorem5_check,
)
from .core import DistributionField, KinematicIndexSet, make_grid, marginalize
from .dumpio import write_grid_dump
from .errors import ConfigurationError, DomainError
from .h_entropy import h_function, h_theorem_residual, negative_region, track_f0_minus
from .moments import central_moment2
from .operators import chain_log_residual, dissipation_source
from .transport import step_rank2_first_group

POSITION_VELOCITY = KinematicIndexSet((1, 2))
UNSUPPORTED_BY_RUNNER = ("rank3_lower", "rank3_middle", "rank3_upper", "gapped_lower", "gapped_middle", "gapped_upper")


def build_params(config: RunConfig) -> PhysicalParams:
    p = config.params
    if p["potential"] is None:
        return PhysicalParams.harmonic(p["mass"], p["hbar"], p["omega"])
    return PhysicalParams(p["mass"], p["hbar"], tuple(p["potential"]), p["omega"])


def build_axes(config: RunConfig, params: PhysicalParams):
    grid = config.grid
    if grid["axes"] is None:
        return oscillator_grid(params, grid["points"], grid["widths"])
    return make_grid(sorted(grid["axes"], key=lambda spec: spec["index"]))


def build_state(config: RunConfig, params: PhysicalParams, axes) -> DistributionField:
    state = config.state
    x0, v0 = state["displacement"]
    if state["kind"] == "wigner":
        return wigner_oscillator(state["n"], params, axes, displacement=(x0, v0))
    widths = state["widths"] or [params.sigma_x, params.sigma_v]
    return gaussian_field(axes, {1: x0, 2: v0}, {1: widths[0], 2: widths[1]})


def build_closure(config: RunConfig, params: PhysicalParams) -> Closure:
    if config.closure["kind"] == "moyal":
        return Closure.moyal(params, config.closure["k_max"])
    return Closure.zero(3, POSITION_VELOCITY)


class _Pair:
    """Two consecutive time levels with their closure data, evaluated once."""

    def __init__(self, early: DistributionField, late: DistributionField, closure: Closure):
        self.fields = (early, late)
        self.means = (closure.evaluate(early), closure.evaluate(late))
        self.sources = tuple(dissipation_source(m, 2) for m in self.means)
        self.closure = closure


def _parity(pair: _Pair, config, params):
    verdict, report = theorem5_check(pair.fields[0], 0, top=pair.means, later=pair.fields[1])
    return report, verdict


def _quantum_pressure(pair: _Pair, config, params):
    late = pair.fields[1]
    try:
        return quantum_pressure_check(marginalize(late, [2]), central_moment2(late, 2, 2), params), None
    except DomainError:
        # evolved tails can undershoot to zero or below inside the window
        return None, "non-positive-density"


CHECKS: dict[str, Callable] = {
    "momentum": lambda pair, c, p: (momentum_residual_first(pair.fields, pair.means), None),
    "energy": lambda pair, c, p: (energy_residual_first(pair.fields, pair.means), None),
    "momentum_mixed": lambda pair, c, p: (momentum_residual_second(pair.fields, None, pair.means), None),
    "energy_mixed": lambda pair, c, p: (energy_residual_second(pair.fields, None, pair.means), None),
    "pressure_identity": lambda pair, c, p: (divergence_identity_check(0, pair.fields, pair.means), None),
    "parity_identity": _parity,
    "log_chain": lambda pair, c, p: (
        chain_log_residual(pair.fields, {1: "coordinate", 2: pair.means}, [pair.sources]),
        None,
    ),
    "h_theorem": lambda pair, c, p: (h_theorem_residual(pair.fields, [pair.sources]), None),
    "signed_h": lambda pair, c, p: (h_theorem_residual(pair.fields, [pair.sources], mode="signed"), None),
    "quantum_pressure": _quantum_pressure,
}


def _check_supported(config: RunConfig) -> None:
    for name in config.checks:
        if name in UNSUPPORTED_BY_RUNNER:
            raise ConfigurationError(
                f"equation {name!r} needs a rank-3 field; the runner evolves position-velocity states only"
            )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    try:
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def _write_json(path: Path, payload) -> None:
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def _prepare_output(config: RunConfig, out_dir) -> Path:
    path = Path(out_dir if out_dir is not None else config.output)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path}: {exc.strerror}") from exc
    return path


def _series_row(field: DistributionField, pair: _Pair | None, config, params) -> list:
    closure_mean = pair.means[1] if pair is not None else None
    sources = [dissipation_source(closure_mean, 2)] if closure_mean is not None else []
    h = h_function(field, sources)
    row = [field.time, h.f0, h.H, h.f0_minus]
    for name in config.checks:
        report = CHECKS[name](pair, config, params)[0] if pair is not None else None
        row.append(report.residual_norm if report is not None else None)
    row.append(h.mean_Q[0] if h.mean_Q else None)
    return row


def _series_header(config) -> list[str]:
    return ["t", "f0", "H", "f0_minus"] + [f"{name}_norm" for name in config.checks] + ["mean_Q2"]


def _evolve(config: RunConfig, field, closure, on_snapshot) -> tuple[DistributionField, _Pair | None]:
    """Step ``config.steps`` times, calling ``on_snapshot(field, pair)`` at t0 and every stride."""
    on_snapshot(field, None)
    pair = None
    current = field
    for step in range(1, config.steps + 1):
        nxt = step_rank2_first_group(current, closure, config.dt)
        if step % config.snapshot_stride == 0 or step == config.steps:
            pair = _Pair(current, nxt, closure)
            if step % config.snapshot_stride == 0:
                on_snapshot(nxt, pair)
        current = nxt
    return current, pair


def run(config: RunConfig, scenario: str | None = None, out_dir=None) -> dict:
    """Execute one scenario and return a summary of the written artefacts."""
    scenario = scenario or config.scenario
    if scenario is None:
        raise ConfigurationError("no scenario given")
    if config.scenario is not None and config.scenario != scenario:
        raise ConfigurationError(f"config scenario {config.scenario!r} does not match command {scenario!r}")
    _check_supported(config)
    params = build_params(config)
    axes = build_axes(config, params)
    field = build_state(config, params, axes)
    closure = build_closure(config, params)
    out = _prepare_output(config, out_dir)
    _write_json(out / "run_config.json", dict(config.to_dict(), scenario=scenario))
    summary = {"scenario": scenario, "output": str(out), "files": ["run_config.json"]}

    if scenario == "state":
        write_grid_dump(field, out / "state.dump")
        h = h_function(field)
        regions = negative_region(field)
        _write_json(
            out / "state.json",
            {
                "f0": h.f0,
                "H": h.H,
                "f0_minus": h.f0_minus,
                "negative_components": regions.negative_component_count,
                "index_set": list(field.index_set.indices),
            },
        )
        summary["files"] += ["state.dump", "state.json"]
        return summary

    if scenario == "check":
        if config.steps < 1:
            raise ConfigurationError("the check scenario needs steps >= 1 to form a time pair")
        _, pair = _evolve(config, field, closure, lambda f, p: None)
        rows, failed = [], []
        for name in config.checks:
            report, verdict = CHECKS[name](pair, config, params)
            tolerance = config.tolerance(name)
            if report is None:
                rows.append([name, pair.fields[1].time, None, None, tolerance, verdict or "skipped"])
                continue
            passed = report.residual_norm <= tolerance
            if not passed:
                failed.append(name)
            rows.append([name, report.time, report.residual_norm, report.max_norm, tolerance, "pass" if passed else "fail"])
        _write_csv(out / "checks.csv", ["equation_id", "t", "residual_norm", "max_norm", "tolerance", "status"], rows)
        summary["files"].append("checks.csv")
        summary["failed"] = failed
        return summary

    series_rows: list = []
    snapshots: list[DistributionField] = []
    dumps: list[str] = []

    def record(snap, pair):
        series_rows.append(_series_row(snap, pair, config, params))
        snapshots.append(snap)
        if scenario == "evolve":
            name = f"snapshot_{len(dumps):06d}.dump"
            write_grid_dump(snap, out / name)
            dumps.append(name)

    _evolve(config, field, closure, record)
    _write_csv(out / "series.csv", _series_header(config), series_rows)
    summary["files"] += dumps + ["series.csv"]
    if scenario == "report":
        track = track_f0_minus(snapshots, config.tolerance("f0_minus_drift"))
        _write_json(
            out / "report.json",
            {
                "times": list(track.times),
                "f0_minus": list(track.values),
                "f0_minus_max_drift": track.max_drift,
                "f0_minus_drift_tolerance": track.tolerance,
                "f0_minus_drift_flagged": track.flagged,
                "negative_components": list(track.component_counts),
            },
        )
        summary["files"].append("report.json")
    return summary
