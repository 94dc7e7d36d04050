import csv
import json
import math

import numpy as np
import pytest

from dispersion_chain import ConfigurationError, DumpFormatError, PhysicalParams, oscillator_grid, wigner_oscillator
from dispersion_chain.cli import main
from dispersion_chain.config import DEFAULT_TOLERANCES, parse_config
from dispersion_chain.core import DistributionField, make_grid
from dispersion_chain.dumpio import dump_bytes, load_bytes, read_grid_dump, write_grid_dump
from dispersion_chain.h_entropy import h_function
from dispersion_chain.runner import run

MINIMAL_EVOLVE = json.dumps(
    {
        "scenario": "evolve",
        "state": {"kind": "wigner", "n": 1},
        "closure": {"kind": "moyal"},
        "dt": 2 * math.pi / 400,
        "steps": 400,
    }
)


def small(scenario, **extra):
    base = {"grid": {"points": 32, "widths": 8.0}, "dt": 0.05, "steps": 4, "snapshot_stride": 2}
    base.update(extra)
    return parse_config(json.dumps(base)), scenario


def read_csv(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


class TestParseConfig:
    def test_minimal_evolve(self):
        cfg = parse_config(MINIMAL_EVOLVE)
        assert cfg.scenario == "evolve" and cfg.state["n"] == 1
        assert cfg.steps * cfg.dt == pytest.approx(2 * math.pi)
        assert cfg.grid["points"] == 256 and cfg.snapshot_stride == 1

    def test_empty_document_gives_defaults(self):
        cfg = parse_config("")
        assert cfg.scenario is None and cfg.dt is None and cfg.checks == ()

    def test_zero_dt(self):
        with pytest.raises(ConfigurationError, match="dt must be positive"):
            parse_config('{"dt": 0}')

    def test_unknown_key_is_named(self):
        with pytest.raises(ConfigurationError, match="colision"):
            parse_config('{"colision": {"kind": "moyal"}}')
        with pytest.raises(ConfigurationError, match="closure.kmax"):
            parse_config('{"closure": {"kmax": 2}}')

    def test_syntax_error_reports_position(self):
        with pytest.raises(ConfigurationError, match="line 3, column"):
            parse_config('{\n  "dt": 0.1,\n  "steps" 4\n}')

    @pytest.mark.parametrize(
        "text, fragment",
        [
            ('{"snapshot_stride": 0}', "snapshot_stride"),
            ('{"checks": ["momentom"]}', "momentom"),
            ('{"steps": 3}', "dt is required"),
            ('{"tolerances": {"nope": 1}}', "tolerances.nope"),
            ('{"state": {"kind": "coherent"}}', "state.kind"),
            ('{"params": {"mass": -1}}', "params.mass"),
            ("[1, 2]", "JSON object"),
        ],
    )
    def test_schema_violations(self, text, fragment):
        with pytest.raises(ConfigurationError, match=fragment):
            parse_config(text)

    def test_overrides(self):
        cfg = parse_config(MINIMAL_EVOLVE, ["state.n=3", "grid.points=64", 'checks=["energy"]', "output=runs/a"])
        assert cfg.state["n"] == 3 and cfg.grid["points"] == 64
        assert cfg.checks == ("energy",) and cfg.output == "runs/a"
        with pytest.raises(ConfigurationError, match="KEY=VALUE"):
            parse_config("", ["dt"])

    def test_tolerance_lookup(self):
        cfg = parse_config('{"tolerances": {"energy": 0.5}}')
        assert cfg.tolerance("energy") == 0.5
        assert cfg.tolerance("momentum") == DEFAULT_TOLERANCES["momentum"]


class TestDump:
    def test_bitwise_round_trip(self, tmp_path, rng):
        axes = make_grid([(1, -2.0, 3.0, 7), (2, -1.0, 1.0, 5), (4, 0.0, 2.0, 3)])
        f = DistributionField(axes, rng.normal(size=(7, 5, 3)), time=0.123456789)
        g = read_grid_dump(write_grid_dump(f, tmp_path / "f.dump"))
        assert g.values.tobytes() == f.values.tobytes()
        assert g.time == f.time
        assert g.index_set.indices == (1, 2, 4)
        assert [ax.kinematic_index for ax in g.axes] == [1, 2, 4]
        assert all(a.to_dict() == b.to_dict() for a, b in zip(f.axes, g.axes))

    def test_special_values_survive(self):
        axes = make_grid([(1, 0.0, 1.0, 4)])
        values = np.array([-0.0, 5e-324, 1.7976931348623157e308, -1e-300])
        g = load_bytes(dump_bytes(DistributionField(axes, values)))
        assert g.values.tobytes() == values.tobytes()

    def test_truncated_payload(self, params):
        blob = dump_bytes(wigner_oscillator(0, params, oscillator_grid(params, 8, 8)))
        with pytest.raises(DumpFormatError, match="size mismatch"):
            load_bytes(blob[:-8])

    def test_foreign_header(self):
        with pytest.raises(DumpFormatError):
            load_bytes(b'{"format": "other"}\n')
        with pytest.raises(DumpFormatError, match="header"):
            load_bytes(b"no newline here")

    def test_missing_file_has_path(self, tmp_path):
        with pytest.raises(OSError, match="missing.dump"):
            read_grid_dump(tmp_path / "missing.dump")


class TestRunner:
    def test_state_scenario(self, tmp_path):
        cfg, scenario = small("state", state={"n": 1})
        summary = run(cfg, scenario, tmp_path)
        assert summary["files"] == ["run_config.json", "state.dump", "state.json"]
        info = json.loads((tmp_path / "state.json").read_text())
        f = read_grid_dump(tmp_path / "state.dump")
        assert info["f0_minus"] == h_function(f).f0_minus
        assert info["negative_components"] == 1 and info["index_set"] == [1, 2]

    def test_evolve_snapshots_at_stride(self, tmp_path):
        cfg, scenario = small("evolve", steps=5, snapshot_stride=2)
        summary = run(cfg, scenario, tmp_path)
        dumps = sorted(p.name for p in tmp_path.glob("snapshot_*.dump"))
        assert dumps == ["snapshot_000000.dump", "snapshot_000001.dump", "snapshot_000002.dump"]
        assert [read_grid_dump(tmp_path / d).time for d in dumps] == pytest.approx([0.0, 0.1, 0.2])
        rows = read_csv(tmp_path / "series.csv")
        assert rows[0] == ["t", "f0", "H", "f0_minus", "mean_Q2"]
        assert len(rows) == 4 and "series.csv" in summary["files"]

    def test_check_scenario_one_row_per_equation(self, tmp_path):
        checks = ["momentum", "energy", "signed_h", "log_chain", "quantum_pressure", "parity_identity"]
        cfg, scenario = small("check", checks=checks)
        summary = run(cfg, scenario, tmp_path)
        rows = read_csv(tmp_path / "checks.csv")
        assert rows[0] == ["equation_id", "t", "residual_norm", "max_norm", "tolerance", "status"]
        assert [r[0] for r in rows[1:]] == checks
        statuses = {r[0]: r[5] for r in rows[1:]}
        assert all(s in ("pass", "fail", "odd-component-detected", "even", "non-positive-density") for s in statuses.values())
        assert sorted(summary["failed"]) == sorted(k for k, s in statuses.items() if s == "fail")

    def test_check_needs_a_time_pair(self, tmp_path):
        cfg, scenario = small("check", steps=0, checks=["energy"])
        with pytest.raises(ConfigurationError, match="steps"):
            run(cfg, scenario, tmp_path)

    def test_rank3_equations_rejected(self, tmp_path):
        cfg, scenario = small("check", checks=["rank3_upper"])
        with pytest.raises(ConfigurationError, match="rank-3"):
            run(cfg, scenario, tmp_path)

    def test_report_series_match_direct_diagnostics(self, tmp_path):
        cfg, scenario = small("report", state={"n": 1})
        run(cfg, scenario, tmp_path)
        report = json.loads((tmp_path / "report.json").read_text())
        rows = read_csv(tmp_path / "series.csv")[1:]
        assert [float(r[0]) for r in rows] == report["times"]
        assert [float(r[3]) for r in rows] == report["f0_minus"]
        first = h_function(wigner_oscillator(1, PhysicalParams.harmonic(), oscillator_grid(PhysicalParams.harmonic(), 32, 8)))
        assert float(rows[0][1]) == first.f0 and float(rows[0][2]) == first.H
        # the harmonic closure has no velocity divergence
        assert all(abs(float(r[4])) < 1e-12 for r in rows[1:])

    def test_scenario_mismatch(self, tmp_path):
        cfg = parse_config(MINIMAL_EVOLVE)
        with pytest.raises(ConfigurationError, match="does not match"):
            run(cfg, "report", tmp_path)

    def test_byte_identical_reruns(self, tmp_path):
        for name in ("a", "b"):
            cfg, scenario = small("report", state={"n": 2}, checks=["energy"])
            run(cfg, scenario, tmp_path / name)
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
        for n in names:
            assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


class TestMain:
    def invoke(self, tmp_path, command, *overrides, config=None):
        argv = [command, "--out", str(tmp_path / "out")]
        if config is not None:
            argv += ["--config", str(config)]
        for item in ("grid.points=32", "dt=0.05", "steps=2") + overrides:
            argv += ["--override", item]
        return main(argv)

    def test_success(self, tmp_path, capsys):
        assert self.invoke(tmp_path, "state") == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["scenario"] == "state" and (tmp_path / "out" / "state.dump").exists()

    def test_failed_check(self, tmp_path, capsys):
        assert self.invoke(tmp_path, "check", 'checks=["energy"]', "tolerances.energy=0") == 1
        assert json.loads(capsys.readouterr().out)["failed"] == ["energy"]

    def test_schema_error(self, tmp_path, capsys):
        assert self.invoke(tmp_path, "evolve", "dt=0") == 2
        assert "dt must be positive" in capsys.readouterr().err

    def test_config_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text('{"scenario": "state", "state": {"n": 2}}')
        assert self.invoke(tmp_path, "state", config=path) == 0
        assert json.loads((tmp_path / "out" / "run_config.json").read_text())["state"]["n"] == 2

    def test_displacement_guard(self, tmp_path, capsys):
        assert self.invoke(tmp_path, "evolve", "dt=1000") == 3
        assert "displacement" in capsys.readouterr().err

    def test_unreadable_config(self, tmp_path, capsys):
        assert self.invoke(tmp_path, "state", config=tmp_path / "absent.json") == 4
        assert "absent.json" in capsys.readouterr().err

    def test_unwritable_output(self, tmp_path, capsys):
        blocker = tmp_path / "out"
        blocker.write_text("a file, not a directory")
        assert self.invoke(tmp_path, "state") == 4
        assert "out" in capsys.readouterr().err
