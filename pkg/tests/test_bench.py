import json
import os

import numpy as np
import pytest

from batchgrad.bench import cli
from batchgrad.bench.config import config_from_dict, flatten, load_config, preset
from batchgrad.bench.runner import (
    MANIFEST_NAME,
    MissingTracesError,
    emit_figure_data,
    load_manifest,
    run_experiment,
    series_count,
)
from batchgrad.noise import derive_seed
from batchgrad.optimizer import ConditionRefused

SMALL = {
    "name": "small",
    "objective": {"name": "quadratic_logsumexp", "d": 8, "cond_number": 10, "seed": 1},
    "algorithm": ["batch_update", "adam"],
    "direction.option": ["O1", "O4A"],
    "direction.rho": 0.5,
    "noise.snr_db": 40,
    "horizon": 400,
    "repetitions": 2,
    "master_seed": 3,
    "record_every": 100,
}


def write_config(path, data):
    path.write_text(json.dumps(data))
    return path


class TestConfig:
    def test_flatten_nested(self):
        assert flatten({"a": {"b": 1, "c": {"d": 2}}, "e": 3}) == {"a.b": 1, "a.c.d": 2, "e": 3}

    def test_grid_product(self):
        cfg = config_from_dict(SMALL)
        assert len(cfg.cells) == 4
        assert {(c["algorithm"], c["option"]) for c in cfg.cells} == {
            ("batch_update", "O1"), ("batch_update", "O4A"), ("adam", "O1"), ("adam", "O4A")}
        assert all(c["snr_db"] == 40 for c in cfg.cells)

    def test_nested_and_flat_equivalent(self):
        flat = dict(SMALL)
        flat.pop("objective")
        flat.update({"objective.name": "quadratic_logsumexp", "objective.d": 8,
                     "objective.cond_number": 10, "objective.seed": 1})
        assert config_from_dict(flat).to_dict() == config_from_dict(SMALL).to_dict()

    def test_explicit_cells(self):
        cfg = config_from_dict({"objective.name": "example21",
                                "cells": [{"option": "O2"}, {"option": "O4", "rho": 0.1}]})
        assert [c["option"] for c in cfg.cells] == ["O2", "O4"]
        assert cfg.cells[1]["rho"] == 0.1

    def test_noise_none(self):
        cfg = config_from_dict({**SMALL, "noise.kind": "none"})
        assert all(c["snr_db"] is None for c in cfg.cells)

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            config_from_dict({**SMALL, "horizn": 5})

    def test_requires_objective(self):
        with pytest.raises(ValueError):
            config_from_dict({"direction.option": "O1"})

    def test_repetitions_positive(self):
        with pytest.raises(ValueError):
            config_from_dict({**SMALL, "repetitions": 0})

    @pytest.mark.parametrize("fig", ["fig1", "fig2", "fig3"])
    def test_presets_share_experiment_parameters(self, fig):
        desk, paper = preset(fig, "desk"), preset(fig, "paper")
        for cfg in (desk, paper):
            s = cfg.schedule
            assert (s.alpha0, s.c0, s.tau, s.p, s.q) == (0.01, 0.01, 200.0, 1.0, 0.02)
            assert cfg.objective["cond_number"] == 100.0
            assert all(c["snr_db"] == 50.0 for c in cfg.cells)
        assert desk.objective["d"] == 100 and paper.objective["d"] == 1000
        assert desk.cells == paper.cells
        strip = lambda c: {k: v for k, v in c.to_dict().items()  # noqa: E731
                           if k not in ("objective", "horizon", "name", "scale", "record_every")}
        assert strip(desk) == strip(paper)

    def test_preset_grids(self):
        assert [c["rho"] for c in preset("fig3").cells] == [0.05, 0.1, 0.2, 0.5, 1.0]
        fig1 = preset("fig1")
        assert len(fig1.cells) == 12
        assert {c["option"] for c in fig1.cells} == {"O1", "O4"}
        assert {c["rho"] for c in fig1.cells if c["option"] == "O4"} == {0.2}
        assert {c["option"] for c in preset("fig2").cells} == {"O1A", "O4A"}
        assert preset("fig1").horizon == 200_000 and preset("fig2").horizon == 500_000
        with pytest.raises(ValueError):
            preset("fig4")


class TestRunner:
    def test_outputs_and_manifest(self, tmp_path):
        manifest = run_experiment(config_from_dict(SMALL), out_dir=tmp_path)
        out = tmp_path / "small"
        runs = manifest["runs"]
        assert len(runs) == 8
        listed = {r["csv"] for r in runs}
        on_disk = {p.name for p in out.glob("c*.csv")}
        assert listed == on_disk
        for r in runs:
            assert r["seed"] == derive_seed(3, r["cell"], r["repetition"])
            assert r["status"] == "completed" and len(r["config_hash"]) == 16
            assert (out / r["sidecar"]).exists()
        saved = json.loads((out / MANIFEST_NAME).read_text())
        assert "seed_derivation" in saved and saved["j_star"] == manifest["j_star"]

    def test_deterministic(self, tmp_path):
        cfg = config_from_dict(SMALL)
        run_experiment(cfg, out_dir=tmp_path / "a")
        run_experiment(cfg, out_dir=tmp_path / "b")
        for p in (tmp_path / "a" / "small").glob("c*.csv"):
            assert p.read_bytes() == (tmp_path / "b" / "small" / p.name).read_bytes()

    def test_distinct_seeds_change_traces(self, tmp_path):
        m = run_experiment(config_from_dict(SMALL), out_dir=tmp_path)
        a = (tmp_path / "small" / "c000-r00.csv").read_bytes()
        b = (tmp_path / "small" / "c000-r01.csv").read_bytes()
        assert a != b and m["runs"][0]["seed"] != m["runs"][1]["seed"]

    def test_empty_grid(self, tmp_path):
        m = run_experiment(config_from_dict({"name": "e", "objective.name": "example21"}),
                           out_dir=tmp_path)
        assert m["runs"] == []
        assert (tmp_path / "e" / MANIFEST_NAME).exists()

    def test_refusal_before_any_run(self, tmp_path):
        cfg = config_from_dict({**SMALL, "schedule.p": 0.4})
        with pytest.raises(ConditionRefused) as info:
            run_experiment(cfg, out_dir=tmp_path)
        assert any("Robbins-Monro" in v for v in info.value.violated)
        assert not list((tmp_path / "small").glob("*.csv"))
        cfg.override_conditions = True
        assert len(run_experiment(cfg, out_dir=tmp_path)["runs"]) == 8

    @pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
    def test_unwritable_output(self, tmp_path):
        locked = tmp_path / "locked"
        locked.mkdir()
        locked.chmod(0o500)
        with pytest.raises(OSError):
            run_experiment(config_from_dict(SMALL), out_dir=locked)

    def test_output_is_a_file(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OSError):
            run_experiment(config_from_dict(SMALL), out_dir=blocker)

    def test_parallel_matches_serial(self, tmp_path):
        cfg = config_from_dict({**SMALL, "repetitions": 1})
        run_experiment(cfg, out_dir=tmp_path / "s")
        cfg.workers = 2
        run_experiment(cfg, out_dir=tmp_path / "p")
        for p in (tmp_path / "s" / "small").glob("c*.csv"):
            assert p.read_bytes() == (tmp_path / "p" / "small" / p.name).read_bytes()

    def test_env_default_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BATCHGRAD_OUT", str(tmp_path / "env"))
        m = run_experiment(config_from_dict({**SMALL, "repetitions": 1}))
        assert m["directory"].startswith(str(tmp_path / "env"))


class TestFigureData:
    def test_long_table(self, tmp_path):
        manifest = run_experiment(config_from_dict(SMALL), out_dir=tmp_path)
        path = emit_figure_data(manifest, "small")
        lines = path.read_text().splitlines()
        assert lines[0] == "run_id,label,t,J_gap"
        assert len(lines) == 1 + 8 * 5
        gaps = np.array([float(x.split(",")[3]) for x in lines[1:]])
        assert np.all(gaps >= 0)
        assert series_count(path) == 4
        assert (path.parent / "plot_small.py").exists()

    def test_single_run_single_series(self, tmp_path):
        cfg = config_from_dict({**SMALL, "algorithm": "batch_update", "direction.option": "O1",
                                "repetitions": 1})
        path = emit_figure_data(run_experiment(cfg, out_dir=tmp_path))
        assert series_count(path) == 1

    def test_missing_traces_listed(self, tmp_path):
        manifest = run_experiment(config_from_dict(SMALL), out_dir=tmp_path)
        (tmp_path / "small" / "c001-r00.csv").unlink()
        (tmp_path / "small" / "c003-r01.csv").unlink()
        with pytest.raises(MissingTracesError) as info:
            emit_figure_data(load_manifest(tmp_path / "small"))
        assert info.value.run_ids == ["c001-r00", "c003-r01"]
        assert manifest["runs"]

    def test_fig3_preset_shape(self, tmp_path):
        cfg = preset("fig3", repetitions=1)
        cfg.horizon = 300
        cfg.record_every = 100
        manifest = run_experiment(cfg, out_dir=tmp_path)
        assert len(list((tmp_path / "fig3-desk").glob("c*.csv"))) == 5
        assert series_count(emit_figure_data(manifest)) == 5


class TestCli:
    def test_verify_schedule(self, capsys):
        assert cli.main(["verify-schedule", "p=1", "q=0.02"]) == 0
        assert capsys.readouterr().out.strip() == "RM: holds, Blum: holds"
        assert cli.main(["verify-schedule", "p=1", "q=0.6", "--json"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("RM: holds, Blum: fails")
        assert json.loads(out.split("\n", 1)[1])["blum"] == "fails"

    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(["frobnicate"])
        assert info.value.code == 2
        assert "usage" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        assert cli.main(["run", str(tmp_path / "missing.json")]) == 1
        assert "missing.json" in capsys.readouterr().err

    def test_refusal_exit_code(self, tmp_path):
        cfg = write_config(tmp_path / "bad.json", {**SMALL, "schedule.p": 0.4})
        assert cli.main(["run", str(cfg), "--out", str(tmp_path)]) == 2
        assert cli.main(["run", str(cfg), "--out", str(tmp_path), "--override-conditions",
                         "--repetitions", "1"]) == 0

    def test_bad_json_is_config_error(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text("{not json")
        assert cli.main(["run", str(p)]) == 2

    def test_run_with_flags(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", SMALL)
        assert cli.main(["run", str(cfg), "--out", str(tmp_path), "--seed", "9",
                         "--repetitions", "1", "--merge"]) == 0
        manifest = load_manifest(tmp_path / "small")
        assert manifest["master_seed"] == 9 and len(manifest["runs"]) == 4
        assert (tmp_path / "small" / "small_data.csv").exists()

    def test_run_determinism_via_cli(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", SMALL)
        for sub in ("a", "b"):
            assert cli.main(["run", str(cfg), "--out", str(tmp_path / sub)]) == 0
        for p in (tmp_path / "a" / "small").glob("c*.csv"):
            assert p.read_bytes() == (tmp_path / "b" / "small" / p.name).read_bytes()

    def test_oracle(self, capsys):
        assert cli.main(["oracle", "strongly_convex_quadratic:d=3,c_lo=1,c_hi=2,seed=0"]) == 0
        assert abs(float(capsys.readouterr().out)) < 1e-18
        assert cli.main(["oracle", "nonsense:d=3"]) == 2

    def test_diagnose(self, tmp_path):
        out = tmp_path / "d.json"
        assert cli.main(["diagnose", "O4:rho=0.5,d=6,samples=10000,points=2",
                         "--json-out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["passed"] and len(report["entries"]) == 2
        assert report["predicted_sigma_sq"] == 1.0

    def test_diagnose_rs(self, tmp_path):
        out = tmp_path / "rs.json"
        assert cli.main(["diagnose", "rs:contracting,T=1000,paths=1000",
                         "--json-out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["guard"]["passed"] and report["conclusions"]["passed"]

    def test_diagnose_bad_spec(self):
        assert cli.main(["diagnose", "O9"]) == 2
        assert cli.main(["diagnose", "O4:rho=0.5,colour=red"]) == 2

    def test_figure_subcommand(self, tmp_path, capsys):
        assert cli.main(["figure", "fig3", "--scale", "desk", "--horizon", "200",
                         "--repetitions", "1", "--out", str(tmp_path)]) == 0
        assert "5 traces" in capsys.readouterr().out
        assert series_count(tmp_path / "fig3-desk" / "fig3_data.csv") == 5
