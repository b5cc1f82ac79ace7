from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from ldpchain import main as cli
from ldpchain.config import settings

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

RATE_CONFIG = {
    "task": "estimate-rate",
    "seed": 11,
    "model": {"name": "iid"},
    "params": {
        "target": {"kind": "density", "boxes": [[[0.0], [1.0]]], "proxy_cells": 8},
        "deltas": [0.2, 0.5],
        "ns": [4, 8],
        "samples": 600,
    },
}


def _write(path: Path, doc: dict) -> str:
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def _rows(path: Path) -> list[dict[str, str]]:
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def small_chunks(monkeypatch):
    monkeypatch.setattr(settings, "ldp_chunk_size", 100)


class TestRun:
    def test_classes(self, tmp_path):
        code = cli.main(["classes", "--config", str(CONFIGS / "classes.json"), "--out", str(tmp_path)])
        assert code == cli.EXIT_OK
        rows = _rows(tmp_path / "classes.csv")
        assert len(rows) == 2
        summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
        assert summary["result"]["classes"]["order"] == ["2⤳1"]
        assert summary["seed"] == 7
        assert summary["version"].startswith("v")

    def test_simulate_overrides(self, tmp_path):
        code = cli.main(["simulate", "--config", str(CONFIGS / "simulate.json"), "--seed", "3", "--out", str(tmp_path)])
        assert code == cli.EXIT_OK
        assert len(_rows(tmp_path / "simulate.csv")) == 5 * 30
        assert json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))["seed"] == 3

    def test_reruns_are_byte_identical(self, tmp_path, small_chunks):
        config = _write(tmp_path / "rate.json", RATE_CONFIG)
        outputs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert cli.main(["estimate-rate", "--config", config, "--out", str(out)]) == cli.EXIT_OK
            outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.suffix != ".json"})
            summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
            summary["config"].pop("output_dir")
            outputs[-1]["summary"] = summary
        assert outputs[0] == outputs[1]
        assert "estimate-rate.svg" in outputs[0] or not settings.ldp_plots

    def test_worker_count_does_not_change_results(self, tmp_path, small_chunks):
        config = _write(tmp_path / "rate.json", RATE_CONFIG)
        csvs = []
        for workers in ("1", "4"):
            out = tmp_path / f"w{workers}"
            assert cli.main(["estimate-rate", "--config", config, "--workers", workers, "--out", str(out)]) == cli.EXIT_OK
            csvs.append((out / "estimate-rate.csv").read_bytes())
        assert csvs[0] == csvs[1]

    @pytest.mark.slow
    def test_canned_inequalities_pass_across_seeds(self, tmp_path):
        doc = json.loads((CONFIGS / "verify-inequalities.json").read_text(encoding="utf-8"))
        doc["params"]["samples"] = 5000
        config = _write(tmp_path / "ineq.json", doc)
        for seed in range(20):
            out = tmp_path / f"s{seed}"
            code = cli.main(["verify-inequalities", "--config", config, "--seed", str(seed), "--out", str(out)])
            assert code == cli.EXIT_OK, seed
            checks = json.loads((out / "summary.json").read_text(encoding="utf-8"))["result"]["checks"]
            assert [c["check"] for c in checks] == ["coupling", "supermultiplicative", "decoupling"]
            assert all(c["verdict"] == "PASS" for c in checks), (seed, checks)

    def test_failed_sweep_exit_code(self, tmp_path, monkeypatch):
        from ldpchain.models import SweepReport

        def broken(kind, instances, seed, **kwargs):
            return SweepReport(kind=kind, instances=instances, checked=1, violations=1)

        monkeypatch.setattr(cli.maps_service, "geographic_sweep", broken)
        config = _write(tmp_path / "maps.json", {"task": "verify-maps", "seed": 0, "params": {"kinds": ["slicing"], "instances": 1}})
        assert cli.main(["verify-maps", "--config", config, "--out", str(tmp_path / "out")]) == cli.EXIT_FAIL

    def test_decoupling_uses_the_center_proxy_resolution(self, tmp_path, monkeypatch):
        from ldpchain.models import PASS, InequalityReport

        seen = {}

        def capture(*args, **kwargs):
            seen.update(kwargs)
            return InequalityReport("decoupling", 0.0, (0.0, 0.0), 0.0, (0.0, 0.0), 0.0, PASS)

        monkeypatch.setattr(cli.estimator_service, "verify_decoupling_probability", capture)
        doc = json.loads((CONFIGS / "verify-inequalities.json").read_text(encoding="utf-8"))
        params = doc["params"]
        params.pop("coupling")
        params.pop("supermultiplicative")
        params["decoupling"]["center1"]["proxy_cells"] = 12
        config = _write(tmp_path / "ineq.json", doc)
        assert cli.main(["verify-inequalities", "--config", config, "--out", str(tmp_path / "out")]) == cli.EXIT_OK
        assert seen["proxy_cells"] == 12

    def test_failed_escape_check_still_exits_ok(self, tmp_path, monkeypatch):
        from ldpchain.models import ProbeReport

        def failing(*args, **kwargs):
            return ProbeReport(name="escape", passed=False, rows=[{"n": 5, "estimate": -0.1}])

        monkeypatch.setattr(cli.zoo_service, "escape_decay_probe", failing)
        out = tmp_path / "out"
        code = cli.main(["escape-probe", "--config", str(CONFIGS / "escape-probe.json"), "--out", str(out)])
        assert code == cli.EXIT_OK
        result = json.loads((out / "summary.json").read_text(encoding="utf-8"))["result"]
        assert result["passed"] is False
        assert result["sets_exit_code"] is False


class TestConfigErrors:
    def test_missing_seed(self, tmp_path):
        doc = {k: v for k, v in RATE_CONFIG.items() if k != "seed"}
        assert cli.main(["estimate-rate", "--config", _write(tmp_path / "c.json", doc)]) == cli.EXIT_CONFIG

    def test_unknown_key(self, tmp_path):
        doc = {**RATE_CONFIG, "params": {**RATE_CONFIG["params"], "sample": 10}}
        assert cli.main(["estimate-rate", "--config", _write(tmp_path / "c.json", doc)]) == cli.EXIT_CONFIG

    def test_task_mismatch(self, tmp_path):
        assert cli.main(["classes", "--config", _write(tmp_path / "c.json", RATE_CONFIG)]) == cli.EXIT_CONFIG

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{\"task\": ", encoding="utf-8")
        assert cli.main(["estimate-rate", "--config", str(path)]) == cli.EXIT_CONFIG

    def test_missing_file(self, tmp_path):
        assert cli.main(["estimate-rate", "--config", str(tmp_path / "absent.json")]) == cli.EXIT_CONFIG

    def test_precondition_inside_a_task(self, tmp_path):
        doc = {"task": "classes", "seed": 1, "model": {"name": "iid"}, "params": {"method": "analytic"}}
        out = tmp_path / "out"
        assert cli.main(["classes", "--config", _write(tmp_path / "c.json", doc), "--out", str(out)]) == cli.EXIT_CONFIG


def test_run_configs_collects_exit_codes(tmp_path):
    from scripts.run_configs import run_configs

    configs = tmp_path / "configs"
    configs.mkdir()
    (configs / "classes.json").write_bytes((CONFIGS / "classes.json").read_bytes())
    _write(configs / "broken.json", {"task": "nope", "seed": 0})
    codes = run_configs(configs, tmp_path / "out")
    assert codes == {"broken": cli.EXIT_CONFIG, "classes": cli.EXIT_OK}
    assert (tmp_path / "out" / "classes" / "classes.csv").exists()
    assert json.loads((tmp_path / "out" / "exit_codes.json").read_text(encoding="utf-8")) == codes
