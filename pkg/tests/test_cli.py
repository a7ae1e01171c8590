import json

import pytest

from beaconopt.cli import main


def _run(argv):
    return main(argv)


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    code = _run(
        [
            "generate", "--n", "8", "--m", "10", "--extent", "150", "120",
            "--budget", "3", "--cutoff", "100", "--seed", "5", "--out", str(path),
        ]
    )
    assert code == 0
    return path


class TestGenerate:
    def test_writes_valid_scenario(self, scenario_file):
        data = json.loads(scenario_file.read_text())
        assert data["budget"] == 3
        assert len(data["positions"]) == 8
        assert len(data["candidates"]) == 10


class TestSelectAndLocalize:
    @pytest.mark.parametrize(
        "algorithm",
        ["greedy", "brute_force", "measurement_greedy", "coverage_greedy", "random"],
    )
    def test_select_emits_result_json(self, scenario_file, tmp_path, algorithm):
        out = tmp_path / f"{algorithm}.json"
        code = _run(
            [
                "select", str(scenario_file), "--algorithm", algorithm,
                "--seed", "3", "--out", str(out),
            ]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["algorithm"] == algorithm
        assert len(payload["selected"]) == 3
        assert "wall_time_s" in payload and "evaluations" in payload

    def test_cmaes_select(self, scenario_file, tmp_path):
        out = tmp_path / "cmaes.json"
        code = _run(
            [
                "select", str(scenario_file), "--algorithm", "cmaes", "--seed", "3",
                "--es-max-evaluations", "200", "--out", str(out),
            ]
        )
        assert code == 0
        assert len(json.loads(out.read_text())["selected"]) == 3

    def test_localize_roundtrip(self, scenario_file, tmp_path):
        sel = tmp_path / "sel.json"
        _run(["select", str(scenario_file), "--seed", "3", "--out", str(sel)])
        out = tmp_path / "loc.json"
        code = _run(
            ["localize", str(scenario_file), str(sel), "--seed", "3", "--out", str(out)]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert len(payload["estimates"]) == 8
        assert payload["rmse_m"] >= 0.0

    def test_k_override(self, scenario_file, tmp_path):
        out = tmp_path / "k4.json"
        _run(["select", str(scenario_file), "--k", "4", "--seed", "1", "--out", str(out)])
        assert len(json.loads(out.read_text())["selected"]) == 4


class TestExperiment:
    def test_experiment_writes_outputs_and_reruns_identically(self, tmp_path):
        config = {
            "base": {"n": 5, "m": 7, "extent": [100, 80], "budget": 2, "cutoff": 70.0},
            "sweep": [{"name": "baseline"}],
            "trials": 2,
            "algorithms": ["random", "greedy"],
            "master_seed": 4,
        }
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps(config))
        args = [
            "experiment", "--config", str(cfg), "--deterministic-timing", "--no-resume",
        ]
        assert _run(args + ["--out-dir", str(tmp_path / "a")]) == 0
        assert _run(args + ["--out-dir", str(tmp_path / "b")]) == 0
        assert (tmp_path / "a/records.csv").read_bytes() == (
            tmp_path / "b/records.csv"
        ).read_bytes()
        assert (tmp_path / "a/summary.json").exists()

    def test_partial_failure_exit_code(self, tmp_path):
        config = {
            "base": {"n": 4, "m": 12, "extent": [100, 80], "budget": 6},
            "trials": 1,
            "algorithms": ["brute_force"],
            "brute_force_cap": 1,
            "master_seed": 1,
        }
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps(config))
        code = _run(
            ["experiment", "--config", str(cfg), "--out-dir", str(tmp_path / "out")]
        )
        assert code == 3

    def test_config_error_exit_code(self, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"trials": 0}))
        code = _run(
            ["experiment", "--config", str(cfg), "--out-dir", str(tmp_path / "out")]
        )
        assert code == 2

    def test_missing_scenario_exit_code(self, tmp_path):
        assert _run(["select", str(tmp_path / "nope.json")]) == 2


class TestCertify:
    def test_small_certification(self, tmp_path):
        out = tmp_path / "cert.json"
        code = _run(
            [
                "certify", "--n", "4", "--m", "8", "--k-max", "3",
                "--instances", "3", "--seed", "1", "--out", str(out),
            ]
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["bound_holds_all"] is True
        assert report["cases"] == 9
        assert 0.0 < report["min_ratio"] <= 1.0
