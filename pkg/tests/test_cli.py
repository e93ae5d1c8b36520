"""CLI tests: commands, exit codes, and written files."""

import json
import os

import pytest

from socopredict.cli import main, parse_int_list, parse_u_grid
from socopredict.errors import ConfigError


def write_config(tmp_path, **overrides):
    data = {
        "spec": {"K": [[1.0]], "beta": 1.0, "T": 10},
        "impulse": {"kind": "explicit", "taps": [[[1.0]], [[0.5]]]},
        "noise": {"family": "uniform-bounded", "epsilon": 1.0},
        "y_hat": {"kind": "sinusoid", "amplitude": 1.0, "period": 5.0},
        "algorithms": [{"name": "AFHC", "w": 2}, {"name": "OPT"}, {"name": "STA"}],
        "samples": 4,
        "seed": 3,
        "output": str(tmp_path / "out" / "run"),
    }
    data.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return str(path)


class TestArguments:
    """Command and option parsing."""

    def test_help(self, capsys):
        assert main(["help"]) == 0
        assert "sweep-window" in capsys.readouterr().out

    def test_unknown_command(self, capsys):
        assert main(["simulate"]) == 1
        assert "Unknown command" in capsys.readouterr().err

    def test_unknown_option(self, tmp_path, capsys):
        assert main(["bounds", "--config", write_config(tmp_path), "--sample", "3"]) == 1
        assert "Did you mean '--samples'?" in capsys.readouterr().err

    def test_missing_value(self, capsys):
        assert main(["bounds", "--config"]) == 1

    def test_missing_config(self, capsys):
        assert main(["bounds"]) == 1
        assert "--config" in capsys.readouterr().err

    def test_parse_int_list(self):
        assert parse_int_list("0,1,2,4,8") == [0, 1, 2, 4, 8]
        with pytest.raises(ConfigError):
            parse_int_list("0,x")

    def test_parse_u_grid(self):
        assert parse_u_grid("0:50:5") == [5.0 * i for i in range(11)]
        assert parse_u_grid("2:2:1") == [2.0]
        with pytest.raises(ConfigError):
            parse_u_grid("0:10")
        with pytest.raises(ConfigError):
            parse_u_grid("0:10:0")


class TestCommands:
    """Each command end to end on a temporary config."""

    def test_bounds(self, tmp_path, capsys):
        assert main(["bounds", "--config", write_config(tmp_path)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert set(out) == {"w=2"}
        assert out["w=2"]["epsilon"] == 1.0

    def test_bounds_for_window(self, tmp_path, capsys):
        assert main(["bounds", "--config", write_config(tmp_path), "--w", "4"]) == 0
        assert json.loads(capsys.readouterr().out)["w"] == 4

    def test_bounds_window_out_of_range(self, tmp_path):
        assert main(["bounds", "--config", write_config(tmp_path), "--w", "10"]) == 1

    def test_run_writes_outputs(self, tmp_path, capsys):
        assert main(["run", "--config", write_config(tmp_path)]) == 0
        prefix = tmp_path / "out" / "run"
        for suffix in ("samples.csv", "summary.json", "config.json", "aborted.csv"):
            assert os.path.exists(f"{prefix}.{suffix}")
        assert json.loads(capsys.readouterr().out)["completed"] == 4

    def test_output_override(self, tmp_path):
        prefix = str(tmp_path / "elsewhere")
        assert main(["run", "--config", write_config(tmp_path), "--output", prefix]) == 0
        assert os.path.exists(prefix + ".samples.csv")

    def test_montecarlo(self, tmp_path, capsys):
        assert main(["montecarlo", "--config", write_config(tmp_path), "--samples", "2"]) == 0
        assert json.loads(capsys.readouterr().out)["samples"] == 2

    def test_montecarlo_needs_samples(self, tmp_path):
        assert main(["montecarlo", "--config", write_config(tmp_path)]) == 1

    def test_sweep(self, tmp_path):
        assert main(["sweep-window", "--config", write_config(tmp_path), "--w", "0,1,2"]) == 0
        with open(tmp_path / "out" / "run.sweep.csv") as f:
            assert len(f.read().splitlines()) == 4

    def test_tail(self, tmp_path):
        assert main(["tail", "--config", write_config(tmp_path), "--u-grid", "0:20:5"]) == 0
        with open(tmp_path / "out" / "run.tail.csv") as f:
            assert len(f.read().splitlines()) == 6

    def test_tail_needs_bounded_noise(self, tmp_path):
        path = write_config(tmp_path, noise={"family": "gaussian", "R_e": 1.0})
        assert main(["tail", "--config", path, "--u-grid", "0:20:5"]) == 1

    def test_realize(self, tmp_path, capsys):
        assert main(["realize", "--config", write_config(tmp_path), "--seed", "9"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["seed"] == 9
        assert len(out["y"]) == 10

    def test_invalid_config(self, tmp_path, capsys):
        path = write_config(tmp_path, noise={"family": "gausian", "R_e": 1.0})
        assert main(["run", "--config", path]) == 1
        assert "noise.family" in capsys.readouterr().err

    def test_check_passes(self, tmp_path, monkeypatch):
        monkeypatch.setattr("socopredict.harness.acceptance_checks", lambda result: [])
        assert main(["run", "--config", write_config(tmp_path), "--check"]) == 0

    def test_check_failure_exit_code(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr("socopredict.harness.acceptance_checks",
                            lambda result: ["AFHC[w=2]: mean g2 off"])
        assert main(["run", "--config", write_config(tmp_path), "--check"]) == 2
        assert "FAIL: AFHC[w=2]: mean g2 off" in capsys.readouterr().err
