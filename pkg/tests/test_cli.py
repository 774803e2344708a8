import json
import subprocess
import sys

import pytest

from gpts.cli import ExperimentConfig, cmd_simulate, main
from gpts.errors import ParameterError
from gpts.kernels import enumerate_paths


def run_cli(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


class TestConfig:
    def test_nested_kernel_and_overrides(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"kernel": {"kind": "gaussian", "B": 3, "D": 2, "s": 2.0}, "T": 7}))
        cfg = ExperimentConfig.from_sources(str(p), {"T": 11, "seed": None})
        assert (cfg.kind, cfg.B, cfg.D, cfg.s, cfg.T, cfg.seed) == ("gaussian", 3, 2, 2.0, 11, 0)

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"bogus": 1}))
        with pytest.raises(ParameterError):
            ExperimentConfig.from_sources(str(p), {})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParameterError):
            ExperimentConfig.from_sources(str(tmp_path / "nope.json"), {})

    def test_noise_var(self):
        assert ExperimentConfig(noise_std=0.1).noise_var == pytest.approx(0.01)


class TestSpectrum:
    def test_linear_small(self, capsys):
        code, out, _ = run_cli(["spectrum", "--kind", "linear", "--B", "2", "--D", "2"], capsys)
        assert code == 0
        distinct = json.loads(out)["spectrum"]["distinct"]
        pairs = [(round(d["value"], 12), d["multiplicity"]) for d in distinct]
        assert pairs == [(round(1 / 3, 12), 2), (1.0, 1), (round(7 / 3, 12), 1)]

    def test_gram_file(self, tmp_path, capsys):
        code, _, _ = run_cli(["spectrum", "--B", "2", "--D", "2", "--gram", "--out", str(tmp_path)], capsys)
        assert code == 0
        rows = (tmp_path / "gram.csv").read_bytes().decode("utf-8").split("\r\n")
        assert len(rows) == 5 and rows[0].split(",")[0] == "1.0"
        assert (tmp_path / "spectrum.json").exists()

    def test_regime_error_exit_code(self, capsys):
        code, _, err = run_cli(["bounds", "--kind", "gaussian", "--B", "2", "--D", "2", "--s", "0.5"], capsys)
        assert code == 3 and "RegimeError" in err

    def test_missing_parameter(self, capsys):
        code, _, _ = run_cli(["spectrum", "--kind", "gaussian"], capsys)
        assert code == 2


class TestBounds:
    def test_zero_infogain(self, capsys):
        code, out, _ = run_cli(["bounds", "--kind", "linear", "--B", "2", "--D", "3", "--T", "10",
                                "--noise", "1", "--I-u", "0"], capsys)
        assert code == 0 and json.loads(out)["regret_bound"] == 0.0

    def test_noise_free_rejected(self, capsys):
        code, _, _ = run_cli(["bounds", "--noise", "0"], capsys)
        assert code == 2


class TestPlan:
    def test_bundled_chain(self, tmp_path, capsys):
        code, out, _ = run_cli(["plan", "--T", "32", "--noise", "0.05", "--out", str(tmp_path)], capsys)
        assert code == 0
        rep = json.loads(out)
        assert "simple_regret" in rep and rep["simple_regret"] >= 0
        assert rep["horizon"] == 5
        assert (tmp_path / "trace.csv").read_text(encoding="utf-8").startswith("# gpts-trace v1")

    def test_bad_mdp_file(self, tmp_path, capsys):
        p = tmp_path / "m.json"
        p.write_text(json.dumps({"gamma": 2.0, "states": ["a"], "actions": {"a": []}}))
        code, _, err = run_cli(["plan", "--mdp", str(p), "--T", "4"], capsys)
        assert code == 5 and "MDPError" in err


class TestSimulate:
    def test_outputs(self, tmp_path, capsys):
        code, out, _ = run_cli(["simulate", "--B", "2", "--D", "3", "--T", "20", "--replications", "2",
                                "--checkpoints", "5", "20", "--out", str(tmp_path)], capsys)
        assert code == 0
        assert json.loads(out)["any_violation"] is False
        summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
        assert len(summary["replications"]) == 2
        assert set(summary["checkpoints"]) == {"5", "20"}
        assert (tmp_path / "trace_rep000.csv").exists() and (tmp_path / "trace_rep001.csv").exists()

    def test_noise_free_plays_each_arm_once(self):
        cfg = ExperimentConfig(kind="linear", B=2, D=4, noise_std=0.0, T=16, seed=9)
        rep = cmd_simulate(cfg)["replications"][0]
        assert rep["T"] == 16 and rep["distinct_arms"] == 16
        assert rep["simple_regret"] == 0.0

    def test_noise_free_exhausts(self):
        cfg = ExperimentConfig(kind="linear", B=2, D=2, noise_std=0.0, T=10)
        rep = cmd_simulate(cfg)["replications"][0]
        assert rep["exhausted"] and rep["T"] == len(list(enumerate_paths(2, 2)))

    def test_too_large(self, capsys):
        code, _, _ = run_cli(["simulate", "--B", "2", "--D", "13", "--T", "1"], capsys)
        assert code == 2

    def test_bad_replications(self, capsys):
        code, _, _ = run_cli(["simulate", "--replications", "0"], capsys)
        assert code == 2


class TestReproducibility:
    @pytest.mark.parametrize("args", [
        ["simulate", "--kind", "gaussian", "--s", "2", "--B", "2", "--D", "3", "--T", "25",
         "--replications", "2", "--seed", "3"],
        ["plan", "--T", "40", "--seed", "4", "--obs-noise", "0.1"],
        ["spectrum", "--kind", "mdp", "--gamma", "0.7", "--B", "3", "--D", "2", "--gram"],
        ["bounds", "--kind", "gaussian", "--s", "1.5", "--T", "30", "--I-u", "2.5"],
    ])
    def test_byte_identical(self, args, tmp_path, capsys):
        for name in ("a", "b"):
            assert main(args + ["--out", str(tmp_path / name)]) == 0
        capsys.readouterr()
        files = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert files
        for name in files:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gpts", "spectrum", "--B", "2", "--D", "1"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["spectrum"]["B"] == 2
