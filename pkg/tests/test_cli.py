import json

import pytest

from pixelgbp.cli import main
from pixelgbp.experiment import ExperimentConfig
from pixelgbp.metrics import read_metric_csv


def tiny_flags(tmp_path, *extra):
    return [
        "--size", "4", "--iterations", "2", "--runs", "1", "--seed", "0",
        "--sigma-p", "1e-2", "--sigma-d", "1e-1", "--sigma-r", "1e-2",
        "--output-dir", str(tmp_path),
        *extra,
    ]


class TestRun:
    def test_smoke(self, tmp_path, capsys):
        code = main(["run", *tiny_flags(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "final_error_median" in out
        csvs = list(tmp_path.glob("metrics_*.csv"))
        assert len(csvs) == 1
        assert len(read_metric_csv(csvs[0])) == 2

    def test_with_centralized(self, tmp_path):
        code = main(["run", *tiny_flags(tmp_path), "--centralized"])
        assert code == 0
        rows = read_metric_csv(next(iter(tmp_path.glob("metrics_*.csv"))))
        assert {r.topology for r in rows} == {"flat", "centralized"}

    def test_config_file_with_override(self, tmp_path, capsys):
        cfg = ExperimentConfig(topology="flat", size=4, sigma_p=1e-2,
                               sigma_d=1e-1, sigma_r=1e-2, iterations=2,
                               runs=1, seed=0, output_dir=str(tmp_path))
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(cfg.to_json())
        code = main(["run", "--config", str(cfg_file), "--iterations", "3"])
        assert code == 0
        rows = read_metric_csv(next(iter(tmp_path.glob("metrics_*.csv"))))
        assert max(r.sweep for r in rows) == 3

    def test_env_var_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PIXELGBP_OUTPUT_DIR", str(tmp_path / "envout"))
        code = main(["run", "--size", "4", "--iterations", "1", "--runs", "1"])
        assert code == 0
        assert list((tmp_path / "envout").glob("metrics_*.csv"))


class TestExitCodes:
    def test_bad_config_value(self, tmp_path, capsys):
        code = main(["run", *tiny_flags(tmp_path), "--sigma-r", "0"])
        assert code == 1
        assert "config error" in capsys.readouterr().err

    def test_sharded_bad_size(self, tmp_path):
        assert main(["run", *tiny_flags(tmp_path),
                     "--topology", "sharded", "--size", "12"]) == 1

    def test_missing_config_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.json")]) == 1

    def test_unknown_flag(self, tmp_path, capsys):
        assert main(["run", "--frobnicate", "1"]) == 1

    def test_no_subcommand(self):
        assert main([]) == 1

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "pixelgbp" in capsys.readouterr().out

    def test_plot_runtime_failure(self, tmp_path, capsys):
        missing = tmp_path / "missing.csv"
        code = main(["plot", str(missing), "--out", str(tmp_path / "o.svg")])
        assert code == 2
        assert "runtime failure" in capsys.readouterr().err


class TestGenerate:
    def test_writes_pairs(self, tmp_path, capsys):
        code = main(["generate", *tiny_flags(tmp_path), "--runs", "2"])
        assert code == 0
        assert (tmp_path / "pair_000_left.png").exists()
        assert (tmp_path / "pair_001_right.png").exists()
        meta = json.loads((tmp_path / "pair_000.json").read_text())
        assert meta["seed"] is not None

    def test_requires_output_dir(self, monkeypatch):
        monkeypatch.delenv("PIXELGBP_OUTPUT_DIR", raising=False)
        assert main(["generate", "--size", "4", "--runs", "1"]) == 1


class TestSweep:
    def test_three_values(self, tmp_path, capsys):
        code = main(["sweep", *tiny_flags(tmp_path),
                     "--param", "sigma_r", "--values", "1e-4,1e-3,1e-2"])
        assert code == 0
        assert len(list(tmp_path.glob("metrics_*.csv"))) == 3
        report = json.loads(capsys.readouterr().out.split("wrote")[0])
        assert len(report) == 3

    def test_unknown_param(self, tmp_path, capsys):
        code = main(["sweep", *tiny_flags(tmp_path),
                     "--param", "bogus", "--values", "1"])
        assert code == 1

    def test_unsweepable_param(self, tmp_path):
        assert main(["sweep", *tiny_flags(tmp_path),
                     "--param", "seed", "--values", "1,2"]) == 1

    def test_int_field_cast(self, tmp_path):
        code = main(["sweep", *tiny_flags(tmp_path),
                     "--param", "iterations", "--values", "1,2"])
        assert code == 0


class TestPlot:
    def test_renders_csv(self, tmp_path):
        assert main(["run", *tiny_flags(tmp_path)]) == 0
        csv = next(iter(tmp_path.glob("metrics_*.csv")))
        out = tmp_path / "curves.svg"
        assert main(["plot", str(csv), "--out", str(out)]) == 0
        assert out.read_text().startswith("<?xml")

    def test_metric_flag(self, tmp_path):
        assert main(["run", *tiny_flags(tmp_path)]) == 0
        csv = next(iter(tmp_path.glob("metrics_*.csv")))
        out = tmp_path / "energy.svg"
        assert main(["plot", str(csv), "--out", str(out),
                     "--metric", "energy"]) == 0
        assert "energy" in out.read_text()
