import json
import os

import numpy as np
import pytest

from equisym import checks as checks_mod
from equisym import cli
from equisym.checks import CheckResult
from equisym.groups import orthogonal_group


FAST = ["--steps", "5", "--hidden", "8", "--batch-size", "16",
        "--n-mc-eval", "2", "--n-test", "8"]


class TestConfigParsing:
    def test_file_roundtrip(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# benchmark settings\n"
            "variant = sym_haar\n"
            "d = 3\n"
            "lr = 0.001  # small\n"
            "\n"
        )
        values = cli.parse_config_file(str(cfg))
        assert values == {"variant": "sym_haar", "d": 3, "lr": 0.001}

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("colour = blue\n")
        with pytest.raises(cli.UsageError):
            cli.parse_config_file(str(cfg))

    def test_malformed_line_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("just some words\n")
        with pytest.raises(cli.UsageError):
            cli.parse_config_file(str(cfg))

    def test_unknown_variant_rejected(self):
        with pytest.raises(cli.UsageError):
            cli.coerce_config({"variant": "mystery"})

    def test_flags_override_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed = 1\nd = 3\n")
        parser = cli.build_parser()
        args = parser.parse_args(["train", "--config", str(cfg), "--seed", "9"])
        config = cli.build_config(args)
        assert config.seed == 9
        assert config.d == 3

    def test_missing_config_file(self):
        parser = cli.build_parser()
        args = parser.parse_args(["train", "--config", "/nonexistent.cfg"])
        with pytest.raises(cli.UsageError):
            cli.build_config(args)


class TestExitCodes:
    def test_usage_error_is_2(self, capsys):
        assert cli.main(["train", "--config", "/nonexistent.cfg"]) == 2

    def test_argparse_error_is_2(self, capsys):
        assert cli.main(["check", "not-a-suite"]) == 2
        assert cli.main([]) == 2

    def test_failing_suite_is_1(self, monkeypatch, capsys):
        broken = orthogonal_group(2)
        broken.mul = lambda g, h: g @ h + 1e-3  # violates associativity/unit
        monkeypatch.setitem(
            checks_mod.SUITES, "groups",
            lambda: checks_mod.check_groups({"broken O(2)": broken},
                                            n_samples=10))
        assert cli.main(["check", "groups"]) == 1
        out = capsys.readouterr().out
        assert "[FAIL]" in out

    def test_passing_suite_is_0(self, monkeypatch, capsys):
        monkeypatch.setitem(
            checks_mod.SUITES, "groups",
            lambda: [CheckResult("stub", True, 0.0)])
        assert cli.main(["check", "groups"]) == 0
        out = capsys.readouterr().out
        assert "[PASS] stub" in out
        assert "1/1 checks passed" in out


class TestCheckCommand:
    def test_cosets_suite_passes(self, monkeypatch, capsys):
        monkeypatch.setitem(
            checks_mod.SUITES, "cosets",
            lambda: checks_mod.check_cosets(n_samples=50))
        assert cli.main(["check", "cosets"]) == 0
        out = capsys.readouterr().out
        assert out.count("[PASS]") == 7


class TestTrainCommand:
    def test_writes_artifacts(self, tmp_path, capsys):
        rc = cli.main(["train", "--variant", "sym_haar", "--seed", "2",
                       "--out", str(tmp_path)] + FAST)
        assert rc == 0
        tag = "sym_haar_d2_seed2"
        history = (tmp_path / f"history_{tag}.csv").read_text().splitlines()
        assert history[0] == "step,objective"
        assert len(history) == 1 + 5  # header + one row per step
        summary = json.loads((tmp_path / f"summary_{tag}.json").read_text())
        assert summary["variant"] == "sym_haar"
        assert summary["equiv_gap"] <= 1e-6
        from equisym import nn

        params = nn.load_params(str(tmp_path / f"params_{tag}.txt"))
        assert all(np.all(np.isfinite(p)) for p in params)

    def test_repeat_run_identical_history(self, tmp_path, capsys):
        args = ["train", "--variant", "plain_mlp", "--seed", "4"] + FAST
        cli.main(args + ["--out", str(tmp_path / "a")])
        cli.main(args + ["--out", str(tmp_path / "b")])
        ha = (tmp_path / "a" / "history_plain_mlp_d2_seed4.csv").read_text()
        hb = (tmp_path / "b" / "history_plain_mlp_d2_seed4.csv").read_text()
        assert ha == hb

    def test_outdir_from_environment(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("EQUISYM_OUT", str(tmp_path / "envout"))
        rc = cli.main(["train", "--variant", "plain_mlp", "--seed", "0"] + FAST)
        assert rc == 0
        assert (tmp_path / "envout" / "summary_plain_mlp_d2_seed0.json").exists()


class TestSweepCommand:
    def test_grid_and_summary(self, tmp_path, capsys):
        rc = cli.main(["sweep", "--variants", "plain_mlp,sym_haar",
                       "--dims", "2", "--seeds", "0,1",
                       "--summary", "--out", str(tmp_path)] + FAST)
        assert rc == 0
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0] == "variant,d,seed,final_loss,equiv_gap,status"
        assert len(lines) == 1 + 4
        assert all(line.endswith(",ok") for line in lines[1:])
        out = capsys.readouterr().out
        assert "median plain_mlp d=2:" in out
        assert "median sym_haar d=2:" in out

    def test_unknown_variant_rejected(self, tmp_path, capsys):
        rc = cli.main(["sweep", "--variants", "mystery",
                       "--out", str(tmp_path)] + FAST)
        assert rc == 2

    def test_empty_grid_rejected(self, tmp_path, capsys):
        rc = cli.main(["sweep", "--variants", "", "--out", str(tmp_path)] + FAST)
        assert rc == 2
