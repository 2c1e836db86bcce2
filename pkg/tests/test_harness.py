"""Config ingestion, sweeps, report emission, CLI entry points."""

import json
import math
import os

import numpy as np
import pytest

from pqlab import ConfigError, emit_config, load_config, run_sweep
from pqlab.cli import main as cli_main
from pqlab.harness import emit_reports

MINIMAL = """\
[structure]
n = 1
p = 2.0
q = 2.1
alpha = 20.0
beta = 20.0

[domain]
box = 0.0 1.0
T = 0.3
nx = 33
nt = 32
"""

SWEEP_CFG = """\
[structure]
n = 1
p = 2.0
q = 2.1
alpha = 20.0
beta = 20.0
mu = 0.0
eps = 0.25

[domain]
box = 0.0 1.0
T = 0.3
nx = 33
nt = 32

[coefficients]
a_kind = power
a_center = 0.505
a_exponent = 0.04
b_kind = constant
b_value = 1.0

[boundary]
kind = profile
profile = sin
amplitude = 0.8

[sweep]
eps0 = 0.25
levels = 3

[targets]
cylinder1 = 0.5 0.12 0.2

[output]
directory = out
seed = 11
"""


def write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestConfig:
    def test_minimal_parses_with_defaults(self, tmp_path):
        cfg = load_config(write(tmp_path, MINIMAL))
        assert cfg.params.q == 2.1
        assert cfg.g.kind == "zero"
        assert cfg.levels == 4 and cfg.c_cal == 1.0

    def test_missing_required_key_named(self, tmp_path):
        broken = MINIMAL.replace("q = 2.1\n", "")
        with pytest.raises(ConfigError, match="'q'"):
            load_config(write(tmp_path, broken))

    def test_unknown_key_reports_line(self, tmp_path):
        broken = MINIMAL + "\n[solver]\nvelocity = 3\n"
        with pytest.raises(ConfigError, match="line 15.*velocity"):
            load_config(write(tmp_path, broken))

    def test_unknown_section_reports_line(self, tmp_path):
        with pytest.raises(ConfigError, match="line 1"):
            load_config(write(tmp_path, "[warp]\nfactor = 9\n"))

    def test_bad_value_reports_line(self, tmp_path):
        broken = MINIMAL.replace("nx = 33", "nx = thirty")
        with pytest.raises(ConfigError, match="line 11.*nx"):
            load_config(write(tmp_path, broken))

    def test_duplicate_key_rejected(self, tmp_path):
        broken = MINIMAL + "nt = 64\n"
        with pytest.raises(ConfigError, match="duplicate"):
            load_config(write(tmp_path, broken))

    def test_gap_violation_rejected(self, tmp_path):
        broken = MINIMAL.replace("q = 2.1", "q = 2.5")
        from pqlab import ParameterError

        with pytest.raises(ParameterError, match="gap"):
            load_config(write(tmp_path, broken))

    def test_target_outside_domain_rejected(self, tmp_path):
        broken = SWEEP_CFG.replace("cylinder1 = 0.5 0.12 0.2", "cylinder1 = 0.5 0.02 0.2")
        with pytest.raises(ConfigError, match="cylinder1"):
            load_config(write(tmp_path, broken))

    def test_roundtrip_byte_identical(self, tmp_path):
        cfg = load_config(write(tmp_path, SWEEP_CFG))
        p1, p2 = tmp_path / "echo1.cfg", tmp_path / "echo2.cfg"
        emit_config(cfg, p1)
        emit_config(load_config(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_infinite_exponents_roundtrip(self, tmp_path):
        text = MINIMAL.replace("alpha = 20.0", "alpha = inf").replace("beta = 20.0", "beta = inf")
        cfg = load_config(write(tmp_path, text))
        assert math.isinf(cfg.params.alpha)
        p1 = tmp_path / "echo.cfg"
        emit_config(cfg, p1)
        assert math.isinf(load_config(p1).params.alpha)


class TestSweep:
    def test_sweep_report_contents(self, tmp_path):
        cfg = load_config(write(tmp_path, SWEEP_CFG))
        report = run_sweep(cfg)
        assert len(report.levels) == 3
        assert [lv.eps for lv in report.levels] == [0.25, 0.125, 0.0625]
        assert len(report.cauchy) == 2
        assert report.cauchy[1] < report.cauchy[0]
        assert report.i_o == 0
        assert report.all_bounds_pass
        assert report.min_normalized_gap >= -1e-6
        assert report.ess_sup_K > 0

    def test_zero_datum_trivial(self, tmp_path):
        text = SWEEP_CFG.replace("kind = profile", "kind = zero")
        cfg = load_config(write(tmp_path, text))
        report = run_sweep(cfg)
        assert all(np.all(lv.field.values == 0.0) for lv in report.levels)
        assert report.all_bounds_pass
        assert report.cauchy == [0.0, 0.0]

    def test_workers_match_serial(self, tmp_path):
        cfg = load_config(write(tmp_path, SWEEP_CFG))
        r1 = run_sweep(cfg, workers=1)
        r2 = run_sweep(cfg, workers=2)
        for lv1, lv2 in zip(r1.levels, r2.levels):
            assert np.array_equal(lv1.field.values, lv2.field.values)

    def test_emitted_reports_deterministic(self, tmp_path):
        cfg = load_config(write(tmp_path, SWEEP_CFG))
        out1, out2 = tmp_path / "out1", tmp_path / "out2"
        emit_reports(run_sweep(cfg), out1)
        emit_reports(run_sweep(cfg), out2)
        names = sorted(os.listdir(out1))
        assert names == sorted(os.listdir(out2))
        for name in names:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_i_o_matches_thresholds(self, tmp_path):
        cfg = load_config(write(tmp_path, SWEEP_CFG))
        report = run_sweep(cfg)
        expected = None
        for lv in report.levels:
            if all(b.eps <= b.eps_threshold for b in lv.bounds):
                expected = lv.index
                break
        assert report.i_o == expected


class TestCLI:
    def test_derive_json(self, capsys):
        assert cli_main(["derive", "--n", "2", "--p", "2", "--q", "2.1",
                         "--alpha", "20", "--beta", "20"]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["gap"]["ok"]
        assert record["exponents"]["kappa"] == pytest.approx(109.0 / 189.0, abs=1e-13)

    def test_derive_gap_failure_exit_code(self, capsys):
        assert cli_main(["derive", "--n", "2", "--p", "2", "--q", "2.5"]) == 3
        record = json.loads(capsys.readouterr().out)
        assert not record["gap"]["ok"]

    def test_derive_bad_params_exit_code(self, capsys):
        assert cli_main(["derive", "--n", "2", "--p", "1.0", "--q", "2.0"]) == 3

    @pytest.mark.parametrize("case", ["mollify", "interp", "geom", "absorb"])
    def test_lemma_verdicts(self, case, capsys):
        assert cli_main(["lemma", case]) == 0
        verdicts = json.loads(capsys.readouterr().out)
        assert all(v["pass"] for v in verdicts)

    def test_bad_config_exit_code(self, tmp_path, capsys):
        path = write(tmp_path, "[nope]\n")
        assert cli_main(["solve", "--config", str(path), "--out", str(tmp_path / "x")]) == 3

    def test_solve_and_verify_bound(self, tmp_path, capsys):
        path = write(tmp_path, SWEEP_CFG)
        prefix = str(tmp_path / "run")
        assert cli_main(["solve", "--config", str(path), "--out", prefix]) == 0
        assert os.path.exists(prefix + ".pqf")
        assert os.path.exists(prefix + "_manifest.json")
        assert os.path.exists(prefix + "_energy.json")
        out_csv = str(tmp_path / "bounds.csv")
        assert cli_main(["verify-bound", "--config", str(path), "--out", out_csv]) == 0
        header = open(out_csv).readline().strip().split(",")
        assert header == ["i", "center_x", "center_t", "rho", "sigma", "ess_sup",
                          "k_choice", "k_theorem", "margin", "eps", "eps_threshold", "pass"]

    def test_sweep_cli(self, tmp_path, capsys):
        path = write(tmp_path, SWEEP_CFG)
        out = str(tmp_path / "sweepout")
        assert cli_main(["sweep", "--config", str(path), "--out", out, "--seed", "5"]) == 0
        manifest = json.load(open(os.path.join(out, "manifest.json")))
        assert manifest["seed"] == 5
        assert manifest["all_bounds_pass"]
        for name in ("bounds.csv", "energy.csv", "varsol.csv", "cauchy.csv",
                     "u_final.pqf", "config.txt"):
            assert os.path.exists(os.path.join(out, name))

    def test_check_subcommands(self, tmp_path, capsys):
        path = write(tmp_path, SWEEP_CFG)
        assert cli_main(["check-energy", "--config", str(path)]) == 0
        assert cli_main(["check-varsol", "--config", str(path)]) == 0
        assert cli_main(["check-caccioppoli", "--config", str(path),
                         "--out", str(tmp_path / "cacc.csv")]) == 0
        assert cli_main(["trace-degiorgi", "--config", str(path),
                         "--out", str(tmp_path / "trace.csv")]) == 0

    def test_solver_failure_exit_code(self, tmp_path, capsys):
        # an unreachable tolerance makes the first step fail
        text = SWEEP_CFG + "\n[solver]\ntolerance = 1e-30\nmax_iter = 2\ndamping = 0.5\n"
        path = write(tmp_path, text)
        assert cli_main(["solve", "--config", str(path), "--out", str(tmp_path / "r")]) == 2

    def test_sweep_failure_persists_partial_reports(self, tmp_path, capsys):
        text = SWEEP_CFG + "\n[solver]\ntolerance = 1e-30\nmax_iter = 2\ndamping = 0.5\n"
        text = text.replace("directory = out", f"directory = {tmp_path / 'partial'}")
        path = write(tmp_path, text)
        assert cli_main(["sweep", "--config", str(path)]) == 2
        manifest = json.load(open(tmp_path / "partial" / "manifest.json"))
        assert manifest["failure"]
        assert os.path.exists(tmp_path / "partial" / "bounds.csv")
