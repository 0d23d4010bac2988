import json

import numpy as np
import pytest

from fdaw.cli import main


def run(args):
    return main([str(a) for a in args])


@pytest.fixture()
def workdir(tmp_path):
    return tmp_path


class TestSimulateFit:
    def test_fpca_pipeline(self, workdir, capsys):
        data = workdir / "data.csv"
        truth = workdir / "truth.json"
        fit = workdir / "fit.json"
        assert run(["simulate", "--scenario", "fpca", "--seed", "7", "--n", "40",
                    "--d", "24", "--out", data, "--truth", truth]) == 0
        assert run(["fit", "--model", "fpca", "--input", data, "--layout", "wide",
                    "--pve", "0.99", "--out", fit]) == 0
        out = capsys.readouterr().out
        assert "K=" in out
        doc = json.loads(fit.read_text())
        assert doc["kind"] == "fpca"
        tdoc = json.loads(truth.read_text())
        assert "eigenvalues" in tdoc

    @pytest.mark.parametrize("scenario,model,extra", [
        ("mfpca", "mfpca", []),
        ("tvfpca", "tvfpca", ["--method", "lme"]),
        ("fosr", "fosr", ["--terms", "x"]),
    ])
    def test_other_kinds(self, workdir, scenario, model, extra):
        data = workdir / "d.csv"
        fit = workdir / "f.json"
        assert run(["simulate", "--scenario", scenario, "--seed", "3", "--n", "24",
                    "--d", "16", "--noise-sd", "0.2", "--out", data]) == 0
        assert run(["fit", "--model", model, "--input", data, "--layout", "wide",
                    "--out", fit] + extra) == 0
        assert json.loads(fit.read_text())["kind"] == model


class TestExtract:
    @pytest.fixture()
    def fpca_fit_file(self, workdir):
        data = workdir / "data.csv"
        fit = workdir / "fit.json"
        run(["simulate", "--scenario", "fpca", "--seed", "7", "--n", "40", "--d", "24",
             "--out", data])
        run(["fit", "--model", "fpca", "--input", data, "--layout", "wide", "--out", fit])
        return fit

    def test_scores_columns(self, workdir, fpca_fit_file):
        out = workdir / "scores.csv"
        assert run(["extract", "--fit", fpca_fit_file, "--what", "scores",
                    "--kx", "1", "--ky", "2", "--out", out]) == 0
        header = out.read_text().splitlines()[0]
        assert header == "subject,score_x,score_y"

    def test_scree_and_band(self, workdir, fpca_fit_file):
        scree = workdir / "scree.csv"
        band = workdir / "band.csv"
        assert run(["extract", "--fit", fpca_fit_file, "--what", "scree", "--out", scree]) == 0
        assert scree.read_text().splitlines()[0] == "k,lambda,cum_pve"
        assert run(["extract", "--fit", fpca_fit_file, "--what", "component-band",
                    "--k", "1", "--out", band]) == 0
        assert band.read_text().splitlines()[0] == "t,center,lower,upper,psi"

    def test_kind_mismatch_exit_1(self, workdir, fpca_fit_file, capsys):
        out = workdir / "coef.csv"
        code = run(["extract", "--fit", fpca_fit_file, "--what", "coef", "--out", out])
        assert code == 1
        assert "requires kind fosr" in capsys.readouterr().err

    def test_trajectory_extract(self, workdir):
        data = workdir / "tv.csv"
        fit = workdir / "tv.json"
        out = workdir / "traj.csv"
        run(["simulate", "--scenario", "tvfpca", "--seed", "5", "--n", "20", "--d", "16",
             "--noise-sd", "0.1", "--out", data])
        run(["fit", "--model", "tvfpca", "--input", data, "--layout", "wide", "--out", fit])
        assert run(["extract", "--fit", fit, "--what", "trajectory", "--nT", "21",
                    "--out", out]) == 0
        rows = out.read_text().splitlines()
        assert rows[0] == "T,t,value"
        assert len(rows) == 1 + 21 * 16

    def test_residual_depth_extract(self, workdir):
        data = workdir / "fo.csv"
        fit = workdir / "fo.json"
        out = workdir / "depth.csv"
        run(["simulate", "--scenario", "fosr", "--seed", "5", "--n", "30", "--d", "16",
             "--out", data])
        run(["fit", "--model", "fosr", "--input", data, "--layout", "wide",
             "--terms", "x", "--out", fit])
        assert run(["extract", "--fit", fit, "--what", "residual-depth", "--out", out]) == 0
        assert out.read_text().splitlines()[0] == "rank,row,subject,depth,is_outlier"


class TestDeterminism:
    @pytest.mark.parametrize("scenario,model,extra,what,eargs", [
        ("fpca", "fpca", [], "scores", ["--kx", "1", "--ky", "2"]),
        ("mfpca", "mfpca", [], "scree", ["--level", "1"]),
        ("tvfpca", "tvfpca", ["--method", "lme"], "trajectory", ["--nT", "5"]),
        ("fosr", "fosr", ["--terms", "x"], "coef", ["--term", "x"]),
    ])
    def test_end_to_end_bit_stable(self, tmp_path, scenario, model, extra, what, eargs):
        outputs = []
        for rep in ("a", "b"):
            d = tmp_path / rep
            d.mkdir()
            data, fitf, ex = d / "data.csv", d / "fit.json", d / "extract.csv"
            assert run(["simulate", "--scenario", scenario, "--seed", "11", "--n", "24",
                        "--d", "16", "--noise-sd", "0.2", "--out", data]) == 0
            assert run(["fit", "--model", model, "--input", data, "--layout", "wide",
                        "--out", fitf] + extra) == 0
            assert run(["extract", "--fit", fitf, "--what", what, "--out", ex] + eargs) == 0
            outputs.append((data.read_bytes(), fitf.read_bytes(), ex.read_bytes()))
        assert outputs[0] == outputs[1]


class TestUsage:
    def test_unknown_flag_exit_2(self):
        assert run(["fit", "--nonsense"]) == 2

    def test_missing_command_exit_2(self):
        assert run([]) == 2

    def test_unknown_model_exit_2(self):
        assert run(["fit", "--model", "volcano", "--input", "x", "--out", "y"]) == 2

    def test_missing_input_file_exit_1(self, tmp_path, capsys):
        code = run(["fit", "--model", "fpca", "--input", tmp_path / "nope.csv",
                    "--layout", "wide", "--out", tmp_path / "f.json"])
        assert code == 1

    def test_validate_command(self, tmp_path, capsys):
        data = tmp_path / "d.csv"
        run(["simulate", "--scenario", "fpca", "--seed", "1", "--n", "10", "--d", "12",
             "--out", data])
        assert run(["validate", "--input", data, "--layout", "wide"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "n_subjects=10" in out


class TestLogging:
    def test_log_env_var_smoke(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FDAW_LOG", "debug")
        data = tmp_path / "d.csv"
        assert run(["simulate", "--scenario", "fpca", "--seed", "1", "--n", "10",
                    "--d", "12", "--out", data]) == 0
        monkeypatch.setenv("FDAW_LOG", "not-a-level")
        assert run(["validate", "--input", data, "--layout", "wide"]) == 0
