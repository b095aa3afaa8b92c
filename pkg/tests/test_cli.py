import os

import pytest

from adasize.cli import main
from adasize.data import parse_sparse_text


def run_cli(args):
    return main(args)


def test_no_arguments_prints_usage_and_fails(capsys):
    assert run_cli([]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_flag_is_usage_error(capsys):
    assert run_cli(["bounds", "--N", "1024", "--m0", "256", "--frobnicate"]) == 1


def test_missing_dataset_is_usage_error(tmp_path, capsys):
    assert run_cli(["run", "--out", str(tmp_path)]) == 1
    assert "dataset" in capsys.readouterr().err


class TestGen:
    def test_writes_parseable_file(self, tmp_path, capsys):
        assert run_cli(["gen", "--gen", "50,6,1.0", "--seed", "3",
                        "--out", str(tmp_path)]) == 0
        path = tmp_path / "synthetic_50x6_seed3.svm"
        assert path.exists()
        ds = parse_sparse_text(path.read_text())
        assert ds.n_samples == 50 and ds.dim == 6

    def test_deterministic(self, tmp_path):
        for sub in ("a", "b"):
            run_cli(["gen", "--gen", "40,5,0.8", "--seed", "9",
                     "--out", str(tmp_path / sub)])
        a = (tmp_path / "a" / "synthetic_40x5_seed9.svm").read_bytes()
        b = (tmp_path / "b" / "synthetic_40x5_seed9.svm").read_bytes()
        assert a == b


class TestBounds:
    def test_protocol_table(self, capsys):
        assert run_cli(["bounds", "--N", "10000", "--m0", "400",
                        "--alpha", "0.5", "--c", "1"]) == 0
        out = capsys.readouterr().out
        lines = out.splitlines()
        # header + 6 stages + 2 totals
        assert len(lines) == 9
        assert lines[1].lstrip().startswith("400")
        assert lines[6].lstrip().startswith("10000")
        assert "not a power of two" in out
        assert "total_svrg_grad_evals = 93691.6" in out

    def test_power_of_two_totals(self, capsys):
        assert run_cli(["bounds", "--N", "10000", "--m0", "625"]) == 0
        out = capsys.readouterr().out
        assert "total_agd_grad_evals = 1.57193e+06" in out

    def test_csv_output(self, tmp_path, capsys):
        csv_path = tmp_path / "bounds.csv"
        assert run_cli(["bounds", "--N", "1024", "--m0", "256",
                        "--csv", str(csv_path)]) == 0
        lines = csv_path.read_text().splitlines()
        assert lines[0].startswith("n,V_n,threshold")
        assert len(lines) == 4


class TestRun:
    def test_adaptive_run_outputs(self, tmp_path, capsys):
        code = run_cli(["run", "--gen", "512,8,1.0", "--method", "agd", "--adaptive",
                        "--m0", "128", "--seed", "5", "--out", str(tmp_path)])
        assert code == 0
        trace = tmp_path / "trace_agd_ada_seed5.csv"
        assert trace.exists()
        header = trace.read_text().splitlines()[0]
        assert header == "effective_passes,grad_evals,stage_n,suboptimality,grad_norm,test_error"
        manifest = (tmp_path / "manifest_run_seed5.txt").read_text()
        assert "dataset_sha256 = " in manifest
        assert "adasize_version = " in manifest

    def test_fixed_run_naming(self, tmp_path):
        run_cli(["run", "--gen", "256,6,1.0", "--method", "gd",
                 "--m0", "64", "--seed", "2", "--out", str(tmp_path)])
        assert (tmp_path / "trace_gd_fix_seed2.csv").exists()

    def test_reruns_are_byte_identical(self, tmp_path):
        args = ["run", "--gen", "512,8,1.0", "--method", "svrg", "--adaptive",
                "--m0", "128", "--seed", "7"]
        for sub in ("x", "y"):
            assert run_cli(args + ["--out", str(tmp_path / sub)]) == 0
        a = (tmp_path / "x" / "trace_svrg_ada_seed7.csv").read_bytes()
        b = (tmp_path / "y" / "trace_svrg_ada_seed7.csv").read_bytes()
        assert a == b

    def test_N_larger_than_data_rejected(self, tmp_path):
        assert run_cli(["run", "--gen", "64,4,1.0", "--N", "128",
                        "--out", str(tmp_path)]) == 1

    def test_out_dir_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ADASIZE_OUT", str(tmp_path / "envout"))
        run_cli(["run", "--gen", "256,6,1.0", "--method", "gd", "--m0", "64",
                 "--seed", "1"])
        assert (tmp_path / "envout" / "trace_gd_fix_seed1.csv").exists()


class TestConfigFile:
    def test_file_sets_defaults_and_flags_override(self, tmp_path, capsys):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("method = svrg\nm0 = 64\nseed = 13\n# comment\n")
        out1 = tmp_path / "o1"
        assert run_cli(["run", "--gen", "256,6,1.0", "--adaptive",
                        "--config", str(cfg), "--out", str(out1)]) == 0
        assert (out1 / "trace_svrg_ada_seed13.csv").exists()
        out2 = tmp_path / "o2"
        assert run_cli(["run", "--gen", "256,6,1.0", "--adaptive", "--method", "agd",
                        "--config", str(cfg), "--out", str(out2)]) == 0
        assert (out2 / "trace_agd_ada_seed13.csv").exists()

    def test_malformed_config(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("method svrg\n")
        assert run_cli(["run", "--gen", "64,4,1.0", "--config", str(cfg)]) == 1


class TestCompare:
    def test_six_traces_and_summary(self, tmp_path, capsys):
        code = run_cli(["compare", "--gen", "512,10,1.0", "--m0", "128",
                        "--m-mode", "tight", "--seed", "4", "--out", str(tmp_path)])
        assert code == 0
        for method in ("gd", "agd", "svrg"):
            assert (tmp_path / f"trace_{method}_ada_seed4.csv").exists()
            assert (tmp_path / f"trace_{method}_fix_seed4.csv").exists()
        summary = (tmp_path / "summary_seed4.csv").read_text().splitlines()
        assert summary[0] == ("method,adaptive,passes_to_VN,passes_to_min_test_error,"
                              "min_test_error,speedup_vs_fixed")
        assert len(summary) == 7
        table = capsys.readouterr().out
        assert table.splitlines()[0].startswith("method")
        assert (tmp_path / "manifest_compare_seed4.txt").exists()


class TestVerifyCommand:
    def test_fd_only(self, tmp_path, capsys):
        code = run_cli(["verify", "--gen", "256,8,1.0", "--checks", "fd",
                        "--trials", "10", "--seed", "3", "--out", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("fd_gradient_logistic,10,0,")
        report = (tmp_path / "checks_seed3.csv").read_text().splitlines()
        assert report[0] == "name,trials,violations,worst_margin,passed"
        assert len(report) == 3  # logistic + squared

    def test_direction_check(self, tmp_path, capsys):
        code = run_cli(["verify", "--gen", "128,6,1.0", "--checks", "svrg_direction",
                        "--trials", "10", "--seed", "3", "--out", str(tmp_path)])
        assert code == 0
        assert capsys.readouterr().out.startswith("svrg_direction_n17,10,0,")
