import json

import pytest

from ..main import EXIT_FAILED, EXIT_OK, EXIT_USAGE, build_parser, load_run_config, main
from ..models.spectral_data import NormMethod, TaskKind
from ..utils.report_writer import read_csv

BUILD = ["build", "--space", "torus", "--N", "64", "--levels", "3", "--variant", "tight",
         "--out", "frame.hkf"]


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(BUILD) == EXIT_OK
    return tmp_path


class TestBuild:
    def test_build_writes_frame(self, workdir):
        assert (workdir / "frame.hkf").exists()
        records = (workdir / "logs" / "runs.json").read_text().splitlines()
        assert json.loads(records[-1])["status"] == EXIT_OK

    def test_truncation_too_small_is_usage_error(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(["build", "--N", "4", "--levels", "3", "--out", "small.hkf"]) == EXIT_USAGE

    @pytest.mark.parametrize("argv", [
        ["build", "--N", "64", "--gamma", "wide", "--out", "x.hkf"],
        ["build", "--N", "64", "--levels", "-1", "--out", "x.hkf"],
        ["build", "--N", "64", "--b", "1.0", "--out", "x.hkf"],
        ["frobnicate"],
        ["verify", "missing.hkf"],
    ])
    def test_usage_errors(self, argv, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(argv) == EXIT_USAGE


class TestCommands:
    def test_verify_suite(self, workdir):
        assert main(["verify", "frame.hkf", "--suite", "frame-bounds", "--trials", "10"]) == EXIT_OK
        report = json.loads((workdir / "reports" / "verify_frame-bounds.json").read_text())
        assert report["summary"]["passed"]
        assert "evaluation_timestamp" in report

    def test_norms_csv_is_reproducible(self, workdir):
        argv = ["norms", "frame.hkf", "--f", "const", "--s", "1", "--p", "2",
                "--methods", "lp,heat,seq", "--out", "first.csv"]
        assert main(argv) == EXIT_OK
        assert main(argv[:-1] + ["second.csv"]) == EXIT_OK
        first = (workdir / "first.csv").read_bytes()
        assert first == (workdir / "second.csv").read_bytes()
        assert first.startswith(b"function_id,space,s,p,q,method,value\r\n")
        table = read_csv(workdir / "first.csv")
        assert len(table) == 3
        assert list(table["method"]) == ["lp_decomp", "heat", "sequence"]

    def test_approx_writes_curve(self, workdir):
        status = main(["approx", "frame.hkf", "--f", "random:seed=3", "--nmax", "20", "--out", "curve.csv"])
        assert status in (0, 1)
        assert len(read_csv(workdir / "curve.csv")) == 21
        slope = json.loads((workdir / "curve.json").read_text())
        assert slope["jackson"]["status"] in {"pass", "fail", "exact", "inconclusive"}

    def test_report_checks_equivalence_bands(self, workdir):
        status = main(["report", "frame.hkf", "--trials", "3", "--nmax", "20", "--report-dir", "summary"])
        assert status in (EXIT_OK, EXIT_FAILED)
        payload = json.loads((workdir / "summary" / "report.json").read_text())
        failures = json.loads((workdir / "logs" / "runs.json").read_text().splitlines()[-1])["result"]["failures"]
        for pair, band in (("lp_vs_heat", 10.0), ("lp_vs_seq", 10.0), ("lp_vs_phi", 5.0)):
            entry = payload["equivalence"][pair]
            assert entry["band"] == band
            assert entry["within_band"] == (entry["spread"] <= band)
            flagged = any(str(failure).startswith(f"{pair} spread") for failure in failures)
            assert flagged != entry["within_band"]

    def test_unknown_function_specifier(self, workdir):
        assert main(["norms", "frame.hkf", "--f", "wavelet:n=2"]) == EXIT_USAGE


class TestConfig:
    def test_flags_override_config_file(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"space": {"kind": "jacobi", "N": 40}, "frame": {"b": 3.0}}))
        args = build_parser().parse_args(["--config", str(config), "build", "--N", "16", "--out", "f.hkf"])
        run_config = load_run_config(args)
        assert run_config.space.N == 16
        assert run_config.space.kind.value == "jacobi"
        assert run_config.frame.b == 3.0
        assert run_config.task.task == TaskKind.BUILD

    def test_method_aliases(self, tmp_path):
        frame = tmp_path / "f.hkf"
        frame.write_bytes(b"")
        args = build_parser().parse_args(["norms", str(frame), "--methods", "phi,coeff"])
        assert load_run_config(args).task.methods == [NormMethod.PHI_VARIANT, NormMethod.FRAME_COEFF]
