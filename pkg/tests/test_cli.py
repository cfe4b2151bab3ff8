import csv
import json
import subprocess
import sys

import pytest

from chlab.cli import main
from chlab.runner import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, EXIT_VERIFY

FAST_SIM = {"command": "simulate", "grid": {"n": 64, "L": 20.0}, "T": 0.05, "dt": 1e-3, "record_every": 10}
FAST_VAR = {"command": "verify-variational",
            "variational": {"n": 128, "m_values": [32, 64], "gap_at_m": 64, "oracle_pairs": 2}}
ARTIFACTS = {
    "simulate": ["trajectory.csv", "diagnostics.csv"],
    "peakon": ["peakons.csv", "diagnostics.csv"],
    "scale": ["scaling.csv"],
    "verify-linear": ["residuals.csv"],
}


def invoke(tmp_path, cfg, *flags, name="out"):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / name
    return main(["--config", str(path), "--out", str(out), *flags]), out


def header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


def summary(out):
    return json.loads((out / "summary.json").read_text())


class TestCommands:
    @pytest.mark.parametrize("cfg", [
        FAST_SIM,
        {"command": "peakon", "peakon": {"T": 2.0, "record_every": 500}},
        {"command": "scale", "physical": {"omega0": 0.5, "h0": 0.4, "c0": 0.7}},
        {"command": "verify-linear"},
    ], ids=lambda c: c["command"])
    def test_runs_and_writes(self, tmp_path, cfg, capsys):
        status, out = invoke(tmp_path, cfg)
        assert status == EXIT_OK
        printed = json.loads(capsys.readouterr().out)
        assert printed["status"] == 0 and printed["out"] == str(out)
        for f in ["config.json", "summary.json", "timing.json", *ARTIFACTS[cfg["command"]]]:
            assert (out / f).is_file(), f
        assert summary(out)["command"] == cfg["command"]

    def test_csv_headers(self, tmp_path):
        _, out = invoke(tmp_path, FAST_SIM)
        assert header(out / "trajectory.csv") == ["t", "x", "u"]
        assert header(out / "diagnostics.csv") == ["t", "M0", "E", "H3", "min_slope", "max_abs_u"]

    def test_scale_reports_kappa(self, tmp_path):
        status, out = invoke(tmp_path, {"command": "scale",
                                        "physical": {"omega0": 0.5, "g": 9.81, "h0": 0.4, "c0": 0.7}})
        s = summary(out)
        assert s["kappa_shear"] == pytest.approx(0.5 * (9.81 * 0.4) ** 0.5 / 9.81 + 0.7, rel=1e-15)
        assert s["round_trip_passed"]

    def test_variational_suite(self, tmp_path):
        status, out = invoke(tmp_path, FAST_VAR)
        assert status == EXIT_OK, summary(out)
        assert header(out / "identity.csv") == ["offset", "m", "lhs", "rhs", "gap", "estimate"]
        rows = list(csv.DictReader(open(out / "identity.csv")))
        assert len(rows) == 4 * 2
        assert summary(out)["min_observed_order"] >= 4.0

    def test_peakon_reports_momenta(self, tmp_path):
        _, out = invoke(tmp_path, {"command": "peakon", "peakon": {"T": 1.0}})
        s = summary(out)
        assert sorted(s["asymptotic_momenta"]) == pytest.approx([1.0, 2.0], abs=1e-3)
        assert s["H_drift"]["abs"] <= 1e-10


class TestExitCodes:
    def test_invalid_config(self, tmp_path, capsys):
        status, _ = invoke(tmp_path, {"command": "simulate", "grid": {"n": 7}, "bogus": 1})
        assert status == EXIT_VALIDATION
        err = capsys.readouterr().err
        assert "grid.n" in err and "bogus: unknown key" in err

    def test_missing_config(self, tmp_path, capsys):
        assert main(["--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == EXIT_VALIDATION
        assert "nope.json" in capsys.readouterr().err

    def test_unwritable_output(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(FAST_SIM))
        assert main(["--config", str(cfg), "--out", str(blocker / "sub")]) == EXIT_VALIDATION
        assert str(blocker) in capsys.readouterr().err

    def test_breaking_flag(self, tmp_path):
        cfg = {"command": "simulate", "grid": {"n": 256, "L": 6.283185307179586}, "T": 2.0, "dt": 1e-3,
               "initial": {"name": "sine", "params": {"amplitude": -4.0}}, "record_every": 5}
        status, out = invoke(tmp_path, cfg, "--fail-on-breaking")
        assert status == EXIT_RUNTIME
        s = summary(out)
        assert s["breaking_time"] is not None and s["final_time"] < 2.0

    def test_failed_verification(self, tmp_path):
        status, out = invoke(tmp_path, {"command": "verify-linear", "linear": {"tolerance": 1e-30}})
        assert status == EXIT_VERIFY
        assert summary(out)["passed"] is False

    def test_numerical_failure(self, tmp_path, capsys):
        # random oracle pairs are under-resolved on a 16-point grid
        cfg = {"command": "verify-variational", "variational": {"n": 16, "m_values": [8], "oracle_pairs": 3}}
        status, _ = invoke(tmp_path, cfg)
        assert status == EXIT_RUNTIME
        assert "error:" in capsys.readouterr().err

    def test_peakon_collision(self, tmp_path):
        status, out = invoke(tmp_path, {"command": "peakon",
                                        "peakon": {"q": [-2, 2], "p": [1, -1], "T": 10}})
        assert status == EXIT_RUNTIME
        assert summary(out)["collision_time"] is not None


class TestDeterminism:
    def test_byte_identical(self, tmp_path):
        _, a = invoke(tmp_path, FAST_SIM, name="a")
        _, b = invoke(tmp_path, FAST_SIM, name="b")
        for f in ("summary.json", "trajectory.csv", "diagnostics.csv", "config.json"):
            assert (a / f).read_bytes() == (b / f).read_bytes(), f

    def test_seed_flag(self, tmp_path):
        _, a = invoke(tmp_path, {"command": "scale"}, "--seed", "5", name="a")
        assert json.loads((a / "config.json").read_text())["seed"] == 5

    def test_sweep_parallel_matches_serial(self, tmp_path):
        cfg = {"command": "sweep", **{k: v for k, v in FAST_SIM.items() if k != "command"},
               "sweep": {"command": "simulate",
                         "axes": [{"parameter": "equation.kappa", "values": [0, 0.25, 0.5]}]}}
        s1, serial = invoke(tmp_path, cfg, name="serial")
        s2, parallel = invoke(tmp_path, cfg, "--workers", "3", name="parallel")
        assert s1 == s2 == EXIT_OK
        assert (serial / "summary.json").read_bytes() == (parallel / "summary.json").read_bytes()
        for i in range(3):
            child = f"child_{i:03d}"
            assert (serial / child / "trajectory.csv").read_bytes() == \
                (parallel / child / "trajectory.csv").read_bytes()
        kappas = [c["assignment"]["equation.kappa"] for c in summary(serial)["children"]]
        assert kappas == [0, 0.25, 0.5]

    def test_sweep_failure_spares_siblings(self, tmp_path):
        cfg = {"command": "sweep", "peakon": {"T": 10},
               "sweep": {"command": "peakon", "axes": [
                   {"parameter": "peakon.p", "values": [[1, 0.5], [1, -1], [2, 1]]},
                   {"parameter": "peakon.q", "values": [[-2, 2]]}]}}
        status, out = invoke(tmp_path, cfg)
        s = summary(out)
        assert status == EXIT_RUNTIME
        assert s["failures"] == ["child_001"]
        assert [c["status"] for c in s["children"]] == [0, 2, 0]
        assert (out / "child_002" / "peakons.csv").is_file()


def test_plot_flag(tmp_path, capsys):
    pytest.importorskip("matplotlib")
    status, out = invoke(tmp_path, {"command": "peakon", "peakon": {"T": 2.0}}, "--plot")
    assert status == EXIT_OK
    figures = json.loads(capsys.readouterr().out)["figures"]
    assert figures == [str(out / "peakons.png")]
    assert (out / "peakons.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "scale"}))
    proc = subprocess.run([sys.executable, "-m", "chlab.cli", "--config", str(cfg), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["status"] == 0
