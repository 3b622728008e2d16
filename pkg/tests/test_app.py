"""Tests for the command-line entry point."""

import pytest

import app
from src.harness import read_manifest


@pytest.fixture
def short_ini(tmp_path):
    """Two-second run configuration on disk."""
    path = tmp_path / "short.ini"
    path.write_text("[run]\nduration = 2 s\nrng_seed = 5\n", encoding="utf-8")
    return path


def test_simulate_writes_run(short_ini, tmp_path, capsys):
    """Test a full simulate invocation."""
    out = tmp_path / "run"

    code = app.main(["simulate", str(short_ini), "--out", str(out), "--depth-scan",
                     "120 mJ/cm2:1000 mJ/cm2:10", "--pulses", "1000"])

    assert code == app.EXIT_OK
    assert read_manifest(out)["scenario"] == "short"
    assert (out / "depth_scan.csv").exists()
    assert "final_ion_count" in capsys.readouterr().out


def test_simulate_selected_outputs(short_ini, tmp_path):
    """Test the --outputs filter."""
    out = tmp_path / "run"

    assert app.main(["simulate", str(short_ini), "--out", str(out), "--outputs", "pressure"]) == 0
    assert (out / "pressure.csv").exists()
    assert not (out / "ion_count.csv").exists()
    assert app.main(["simulate", str(short_ini), "--out", str(out), "--outputs", "sparks"]) == app.EXIT_CONFIG


def test_bad_config_exits_2(tmp_path, capsys):
    """Test unknown keys and unreadable files."""
    bad = tmp_path / "bad.ini"
    bad.write_text("[trap]\nrf_voltage = 200\n", encoding="utf-8")

    assert app.main(["simulate", str(bad), "--out", str(tmp_path / "x")]) == app.EXIT_CONFIG
    assert "trap.rf_voltage" in capsys.readouterr().err
    assert app.main(["simulate", str(tmp_path / "missing.ini")]) == app.EXIT_CONFIG


def test_unstable_trap_exits_3(tmp_path, capsys):
    """Test that a physics failure maps to exit code 3."""
    cfg = tmp_path / "hot.ini"
    cfg.write_text("[run]\nduration = 1 s\n\n[trap]\nrf_amplitude = 800 V\n", encoding="utf-8")

    assert app.main(["simulate", str(cfg), "--out", str(tmp_path / "hot")]) == app.EXIT_PHYSICS
    assert "hot" in capsys.readouterr().err


def test_fit_threshold_csv(tmp_path, capsys):
    """Test fitting a depth scan from a CSV file."""
    path = tmp_path / "scan.csv"
    rows = ["fluence_mJ_cm2,depth_um,n_pulses"]
    for fluence in (120.0, 300.0, 500.0, 700.0, 850.0, 1000.0):
        rows.append(f"{fluence},{1000 * max(0.0, 0.01 * (fluence - 600.0))},1000")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")

    assert app.main(["fit", "threshold", str(path)]) == 0
    out = capsys.readouterr().out
    value = float(next(line for line in out.splitlines() if line.startswith("F_th")).split("=")[1])
    assert value == pytest.approx(600.0, rel=1e-4)


def test_fit_rejects_degenerate_csv(tmp_path):
    """Test that an unfittable scan maps to exit code 3."""
    path = tmp_path / "flat.csv"
    path.write_text("f,d\n1,0\n2,0\n3,0\n4,0\n", encoding="utf-8")

    assert app.main(["fit", "threshold", str(path)]) == app.EXIT_PHYSICS


def test_calibrate_prints_scale(short_ini, capsys):
    """Test the calibrate subcommand."""
    code = app.main(["calibrate", "--target-rate", "0.01", "--fluence", "240",
                     "--rep-rate", "25 kHz", "--config", str(short_ini), "--on-time", "5"])

    assert code == 0
    assert capsys.readouterr().out.startswith("yield_scale = ")


def test_report_requires_manifest(tmp_path, capsys):
    """Test report on a directory that is not a run."""
    assert app.main(["report", str(tmp_path)]) == app.EXIT_CONFIG
    assert "manifest.txt" in capsys.readouterr().err


def test_fluence_argument_units():
    """Test that a bare fluence is mJ/cm² and suffixes are honoured."""
    assert app._fluence("240") == pytest.approx(2400.0)
    assert app._fluence("2400 J/m2") == pytest.approx(2400.0)
