from __future__ import annotations

import csv
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from qes.cli import fmt, main
from qes.config import parse_config
from qes.errors import ConfigError

DEMOS = Path(__file__).resolve().parent.parent / "demos" / "configs"

QUARTIC = """\
[job]
family = quartic
case = plain
levels = {levels}

[coefficients]
a = -1
b = 0.5
e = -0.5
"""


def write(tmp_path: Path, text: str, name: str = "job.ini") -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path


def rows(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestFormatting:
    def test_round_trip_17_digits(self):
        x = 0.1 + 0.2
        assert float(fmt(x)) == x

    @pytest.mark.parametrize("value", [None, float("nan")])
    def test_missing(self, value):
        assert fmt(value) == "NA"

    def test_complex_and_bool(self):
        assert fmt(1 + 2j) == "1+2j"
        assert fmt(True) == "1"


class TestConfig:
    def test_unknown_coefficient_named(self):
        with pytest.raises(ConfigError, match="'q'"):
            parse_config(QUARTIC.format(levels=0) + "q = 1\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="plot"):
            parse_config(QUARTIC.format(levels=0) + "[plot]\nx = 1\n")

    def test_negative_level(self):
        with pytest.raises(ConfigError):
            parse_config(QUARTIC.format(levels="-1"))

    def test_case_must_fit_family(self):
        with pytest.raises(ConfigError):
            parse_config(QUARTIC.format(levels=0).replace("case = plain", "case = coulomb"))

    def test_mass_and_magnetic_number_distinct(self):
        cfg = parse_config(QUARTIC.format(levels=0).replace("[coefficients]", "M = 2\nm = 1\n\n[coefficients]"))
        assert (cfg.M, cfg.m) == (2.0, 1)


class TestSolve:
    """The solve subcommand and its artifacts."""

    def test_quartic_spectrum(self, tmp_path):
        assert main(["solve", str(write(tmp_path, QUARTIC.format(levels=0))), "--out", str(tmp_path)]) == 0
        (row,) = rows(tmp_path / "spectrum.csv")
        assert float(row["E_squared"]) == pytest.approx(3.0, abs=1e-12)
        assert float(row["radial_residual"]) < 1e-8
        assert row["physical_flag"] == "1"
        wave = rows(tmp_path / "wavefunction_n0.csv")
        assert list(wave[0]) == ["r", "phi_lower", "phi_upper"]

    def test_unknown_key_exit_2(self, tmp_path, capsys):
        path = write(tmp_path, QUARTIC.format(levels=0) + "q = 3\n")
        assert main(["solve", str(path), "--out", str(tmp_path / "out")]) == 2
        assert "'q'" in capsys.readouterr().err
        assert not (tmp_path / "out").exists()

    def test_empty_levels_header_only(self, tmp_path):
        assert main(["solve", str(write(tmp_path, QUARTIC.format(levels=""))), "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "spectrum.csv").read_text().splitlines()
        assert len(lines) == 1 and lines[0].startswith("family,case,n,solution,E_squared")

    def test_uncertified_level_exit_3(self, tmp_path):
        assert main(["solve", str(write(tmp_path, QUARTIC.format(levels="0, 1"))), "--out", str(tmp_path)]) == 3

    def test_byte_identical(self, tmp_path):
        cfg = str(DEMOS / "cubic_coulomb.ini")
        for sub in ("one", "two"):
            assert main(["solve", cfg, "--out", str(tmp_path / sub), "--plot-data"]) == 0
        names = sorted(p.name for p in (tmp_path / "one").iterdir())
        assert "spectrum_long.csv" in names
        for name in names:
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()

    def test_parallel_matches_serial(self, tmp_path):
        cfg = str(DEMOS / "cubic_coulomb.ini")
        assert main(["solve", cfg, "--out", str(tmp_path / "serial")]) == 0
        assert main(["solve", cfg, "--out", str(tmp_path / "par"), "--jobs", "3"]) == 0
        assert ((tmp_path / "serial" / "spectrum.csv").read_bytes()
                == (tmp_path / "par" / "spectrum.csv").read_bytes())

    def test_upper_component_na_when_energy_degenerate(self, tmp_path):
        text = "[job]\nfamily = cubic\ncase = oscillator\nlevels = 0\n\n[coefficients]\na = -1\nd = 0.5\n"
        assert main(["solve", str(write(tmp_path, text)), "--out", str(tmp_path)]) == 0
        (row,) = rows(tmp_path / "spectrum.csv")
        assert float(row["E_squared"]) == pytest.approx(1.0)
        wave = rows(tmp_path / "wavefunction_n0.csv")
        assert all(w["phi_upper"] == "NA" for w in wave)
        assert all(np.isfinite(float(w["phi_lower"])) for w in wave)

    def test_grid_override(self, tmp_path):
        path = str(write(tmp_path, QUARTIC.format(levels=0)))
        assert main(["solve", path, "--out", str(tmp_path), "--grid", "0.1,5,40"]) == 0
        wave = rows(tmp_path / "wavefunction_n0.csv")
        assert len(wave) == 40
        assert float(wave[0]["r"]) == pytest.approx(0.1)

    def test_bad_grid_override(self, tmp_path):
        path = str(write(tmp_path, QUARTIC.format(levels=0)))
        assert main(["solve", path, "--out", str(tmp_path), "--grid", "5,0.1,40"]) == 2


class TestVerify:
    def test_all_pass(self, capsys):
        assert main(["verify", str(DEMOS / "quartic_calibrate.ini")]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out and all(line.startswith("PASS") for line in out)

    def test_flipped_sign_fails(self, capsys):
        assert main(["verify", str(DEMOS / "quartic_flipped.ini")]) == 1
        out = capsys.readouterr().out
        assert "FAIL n=0 normalization: NonNormalizable" in out

    @pytest.mark.parametrize("name", ["quintic_degeneration.ini", "sextic_degeneration.ini"])
    def test_degeneration(self, name, capsys):
        assert main(["verify", str(DEMOS / name)]) == 0
        assert "monotone=True" in capsys.readouterr().out

    def test_writes_report_when_out_given(self, tmp_path):
        main(["verify", str(DEMOS / "quartic_ground.ini"), "--out", str(tmp_path)])
        assert (tmp_path / "verify.txt").read_text().startswith("PASS")


class TestSweep:
    def test_quartic_scan(self, tmp_path):
        assert main(["sweep", str(DEMOS / "quartic_sweep.ini"), "--out", str(tmp_path)]) == 0
        table = rows(tmp_path / "calibration.csv")
        e = np.array([float(r["e"]) for r in table])
        e2 = np.array([float(r["E_squared_n0"]) for r in table])
        res = np.array([float(r["residual_n0"]) for r in table])
        assert np.allclose(e2, 3.0, atol=1e-12)
        # the grid step 0.02 puts a sample on the zero itself
        k = int(np.argmin(np.abs(res)))
        assert e[k] == pytest.approx(-0.5) and abs(res[k]) < 1e-12
        assert np.all(res[:k] < 0) and np.all(res[k + 1:] > 0)
        assert "e=-0.5" in (tmp_path / "report.txt").read_text()

    def test_window_without_zero(self, tmp_path):
        text = (DEMOS / "quartic_sweep.ini").read_text().replace("-2, -0.1", "-0.4, -0.1")
        assert main(["sweep", str(write(tmp_path, text)), "--out", str(tmp_path)]) == 0
        assert (tmp_path / "calibration.csv").exists()
        assert "no calibrated point" in (tmp_path / "report.txt").read_text()

    def test_empty_window_exit_2(self, tmp_path):
        text = (DEMOS / "quartic_sweep.ini").read_text().replace("-2, -0.1", "-1, -1")
        assert main(["sweep", str(write(tmp_path, text)), "--out", str(tmp_path)]) == 2

    def test_missing_window_exit_2(self, tmp_path):
        assert main(["sweep", str(write(tmp_path, QUARTIC.format(levels=0))), "--out", str(tmp_path)]) == 2


class TestEntryPoint:
    def test_quiet_logging(self, tmp_path):
        env = dict(os.environ, QES_LOG="quiet")
        proc = subprocess.run([sys.executable, "-m", "qes", "solve", str(DEMOS / "quartic_ground.ini"),
                               "--out", str(tmp_path)], env=env, capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stderr == ""

    def test_debug_logging(self, tmp_path):
        env = dict(os.environ, QES_LOG="debug")
        proc = subprocess.run([sys.executable, "-m", "qes", "solve", str(DEMOS / "quartic_ground.ini"),
                               "--out", str(tmp_path)], env=env, capture_output=True, text=True)
        assert proc.returncode == 0
        assert "DEBUG" in proc.stderr
