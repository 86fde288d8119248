from __future__ import annotations

import math

import numpy as np
import pytest

from qes.calibration import calibrate, constraint_profile
from qes.errors import FreeParameterUnbounded
from qes.models import PotentialModel, assemble_wavefunction
from qes.numeric import RadialGrid, fd_eigensolve, radial_residual


class TestOneParameterScan:
    """Single free coefficient with one surplus constraint row."""

    def test_quartic_ground(self):
        res = calibrate(PotentialModel("quartic", a=-1.0, b=0.5), "plain", 0, "e", (-10, -1e-3))
        assert [r.model.e for r in res] == [pytest.approx(-0.5, abs=1e-12)]
        assert res[0].solution.energy_squared == pytest.approx(3.0, abs=1e-12)

    def test_quartic_first_level_matches_quadratic(self):
        # with a = -1, b = 1/2 the n = 1 condition is 4 e^2 + 18 e + 6 = 0
        res = calibrate(PotentialModel("quartic", a=-1.0, b=0.5), "plain", 1, "e", (-10, -1e-3))
        expect = sorted(np.roots([4.0, 18.0, 6.0]).real)
        assert [r.model.e for r in res] == pytest.approx(expect, abs=1e-10)
        for r in res:
            assert r.solution.certified
            assert r.solution.epsilon_squared == pytest.approx(6.0, abs=1e-10)

    def test_cubic_oscillator_ground_d(self):
        res = calibrate(PotentialModel("cubic", a=-1.0), "oscillator", 0, "d", (-1, 0.99))
        assert [r.model.d for r in res] == [pytest.approx(0.5, abs=1e-12)]

    def test_profile_changes_sign_at_solution(self):
        prof = constraint_profile(PotentialModel("quartic", a=-1.0, b=0.5), "plain", 0, "e",
                                  [-1.0, -0.6, -0.4, -0.1])
        assert prof[1] * prof[2] < 0 and prof[0] * prof[1] > 0

    def test_empty_result_is_not_an_error(self):
        res = calibrate(PotentialModel("quartic", a=-1.0, b=0.5), "plain", 0, "e", (-0.4, -0.1))
        assert res == []


class TestMultistart:
    def test_calibrated_levels_are_eigenvalues(self):
        """A calibrated energy must show up in the independent FD spectrum."""
        template = PotentialModel("cubic", b=-1.0, d=0.2)
        res = calibrate(template, "coulomb", 1, "e", (-10, -1e-3))
        assert res
        for r in res:
            sol = r.solution
            w = assemble_wavefunction(sol)
            assert radial_residual(r.model, w, sol.epsilon_squared) < 1e-8
            # V levels off at b^2, so the box must reach well past the decay length
            spectrum = fd_eigensolve(r.model, RadialGrid(1e-3, 150.0, 8000, "uniform"), k=4)
            assert spectrum.contains(sol.epsilon_squared, rtol=1e-4)

    def test_several_free_coefficients(self):
        template = PotentialModel("quintic", b=-1.0, d=1.0)
        res = calibrate(template, "coulomb", 1, ("e", "f", "g"), ((-3, 3), (-3, 3), (-3, -1e-3)))
        assert res
        for r in res:
            assert r.solution.certified
            assert -3 <= r.model.g <= -1e-3

    def test_seed_reproducible(self):
        args = (PotentialModel("sextic", a=-1.0, d=0.3), "plain", 1, ("f", "h"), ((-10, 10), (-10, -1e-3)))
        one = [r.model for r in calibrate(*args, seed=3)]
        two = [r.model for r in calibrate(*args, seed=3)]
        assert one == two


class TestWindows:
    @pytest.mark.parametrize("window", [(1.0, 1.0), (2.0, -2.0), (-math.inf, 0.0)])
    def test_bad_window(self, window):
        with pytest.raises(FreeParameterUnbounded):
            calibrate(PotentialModel("quartic", a=-1.0, b=0.5), "plain", 0, "e", window)

    def test_window_shape_mismatch(self):
        with pytest.raises(FreeParameterUnbounded):
            calibrate(PotentialModel("quartic", a=-1.0, b=0.5), "plain", 0, "e", ((0, 1), (0, 2)))

    def test_unknown_coefficient(self):
        with pytest.raises(ValueError):
            calibrate(PotentialModel("quartic", a=-1.0, b=0.5), "plain", 0, "q")

    def test_window_without_valid_exponent(self):
        # 1 - m - d <= 0 across the whole window
        with pytest.raises(FreeParameterUnbounded):
            calibrate(PotentialModel("cubic", a=-1.0), "oscillator", 0, "d", (1.0, 2.0))
