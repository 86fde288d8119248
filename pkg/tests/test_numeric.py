from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.special import kv

from qes.errors import NoConvergence, NotConfining
from qes.models import PotentialModel, assemble_wavefunction, solve_level
from qes.numeric import RadialGrid, effective_potential, fd_eigensolve, quadrature, radial_residual


class TestRadialGrid:
    def test_points(self):
        g = RadialGrid(0.1, 10.0, 21, "log")
        pts = g.points()
        assert pts[0] == pytest.approx(0.1) and pts[-1] == pytest.approx(10.0)
        assert np.allclose(np.diff(np.log(pts)), math.log(100) / 20)

    @pytest.mark.parametrize("args", [(0.0, 1.0, 32), (2.0, 1.0, 32), (0.1, 1.0, 4)])
    def test_rejects_bad_bounds(self, args):
        with pytest.raises(ValueError):
            RadialGrid(*args)

    def test_rejects_unknown_spacing(self):
        with pytest.raises(ValueError):
            RadialGrid(0.1, 1.0, 32, "chebyshev")


class TestQuadrature:
    """Adaptive Gauss-Kronrod against closed forms and scipy."""

    def test_bessel_integral(self):
        # int_0^inf r exp(-r - 1/r) dr = 2 K_2(2)
        val = quadrature(lambda r: r * np.exp(-r - 1 / r), (0.0, math.inf))
        assert val == pytest.approx(2 * kv(2, 2), rel=1e-8)

    def test_gaussian(self):
        val = quadrature(lambda x: np.exp(-x * x), (0.0, math.inf))
        assert val == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.2, 3.0), st.floats(0.0, 4.0))
    def test_against_scipy_quad(self, width, shift):
        fun = lambda x: np.exp(-width * (x - shift) ** 2) * np.cos(x)
        ours = quadrature(fun, (0.0, math.inf))
        ref, _ = integrate.quad(fun, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
        assert ours == pytest.approx(ref, rel=1e-8, abs=1e-12)

    def test_finite_window(self):
        assert quadrature(lambda x: x ** 3, (0.0, 2.0)) == pytest.approx(4.0, rel=1e-14)

    def test_nonintegrable_raises(self):
        with pytest.raises(NoConvergence):
            quadrature(lambda x: 1 / x, (0.0, 1.0))

    def test_slow_tail_raises(self):
        with pytest.raises(NoConvergence):
            quadrature(lambda x: 1 / (1 + x), (0.0, math.inf))

    def test_truncated_window_flagged(self):
        with pytest.raises(NoConvergence):
            quadrature(lambda x: np.exp(-x * x), (0.0, 1.0), require_decay=True)

    def test_empty_window(self):
        with pytest.raises(ValueError):
            quadrature(np.exp, (1.0, 1.0))


class TestRadialResidual:
    def test_exact_level_small(self, quartic_ground):
        w = assemble_wavefunction(quartic_ground)
        res = radial_residual(quartic_ground.model, w, quartic_ground.epsilon_squared)
        assert res < 1e-8

    def test_analytic_derivatives(self, quartic_ground):
        w = assemble_wavefunction(quartic_ground)
        res = radial_residual(quartic_ground.model, w, quartic_ground.epsilon_squared,
                              derivatives="analytic")
        assert res < 1e-12

    def test_wrong_energy_detected(self, quartic_ground):
        w = assemble_wavefunction(quartic_ground)
        res = radial_residual(quartic_ground.model, w, quartic_ground.epsilon_squared + 0.1)
        assert res > 1e-3

    def test_mesh_convergence(self, quartic_ground):
        """Fixed-spacing stencil error falls at fourth order."""
        w = assemble_wavefunction(quartic_ground)
        eps2 = quartic_ground.epsilon_squared
        res = [radial_residual(quartic_ground.model, w, eps2, RadialGrid(1e-2, 10, c), step="grid")
               for c in (1600, 3200, 6400)]
        ratios = [res[0] / res[1], res[1] / res[2]]
        assert all(10 < q < 25 for q in ratios)

    def test_profile_shape(self, quartic_ground):
        w = assemble_wavefunction(quartic_ground)
        worst, r, rel = radial_residual(quartic_ground.model, w, quartic_ground.epsilon_squared,
                                        profile=True)
        assert r.shape == rel.shape and worst == pytest.approx(rel.max())

    def test_overflowing_wavefunction_is_infinite(self):
        # flipping e makes the inner tail blow up; this must not read as a pass
        model = PotentialModel("quartic", a=-1.0, b=0.5, e=-0.5)
        sol = solve_level(model, "plain", 0)[0]
        flipped = model.replace(e=0.5)
        w = lambda r: np.exp(0.25 / np.asarray(r) ** 2 - 0.5 * np.asarray(r) ** 2) * 1e300
        assert radial_residual(flipped, w, sol.epsilon_squared) == math.inf

    def test_unknown_modes(self, quartic_ground):
        w = assemble_wavefunction(quartic_ground)
        with pytest.raises(ValueError):
            radial_residual(quartic_ground.model, w, 2.0, step="wide")
        with pytest.raises(ValueError):
            radial_residual(quartic_ground.model, w, 2.0, derivatives="symbolic")


class TestFDEigensolve:
    def test_pure_oscillator(self):
        # f = -r, m = 1 reduces to a 2D oscillator with eps2 = 4 n
        spectrum = fd_eigensolve(PotentialModel("quartic", a=-1.0, m=1), k=3)
        assert np.allclose(spectrum.eigenvalues, [0.0, 4.0, 8.0], atol=1e-4)

    def test_contains_quasi_exact_level(self):
        spectrum = fd_eigensolve(PotentialModel("quartic", a=-1.0, b=0.5, e=-0.5), k=3)
        assert spectrum.contains(2.0, rtol=1e-4)
        idx, diff = spectrum.nearest(2.0)
        assert idx == 0 and abs(diff) < 1e-4

    def test_not_confining(self):
        with pytest.raises(NotConfining):
            fd_eigensolve(PotentialModel("cubic", b=-0.5), k=1)

    def test_k_validation(self):
        with pytest.raises(ValueError):
            fd_eigensolve(PotentialModel("quartic", a=-1.0), k=0)

    def test_effective_potential_matches_model(self):
        model = PotentialModel("sextic", a=-1.0, d=0.3, f=0.2, h=-0.4, m=2)
        r = np.geomspace(0.1, 5, 50)
        assert np.allclose(effective_potential(model, r), model.potential(r), rtol=1e-13)
