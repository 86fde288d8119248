from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from numpy.polynomial import polynomial as npoly

from planting import perturb, plant
from qes import bethe
from qes.errors import DegreeViolation, NoConvergence, RootCollision, SingularRoot
from qes.models import PotentialModel, reduce

# Q = 2B r^2 + (2 alpha + 1) r - 2 e with B = -1, alpha = 1, e = -1 over P = r^2
COULOMB_LIKE = dict(p=[0, 0, 1], q=[2, 3, -2], w=[0])


def coulomb_ode(w=(0,)):
    return bethe.make_poly_ode(COULOMB_LIKE["p"], COULOMB_LIKE["q"], list(w))


class TestMakePolyODE:
    def test_reduced_cubic_oscillator_coefficients(self):
        e, alpha, a = 0.0, 0.5, -1.0
        ode = bethe.make_poly_ode([0, 0, 1, 0, 0], [-2 * e, 1 + 2 * alpha, 0, 2 * a, 0, 0], [0] * 5)
        assert ode.deg_p == 2 and ode.deg_q == 3 and ode.deg_w == -1

    def test_w_without_q_rejected(self):
        with pytest.raises(DegreeViolation):
            bethe.make_poly_ode([1, 0, 0, 0, 0], [0] * 6, [1, 0, 0, 0, 0])

    def test_zero_w_is_valid(self):
        ode = bethe.make_poly_ode([0, 1], [1, 2], [0])
        assert ode.deg_w == -1

    @pytest.mark.parametrize("p,q,w", [
        ([0] * 5 + [1], [1], [0]),
        ([1], [0] * 6 + [1], [0]),
        ([1], [1, 1], [0] * 5 + [1]),
        ([0], [1, 1], [0]),
        ([1], [1, 1], [1, 1]),
    ])
    def test_degree_caps(self, p, q, w):
        with pytest.raises(DegreeViolation):
            bethe.make_poly_ode(p, q, w)

    def test_padding(self):
        ode = bethe.make_poly_ode([1], [0, 1], [])
        assert ode.p.shape == (5,) and ode.q.shape == (6,) and ode.w.shape == (5,)


class TestBetheResiduals:
    def test_empty_root_set(self):
        assert bethe.bethe_residuals(coulomb_ode(), []).shape == (0,)

    def test_true_root_gives_zero(self):
        assert bethe.bethe_residuals(coulomb_ode(), [2.0]) == pytest.approx([0.0], abs=1e-15)

    def test_wrong_root_value(self):
        # Q(1)/P(1) = (-2 + 3 + 2) / 1
        assert bethe.bethe_residuals(coulomb_ode(), [1.0]) == pytest.approx([3.0])

    def test_pole_raises(self):
        with pytest.raises(SingularRoot):
            bethe.bethe_residuals(coulomb_ode(), [0.0])

    def test_collision_raises(self):
        with pytest.raises(RootCollision):
            bethe.bethe_residuals(coulomb_ode(), [1.0, 1.0 + 1e-12])

    def test_pair_term(self):
        ode = bethe.make_poly_ode([1], [0, 1], [0])
        x = np.array([0.5, -1.5])
        expected = x + 2.0 / (x - x[::-1])
        assert bethe.bethe_residuals(ode, x) == pytest.approx(expected)

    @settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(st.integers(0, 2**32 - 1), st.permutations(range(4)))
    def test_permutation_symmetry(self, seed, perm):
        rng = np.random.default_rng(seed)
        ode = bethe.make_poly_ode(rng.uniform(-1, 1, 4) + [0, 0, 0, 2], rng.uniform(-1, 1, 6),
                                  rng.uniform(-1, 1, 5) * [1, 1, 1, 1, 0])
        x = rng.uniform(-3, 3, 4) + 1j * rng.uniform(-1, 1, 4)
        base = bethe.bethe_residuals(ode, x)
        assert bethe.bethe_residuals(ode, x[list(perm)]) == pytest.approx(base[list(perm)], rel=1e-12)


class TestJacobian:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 5))
    def test_matches_central_differences(self, seed, n):
        rng = np.random.default_rng(seed)
        ode = bethe.make_poly_ode(rng.uniform(-1, 1, 5), rng.uniform(-1, 1, 6), [0])
        x = rng.uniform(-3, 3, n) + 1j * rng.uniform(-1, 1, n)
        if bethe._gap(x) < 0.2 or np.min(np.abs(ode.P(x))) < 0.05:
            return
        J = bethe.bethe_jacobian(ode, x)
        Jfd = np.empty_like(J)
        for k in range(n):
            h = 1e-6 * max(1.0, abs(x[k]))
            up, dn = x.copy(), x.copy()
            up[k] += h
            dn[k] -= h
            Jfd[:, k] = (bethe.bethe_residuals(ode, up) - bethe.bethe_residuals(ode, dn)) / (2 * h)
        assert np.max(np.abs(J - Jfd)) <= 1e-5 * np.max(np.abs(J))


class TestSolveBetheRoots:
    def test_coulomb_like_two_roots(self):
        sets = bethe.solve_bethe_roots(coulomb_ode(), 1)
        assert sorted(rs.roots[0].real for rs in sets) == pytest.approx([-0.5, 2.0], abs=1e-12)

    def test_quartic_single_positive_root(self):
        red = reduce(PotentialModel("quartic", a=-1, b=0.5, e=-1), "plain", 1)
        roots = sorted(rs.roots[0].real for rs in bethe.solve_bethe_roots(red.ode, 1))
        disc = np.sqrt(2.5 ** 2 + 4)
        assert roots == pytest.approx([(2.5 - disc) / 2, (2.5 + disc) / 2], abs=1e-10)
        assert (2.5 + disc) / 2 == pytest.approx(2.8508, abs=1e-4)

    def test_seed_at_root_converges_fast(self):
        x, it, ok = bethe.newton_refine(coulomb_ode(), [2.0])
        assert ok and it <= 2

    def test_sorted_and_distinct(self):
        rng = np.random.default_rng(3)
        pl = plant(rng, n=3, complex_pair=False)
        for rs in bethe.solve_bethe_roots(pl.ode, 3):
            assert np.all(np.diff(rs.roots.real) >= 0)
            assert rs.is_distinct and rs.max_bethe_residual < bethe.BETHE_TOL

    def test_recovers_planted_roots(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            pl = plant(rng, n=int(rng.integers(1, 4)))
            target = bethe.canonical_order(pl.roots)
            sets = bethe.solve_bethe_roots(pl.ode, pl.roots.size)
            assert any(np.allclose(rs.roots, target, atol=1e-8) for rs in sets)

    def test_no_convergence_reports_best(self):
        # Q constant and P constant: n = 2 has no Bethe solution (sum of residuals is 2 Q / P != 0)
        ode = bethe.make_poly_ode([1], [1], [0])
        with pytest.raises(NoConvergence) as info:
            bethe.solve_bethe_roots(ode, 2, max_iters=20)
        assert np.isfinite(info.value.best_residual)

    def test_n1_matches_zeros_of_q(self):
        for name, model, case in [
            ("cubic", PotentialModel("cubic", b=-1.0, d=0.2, e=-0.5), "coulomb"),
            ("quartic", PotentialModel("quartic", a=-1.0, b=0.5, e=-0.7), "plain"),
            ("sextic", PotentialModel("sextic", a=-1.0, d=0.3, f=-1.0, h=-0.8), "plain"),
            ("quintic", PotentialModel("quintic", b=-1.0, d=1.0, e=-0.5, f=-0.3, g=-0.4), "coulomb"),
        ]:
            ode = reduce(model, case, 1).ode
            zq = np.roots(ode.q[: ode.deg_q + 1][::-1])
            zq = zq[np.abs(ode.P(zq)) > 1e-9]
            got = [rs.roots[0] for rs in bethe.solve_bethe_roots(ode, 1)]
            assert len(got) == len(zq), name
            for z in zq:
                assert min(abs(z - g) for g in got) < 1e-10, name


class TestConstraints:
    def test_n0_requires_only_w0_zero(self):
        ode = bethe.make_poly_ode([1], [0, 1], [0])
        assert bethe.coefficient_constraints(ode, []).satisfied
        ode = bethe.make_poly_ode([1], [0, 0, 1], [0.3])
        assert not bethe.coefficient_constraints(ode, []).satisfied

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(0, 4))
    def test_cubic_oscillator_relations(self, seed, n):
        """w_k minus its required value equals each printed cubic oscillator constraint."""
        rng = np.random.default_rng(seed)
        a, alpha, e, eps2 = rng.uniform(-2, -0.1), rng.uniform(0.1, 2), rng.uniform(-2, 2), rng.uniform(-5, 5)
        x = rng.uniform(-3, 3, n)
        ode = bethe.make_poly_ode([0, 0, 1], [-2 * e, 2 * alpha + 1, 0, 2 * a],
                                  [2 * alpha - 1, -4 * a * e, eps2 + 2 * a * (2 * alpha - 1)])
        raw = bethe.coefficient_constraints(ode, x).raw_residuals
        assert raw[2] == pytest.approx(2 * a * (2 * alpha + n - 1) + eps2, abs=1e-12)
        assert raw[1] == pytest.approx(-(4 * a * e - 2 * a * x.sum()), abs=1e-12)
        assert raw[0] == pytest.approx(2 * a * np.sum(x ** 2) + (2 * alpha + n - 1) * (n + 1), abs=1e-10)
        assert raw[3] == 0 and raw[4] == 0

    def test_perturbation_scales_linearly(self):
        rng = np.random.default_rng(5)
        pl = plant(rng, n=3, complex_pair=False)
        res = []
        for size in (1e-3, 2e-3, 4e-3):
            x = pl.roots.copy()
            x[0] += size
            rep = bethe.coefficient_constraints(pl.ode, x)
            assert not rep.satisfied
            res.append(np.max(np.abs(rep.raw_residuals)))
        slopes = np.diff(np.log(res)) / np.log(2.0)
        assert slopes == pytest.approx([1.0, 1.0], abs=0.05)


class TestVerifyPolynomial:
    def test_n0_returns_max_w(self):
        ode = bethe.make_poly_ode([1], [0, 0, 2], [0.25, -0.75])
        assert bethe.verify_polynomial_solution(ode, []) == pytest.approx(0.75)

    def test_certified_root(self):
        lin = bethe.make_root_set(coulomb_ode(), [2.0])
        # with W = 0 the n = 1 polynomial residual is Q itself; supply the consistent w
        req, _ = bethe.required_w(coulomb_ode(), lin.roots)
        ode = coulomb_ode(req.real)
        assert bethe.verify_polynomial_solution(ode, [2.0]) < 1e-10

    @pytest.mark.parametrize("root", [2.0, -0.5])
    def test_w0_offset(self, root):
        """Offsetting w_0 by one adds exactly S to the residual polynomial."""
        req, _ = bethe.required_w(coulomb_ode(), [root])
        w = req.real.copy()
        w[0] += 1.0
        resid = bethe.residual_polynomial(coulomb_ode(w), [root])
        assert resid[:2] == pytest.approx([-root, 1.0], abs=1e-12)
        assert bethe.verify_polynomial_solution(coulomb_ode(w), [root]) == pytest.approx(
            max(1.0, abs(root)), abs=1e-12)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_master_equivalence(self, seed):
        """Bethe equations plus the coefficient relations imply an exact polynomial solution."""
        rng = np.random.default_rng(seed)
        pl = plant(rng)
        rs = bethe.make_root_set(pl.ode, pl.roots)
        assert rs.max_bethe_residual < bethe.BETHE_TOL
        assert bethe.coefficient_constraints(pl.ode, rs).satisfied
        assert bethe.verify_polynomial_solution(pl.ode, rs) < 10 * bethe.CONSTRAINT_TOL * pl.ode.scale
        if pl.roots.size:
            bad = perturb(pl.roots, rng)
            assert not bethe.is_certified(pl.ode, bethe.make_root_set(pl.ode, bad))

    def test_linear_system_matches_polymul(self):
        rng = np.random.default_rng(2)
        pl = plant(rng, n=3)
        A, rhs = bethe.linear_system(pl.ode, 3)
        c = npoly.polyfromroots(pl.roots).real
        direct = bethe.residual_polynomial(pl.ode, pl.roots)
        got = A @ c[:3] + rhs
        pad = np.zeros(got.size, complex)
        pad[: direct.size] = direct
        assert got == pytest.approx(pad.real, abs=1e-10)
