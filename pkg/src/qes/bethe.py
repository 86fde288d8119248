"""Functional Bethe ansatz for P(x) S'' + Q(x) S' + W(x) S = 0.

Polynomial solutions S(x) = prod_j (x - x_j) of a second-order ODE with
polynomial coefficients (deg P <= 4, deg Q <= 5, deg W <= 4) exist exactly
when the roots satisfy the Bethe equations

    Q(x_j) / P(x_j) + sum_{k != j} 2 / (x_j - x_k) = 0,   j = 1..n,

and the coefficients of W obey five relations expressed through power sums of
the roots.  This module solves the first set (damped complex Newton with
multistart seeds), evaluates the second, and provides a direct expansion of
the ODE residual as an independent cross-check.

All coefficient arrays are in ascending order: ``p[k]`` multiplies x**k.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DegreeViolation, NoConvergence, RootCollision, SingularRoot

logger = logging.getLogger(__name__)

BETHE_TOL = 1e-10
CONSTRAINT_TOL = 1e-9
DISTINCT_TOL = 1e-8
POLE_TOL = 1e-12
ROOT_MATCH_TOL = 1e-7

_CAPS = {"p": 5, "q": 6, "w": 5}


def _degree(c: np.ndarray) -> int:
    nz = np.flatnonzero(c)
    return int(nz[-1]) if nz.size else -1


@dataclass(frozen=True)
class PolyODE:
    """Coefficients of P, Q, W in ascending powers, padded to lengths 5, 6, 5."""

    p: np.ndarray
    q: np.ndarray
    w: np.ndarray

    @property
    def deg_p(self) -> int:
        return _degree(self.p)

    @property
    def deg_q(self) -> int:
        return _degree(self.q)

    @property
    def deg_w(self) -> int:
        return _degree(self.w)

    @property
    def scale(self) -> float:
        """Largest absolute coefficient (at least tiny, never zero)."""
        return float(max(np.max(np.abs(self.p)), np.max(np.abs(self.q)),
                         np.max(np.abs(self.w)), np.finfo(float).tiny))

    def P(self, x):
        return npoly.polyval(x, self.p)

    @cached_property
    def dp(self) -> np.ndarray:
        return npoly.polyder(self.p)

    @cached_property
    def dq(self) -> np.ndarray:
        return npoly.polyder(self.q)

    def Q(self, x):
        return npoly.polyval(x, self.q)

    def W(self, x):
        return npoly.polyval(x, self.w)

    def with_w(self, w) -> "PolyODE":
        return make_poly_ode(self.p, self.q, w)


def _coerce(name: str, values) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    cap = _CAPS[name]
    if not np.all(np.isfinite(arr)):
        raise DegreeViolation(f"{name} has non-finite coefficients")
    if arr.size > cap:
        if np.any(arr[cap:] != 0.0):
            raise DegreeViolation(
                f"deg {name.upper()} exceeds the cap {cap - 1}")
        arr = arr[:cap]
    out = np.zeros(cap)
    out[:arr.size] = arr
    out.setflags(write=False)
    return out


def make_poly_ode(p, q, w) -> PolyODE:
    """Validate coefficient arrays and build a :class:`PolyODE`.

    Shorter arrays are zero-padded.  Raises :class:`DegreeViolation` if a cap
    is exceeded, if P vanishes identically, or if W is nonzero while
    deg Q <= deg W.
    """
    pp, qq, ww = _coerce("p", p), _coerce("q", q), _coerce("w", w)
    if _degree(pp) < 0:
        raise DegreeViolation("P vanishes identically")
    dq, dw = _degree(qq), _degree(ww)
    if dw >= 0 and dq <= dw:
        raise DegreeViolation(
            f"need deg Q > deg W, got deg Q = {dq if dq >= 0 else '-inf'}, "
            f"deg W = {dw}")
    return PolyODE(pp, qq, ww)


@dataclass(frozen=True)
class RootSet:
    """Roots of a candidate polynomial factor, in canonical order."""

    n: int
    roots: np.ndarray
    max_bethe_residual: float
    distinctness_gap: float
    iterations: int = field(default=0, compare=False)

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.roots.imag == 0.0))

    @property
    def is_distinct(self) -> bool:
        return self.distinctness_gap > DISTINCT_TOL

    def polynomial(self) -> np.ndarray:
        """Ascending coefficients of prod (x - x_j); real when the set is conjugate-closed."""
        c = npoly.polyfromroots(self.roots) if self.n else np.ones(1, complex)
        c = np.asarray(c, dtype=complex)
        if np.all(np.abs(c.imag) <= 1e-13 * np.maximum(1.0, np.abs(c.real))):
            return c.real.copy()
        return c

    def power_sum(self, k: int) -> complex:
        return complex(np.sum(self.roots ** k)) if self.n else 0.0


def _as_roots(roots) -> np.ndarray:
    if isinstance(roots, RootSet):
        return roots.roots
    return np.atleast_1d(np.asarray(roots, dtype=complex))


def _gap(x: np.ndarray) -> float:
    if x.size < 2:
        return float("inf")
    d = np.abs(x[:, None] - x[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def canonical_order(x: np.ndarray) -> np.ndarray:
    """Sort by real part, then imaginary part."""
    x = np.asarray(x, dtype=complex)
    idx = np.lexsort((x.imag, x.real))
    return x[idx]


def _symmetrize(x: np.ndarray) -> np.ndarray:
    """Snap near-real roots to the real axis and make conjugate pairs exact.

    Only applied when the set is conjugate-closed to within the match tolerance.
    """
    x = np.array(x, dtype=complex)
    tol = ROOT_MATCH_TOL * np.maximum(1.0, np.abs(x))
    near_real = np.abs(x.imag) <= tol
    x[near_real] = x[near_real].real
    rest = np.flatnonzero(~near_real)
    used = set()
    for i in rest:
        if i in used:
            continue
        partners = [j for j in rest if j != i and j not in used]
        if not partners:
            return canonical_order(x)
        j = min(partners, key=lambda k: abs(x[k] - np.conj(x[i])))
        if abs(x[j] - np.conj(x[i])) > tol[i]:
            return canonical_order(x)
        mid = 0.5 * (x[i] + np.conj(x[j]))
        x[i], x[j] = mid, np.conj(mid)
        used.update((i, j))
    return canonical_order(x)


def _pair_terms(x: np.ndarray, power: int) -> np.ndarray:
    """Matrix of 2 / (x_j - x_k)**power with a zero diagonal."""
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    out = 2.0 / diff ** power
    np.fill_diagonal(out, 0.0)
    return out


def _residual_vector(ode: PolyODE, x: np.ndarray) -> np.ndarray:
    Pv = npoly.polyval(x, ode.p)
    Qv = npoly.polyval(x, ode.q)
    return Qv / Pv + np.sum(_pair_terms(x, 1), axis=1)


def _check_poles(ode: PolyODE, x: np.ndarray) -> None:
    Pv = np.abs(npoly.polyval(x, ode.p))
    pscale = npoly.polyval(np.abs(x), np.abs(ode.p))
    bad = Pv < POLE_TOL * np.maximum(pscale, 1.0)
    if np.any(bad):
        raise SingularRoot(f"root(s) {x[bad]} coincide with zeros of P")


def bethe_residuals(ode: PolyODE, roots) -> np.ndarray:
    """Left-hand sides of the Bethe equations at the given roots.

    Entry j is Q(x_j)/P(x_j) + sum_{k != j} 2/(x_j - x_k).  Real input roots
    of a real ODE give a real array.
    """
    x = _as_roots(roots)
    if x.size == 0:
        return np.zeros(0)
    if _gap(x) <= DISTINCT_TOL:
        raise RootCollision("roots are not pairwise distinct")
    _check_poles(ode, x)
    res = _residual_vector(ode, x)
    if np.all(x.imag == 0.0):
        return res.real
    return res


def bethe_jacobian(ode: PolyODE, roots) -> np.ndarray:
    """Analytic Jacobian of :func:`bethe_residuals` with respect to the roots."""
    x = _as_roots(roots)
    n = x.size
    if n == 0:
        return np.zeros((0, 0))
    Pv = npoly.polyval(x, ode.p)
    Qv = npoly.polyval(x, ode.q)
    dP = npoly.polyval(x, ode.dp)
    dQ = npoly.polyval(x, ode.dq)
    off = _pair_terms(x, 2)
    J = off.astype(complex)
    J[np.diag_indices(n)] = (dQ * Pv - Qv * dP) / Pv ** 2 - off.sum(axis=1)
    if np.all(x.imag == 0.0):
        return J.real
    return J


def make_root_set(ode: PolyODE, roots, iterations: int = 0) -> RootSet:
    """Build a :class:`RootSet` with diagnostics; roots are canonically sorted."""
    x = canonical_order(_as_roots(roots))
    if x.size == 0:
        return RootSet(0, x, 0.0, float("inf"), iterations)
    gap = _gap(x)
    if gap <= DISTINCT_TOL:
        resid = float("inf")
    else:
        resid = float(np.max(np.abs(_residual_vector(ode, x))))
    return RootSet(x.size, x, resid, gap, iterations)


def _cleared(ode: PolyODE, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """G_j = P(x_j) * (Bethe residual j) and its Jacobian; no poles at zeros of P."""
    Pv = npoly.polyval(x, ode.p)
    Qv = npoly.polyval(x, ode.q)
    dP = npoly.polyval(x, ode.dp)
    dQ = npoly.polyval(x, ode.dq)
    s1 = np.sum(_pair_terms(x, 1), axis=1)
    off = _pair_terms(x, 2)
    J = Pv[:, None] * off
    J[np.diag_indices(x.size)] = dQ + dP * s1 - Pv * off.sum(axis=1)
    return Qv + Pv * s1, J


def _polish(ode: PolyODE, x: np.ndarray, fnorm: float, steps: int = 3) -> np.ndarray:
    """Full Newton steps kept only while they lower the residual."""
    for _ in range(steps):
        if fnorm == 0.0:
            break
        G, JG = _cleared(ode, x)
        try:
            trial = x + np.linalg.solve(JG, -G)
        except np.linalg.LinAlgError:
            break
        if _gap(trial) <= DISTINCT_TOL:
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            ft = np.max(np.abs(_residual_vector(ode, trial)))
        if not ft < fnorm:
            break
        x, fnorm = trial, ft
    return x


def newton_refine(ode: PolyODE, seed, *, tol: float = BETHE_TOL,
                  max_iters: int = 100) -> tuple[np.ndarray, int, bool]:
    """Damped Newton on the Bethe equations starting from ``seed``.

    Steps are taken on the pole-free form P(x_j) * residual_j, so iterates may
    cross zeros of P; convergence is judged on the residual itself.  A step is
    halved until the cleared residual decreases.  Returns
    ``(roots, iterations, converged)``; the seed is abandoned when two iterates
    collide.
    """
    x = np.array(_as_roots(seed), dtype=complex)
    for it in range(max_iters + 1):
        if _gap(x) <= DISTINCT_TOL:
            return x, it, False
        G, JG = _cleared(ode, x)
        gnorm = np.max(np.abs(G))
        if not np.isfinite(gnorm):
            return x, it, False
        with np.errstate(divide="ignore", invalid="ignore"):
            fnorm = np.max(np.abs(_residual_vector(ode, x)))
        if fnorm < tol:
            return _polish(ode, x, fnorm), it, True
        if it == max_iters:
            break
        try:
            step = np.linalg.solve(JG, -G)
        except np.linalg.LinAlgError:
            return x, it, False
        if not np.all(np.isfinite(step)):
            return x, it, False
        lam = 1.0
        # a step that must shrink below 2^-20 means the seed has stalled
        for _ in range(20):
            trial = x + lam * step
            if _gap(trial) > DISTINCT_TOL:
                Gt = _cleared(ode, trial)[0]
                if np.all(np.isfinite(Gt)) and np.max(np.abs(Gt)) < gnorm:
                    break
            lam *= 0.5
        else:
            return x, it, False
        x = trial
    return x, max_iters, False


def root_bracket(ode: PolyODE, n: int) -> float:
    """Radius of the disc in which seeds are placed, from coefficient magnitudes."""
    def cauchy(c):
        d = _degree(c)
        if d <= 0:
            return 0.0
        return 1.0 + float(np.max(np.abs(c[:d]) / abs(c[d])))

    radius = max(cauchy(ode.q), cauchy(ode.p), 1.0)
    dq, dp = ode.deg_q, ode.deg_p
    if dq >= 0 and dq - dp + 1 > 0:
        # far-field balance q_top x^(dq-dp) ~ 2n p_top / x
        balance = (2.0 * n * abs(ode.p[dp]) / abs(ode.q[dq])) ** (1.0 / (dq - dp + 1))
        radius = max(radius, balance)
    return 2.0 * radius


def _seed_family(ode: PolyODE, n: int, rng: np.random.Generator,
                 n_random: int) -> list[np.ndarray]:
    R = root_bracket(ode, n)
    seeds = []
    k = np.arange(n)
    cheb = np.cos(np.pi * (2 * k + 1) / (2 * n))
    for scale in (0.125, 0.25, 0.5, 1.0):
        seeds.append(scale * R * cheb + 0.0j)
        seeds.append(scale * R * (1 + cheb) / 2 + 0.0j)
        seeds.append(-scale * R * (1 + cheb) / 2 + 0.0j)
    for scale in (0.25, 0.5, 1.0):
        phase = np.pi * (k + 0.5) / n
        seeds.append(scale * R * np.exp(1j * (phase + np.pi / 7)))
        seeds.append(scale * R * np.exp(1j * (2 * phase + 0.3)))
    for _ in range(n_random):
        rad = R * np.sqrt(rng.uniform(0.0, 1.0, n))
        ang = rng.uniform(0.0, 2 * np.pi, n)
        seeds.append(rad * np.exp(1j * ang))
    return seeds


def solve_bethe_roots(ode: PolyODE, n: int, seeds=None, *, n_random: int | None = None,
                      rng_seed: int = 0, max_iters: int = 100) -> list[RootSet]:
    """Find Bethe root sets of size ``n`` by multistart damped Newton.

    ``seeds`` may be an iterable of length-n seed vectors; by default
    Chebyshev-spaced real seeds, circle seeds and random complex seeds inside
    :func:`root_bracket` are used.  Duplicates are merged and the result is
    sorted deterministically.  Raises :class:`NoConvergence` if no seed
    converges.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return [make_root_set(ode, [])]
    rng = np.random.default_rng(rng_seed)
    if seeds is None:
        if n_random is None:
            n_random = 30 + 15 * n
        seeds = _seed_family(ode, n, rng, n_random)
    found: list[RootSet] = []
    best = np.inf
    for seed in seeds:
        seed = np.asarray(seed, dtype=complex)
        if seed.size != n:
            raise ValueError(f"seed has {seed.size} entries, expected {n}")
        x, it, ok = newton_refine(ode, seed, max_iters=max_iters)
        if not ok:
            if np.all(np.isfinite(x)) and _gap(x) > DISTINCT_TOL:
                with np.errstate(all="ignore"):
                    r = np.max(np.abs(_residual_vector(ode, x)))
                if np.isfinite(r):
                    best = min(best, r)
            continue
        x = _symmetrize(x)
        x, it2, ok = newton_refine(ode, x, max_iters=5)
        if not ok:
            continue
        x = _symmetrize(x)
        rs = make_root_set(ode, x, it + it2)
        if rs.max_bethe_residual >= BETHE_TOL or not rs.is_distinct:
            continue
        tol = ROOT_MATCH_TOL * np.maximum(1.0, np.abs(rs.roots))
        if any(np.all(np.abs(rs.roots - o.roots) <= tol) for o in found):
            continue
        found.append(rs)
    if not found:
        raise NoConvergence(f"no seed converged for n={n}", best)
    found.sort(key=lambda s: tuple(itertools.chain.from_iterable(
        (round(v.real, 9), round(v.imag, 9)) for v in s.roots)))
    return found


@dataclass(frozen=True)
class ConstraintReport:
    """Mismatch between the measured w_k and the values forced by the roots.

    ``w_residuals[k]`` is (w_k - required_k) divided by a scale combining the
    magnitude of the terms in relation k and the overall coefficient scale.
    """

    w_residuals: np.ndarray
    raw_residuals: np.ndarray
    required_w: np.ndarray
    satisfied: bool

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.w_residuals)))


def required_w(ode: PolyODE, roots) -> tuple[np.ndarray, np.ndarray]:
    """Values of w_0..w_4 implied by the roots, and the per-relation term scale."""
    x = _as_roots(roots)
    n = x.size
    p, q = ode.p, ode.q
    s = [complex(np.sum(x ** k)) if n else 0.0 for k in range(5)]
    s[0] = float(n)
    # sum_{j<k} x_j x_k
    e2 = 0.5 * (s[1] ** 2 - s[2])
    terms = {
        4: [-n * q[5]],
        3: [-q[5] * s[1], -n * q[4]],
        2: [-q[5] * s[2], -q[4] * s[1], -n * (n - 1) * p[4], -n * q[3]],
        1: [-q[5] * s[3], -q[4] * s[2], -n * (n - 1) * p[3], -n * q[2],
            -(2 * (n - 1) * p[4] + q[3]) * s[1]],
        0: [-q[5] * s[4], -q[4] * s[3], -2 * p[4] * e2,
            -(q[3] + 2 * (n - 1) * p[4]) * s[2], -n * (n - 1) * p[2],
            -(2 * (n - 1) * p[3] + q[2]) * s[1], -n * q[1]],
    }
    req = np.array([sum(terms[k]) for k in range(5)], dtype=complex)
    mag = np.array([sum(abs(t) for t in terms[k]) for k in range(5)])
    return req, mag


def coefficient_constraints(ode: PolyODE, roots, *, tol: float = CONSTRAINT_TOL) -> ConstraintReport:
    """Check the five relations tying w_0..w_4 to power sums of the roots."""
    req, mag = required_w(ode, roots)
    raw = ode.w - req
    scale = np.maximum(mag + np.abs(ode.w), ode.scale)
    rel = raw / scale
    if np.all(np.abs(rel.imag) == 0.0):
        rel, raw, req = rel.real, raw.real, req.real
    return ConstraintReport(rel, raw, req, bool(np.all(np.abs(rel) < tol)))


def residual_polynomial(ode: PolyODE, roots) -> np.ndarray:
    """Ascending coefficients of P S'' + Q S' + W S with S = prod (x - x_j)."""
    x = _as_roots(roots)
    S = npoly.polyfromroots(x) if x.size else np.ones(1)
    S = np.asarray(S, dtype=complex)
    R = npoly.polyadd(npoly.polyadd(npoly.polymul(ode.p, npoly.polyder(S, 2)),
                                    npoly.polymul(ode.q, npoly.polyder(S))),
                      npoly.polymul(ode.w, S))
    return np.asarray(R)


def verify_polynomial_solution(ode: PolyODE, roots) -> float:
    """Largest absolute coefficient of P S'' + Q S' + W S."""
    return float(np.max(np.abs(residual_polynomial(ode, roots))))


def is_certified(ode: PolyODE, rs: RootSet) -> bool:
    """Bethe equations and coefficient relations both hold at tolerance."""
    if rs.n and (not rs.is_distinct or rs.max_bethe_residual >= BETHE_TOL):
        return False
    try:
        if rs.n:
            _check_poles(ode, rs.roots)
    except SingularRoot:
        return False
    return coefficient_constraints(ode, rs).satisfied


def linear_system(ode: PolyODE, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Residual of a monic degree-n polynomial as an affine map of its lower coefficients.

    With S = x^n + sum_{i<n} c_i x^i, the ascending coefficients of
    P S'' + Q S' + W S equal ``A @ c + rhs``.  Rows cover powers 0..n+4.
    """
    rows = n + 5
    full = np.zeros((rows + 1, n + 1))
    for i in range(n + 1):
        full[i:i + 5, i] += ode.w
        if i >= 1:
            full[i - 1:i + 5, i] += i * ode.q
        if i >= 2:
            full[i - 2:i + 3, i] += i * (i - 1) * ode.p
    return full[:rows, :n], full[:rows, n]


def active_rows(ode: PolyODE, n: int) -> int:
    """Number of low-order residual rows not already cancelled by the top relation."""
    top = n + max(ode.deg_p - 2, ode.deg_q - 1, ode.deg_w)
    return max(top, 0)
