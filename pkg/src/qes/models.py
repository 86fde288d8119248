"""Generalized Dirac oscillator with inverse-power couplings f(r).

The lower spinor component phi(r) e^{-i m theta} obeys

    -phi'' - phi'/r + V(r) phi = eps2 phi,
    V = m^2/r^2 + r f' + 2 f + r^2 f^2 + 2 m f,    eps2 = E^2 - M^2.

Factoring out r^exponent and an exponential tail leaves a polynomial-coefficient
ODE in x = r (cubic, quintic) or x = r^2 (quartic, sextic) that is handed to
:mod:`qes.bethe`.
"""

from __future__ import annotations

import cmath
import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import bethe
from .bethe import ConstraintReport, PolyODE, RootSet
from .errors import (
    CaseMismatch,
    EnergyDegenerate,
    EvaluationDomain,
    ExponentViolation,
    NonNormalizable,
)

SPINOR_TOL = 1e-8


class Family(str, Enum):
    CUBIC = "cubic"
    QUARTIC = "quartic"
    QUINTIC = "quintic"
    SEXTIC = "sextic"


class Case(str, Enum):
    """Tail regime: Gaussian (``a`` drives decay), exponential (``B`` does), or the single regime."""

    OSCILLATOR = "oscillator"
    COULOMB = "coulomb"
    PLAIN = "plain"


# Power k of r^{-k} carried by each coefficient, per family.
LAURENT_SLOTS: dict[Family, dict[str, int]] = {
    Family.CUBIC: {"a": 0, "b": 1, "d": 2, "e": 3},
    Family.QUARTIC: {"a": 0, "b": 2, "e": 4},
    Family.QUINTIC: {"a": 0, "b": 1, "d": 2, "e": 3, "f": 4, "g": 5},
    Family.SEXTIC: {"a": 0, "d": 2, "f": 4, "h": 6},
}

ALLOWED_CASES: dict[Family, tuple[Case, ...]] = {
    Family.CUBIC: (Case.OSCILLATOR, Case.COULOMB),
    Family.QUARTIC: (Case.PLAIN,),
    Family.QUINTIC: (Case.OSCILLATOR, Case.COULOMB),
    Family.SEXTIC: (Case.PLAIN,),
}

COEFFICIENT_NAMES = ("a", "b", "d", "e", "f", "g", "h")


def family_coefficients(family: Family | str) -> tuple[str, ...]:
    return tuple(LAURENT_SLOTS[Family(family)])


@dataclass(frozen=True)
class PotentialModel:
    """One inverse-power family with its coefficients, mass ``M`` and magnetic number ``m``."""

    family: Family
    a: float = 0.0
    b: float = 0.0
    d: float = 0.0
    e: float = 0.0
    f: float = 0.0
    g: float = 0.0
    h: float = 0.0
    M: float = 1.0
    m: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        used = LAURENT_SLOTS[self.family]
        for name in COEFFICIENT_NAMES:
            value = float(getattr(self, name))
            object.__setattr__(self, name, value)
            if not math.isfinite(value):
                raise ValueError(f"coefficient {name} is not finite")
            if name not in used and value != 0.0:
                raise ValueError(
                    f"coefficient {name} is not part of the {self.family.value} family")
        if not (math.isfinite(self.M) and self.M > 0):
            raise ValueError("mass M must be positive")
        if int(self.m) != self.m:
            raise ValueError("magnetic quantum number m must be an integer")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "M", float(self.M))

    def laurent(self) -> np.ndarray:
        """Coefficients c_k of f(r) = sum_k c_k r^{-k}, k = 0..6."""
        c = np.zeros(7)
        for name, k in LAURENT_SLOTS[self.family].items():
            c[k] = getattr(self, name)
        return c

    def coefficients(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in LAURENT_SLOTS[self.family]}

    def replace(self, **changes) -> "PotentialModel":
        return dataclasses.replace(self, **changes)

    def coupling(self, r) -> np.ndarray:
        """f(r)."""
        r = np.asarray(r, dtype=float)
        c = self.laurent()
        return sum(c[k] * r ** (-k) for k in range(7))

    def potential(self, r) -> np.ndarray:
        """Effective potential V(r) of the radial equation (without eps2)."""
        r = np.asarray(r, dtype=float)
        c = self.laurent()
        fv = sum(c[k] * r ** (-k) for k in range(7))
        dfv = sum(-k * c[k] * r ** (-k - 1) for k in range(1, 7))
        return self.m ** 2 / r ** 2 + r * dfv + 2 * fv + r ** 2 * fv ** 2 + 2 * self.m * fv


@dataclass(frozen=True)
class Tail:
    """Exponent T(r) = A r^2 + B r + D/r + F/r^2 + G/r^3 + H/r^4 of the factored envelope."""

    A: float = 0.0
    B: float = 0.0
    D: float = 0.0
    F: float = 0.0
    G: float = 0.0
    H: float = 0.0

    def _inverse(self) -> tuple[tuple[int, float], ...]:
        return ((1, self.D), (2, self.F), (3, self.G), (4, self.H))

    def value(self, r):
        r = np.asarray(r, dtype=float)
        out = self.A * r ** 2 + self.B * r
        for k, c in self._inverse():
            if c:
                out = out + c * r ** (-k)
        return out

    def d1(self, r):
        r = np.asarray(r, dtype=float)
        out = 2 * self.A * r + self.B
        for k, c in self._inverse():
            if c:
                out = out - k * c * r ** (-k - 1)
        return out

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        out = 2 * self.A + 0 * r
        for k, c in self._inverse():
            if c:
                out = out + k * (k + 1) * c * r ** (-k - 2)
        return out


@dataclass(frozen=True)
class ReducedProblem:
    """Result of extracting r^exponent and exp(tail) from the lower component."""

    model: PotentialModel
    case: Case
    n: int
    exponent: float
    tail: Tail
    lambdas: dict
    ode: PolyODE
    radial_variable: str
    epsilon_squared: float

    @property
    def uses_r_squared(self) -> bool:
        return self.radial_variable == "r^2"

    def variable(self, r):
        r = np.asarray(r, dtype=float)
        return r ** 2 if self.uses_r_squared else r


def _check_case(model: PotentialModel, case: Case) -> Case:
    case = Case(case)
    if case not in ALLOWED_CASES[model.family]:
        raise CaseMismatch(f"{model.family.value} family has no {case.value} case")
    if case is Case.OSCILLATOR and model.b != 0.0:
        raise CaseMismatch("the oscillator case requires b = 0")
    if case is Case.COULOMB and model.a != 0.0:
        raise CaseMismatch("the Coulomb case requires a = 0")
    return case


def _positive_exponent(value: float, label: str, strict: bool = True) -> float:
    if strict and not value > 0:
        raise ExponentViolation(f"leading exponent {label} = {value:g} must be positive")
    return value


def reduce(model: PotentialModel, case: Case | str, n: int, *,
           strict: bool = True) -> ReducedProblem:
    """Build the polynomial-coefficient ODE for level ``n``.

    The top-degree relation is solved here: it fixes eps2 (and B in the
    Coulomb case), so that deg W < deg Q as required by the Bethe machinery.
    ``strict=False`` skips the exponent-positivity check (used when the ODE
    is only needed as an algebraic function of the coefficients).
    """
    if n < 0 or int(n) != n:
        raise ValueError("level n must be a non-negative integer")
    n = int(n)
    case = _check_case(model, case)
    a, b, d, e, f, g, h = (model.a, model.b, model.d, model.e, model.f, model.g, model.h)
    m = model.m
    fam = model.family

    if fam is Family.CUBIC:
        alpha = _positive_exponent(1 - m - d, "1 - m - d", strict)
        lam1 = 1 + 2 * m + 2 * d
        lambdas = {"lambda_1": lam1}
        if case is Case.OSCILLATOR:
            eps2 = -2 * a * (2 * alpha + n - 1)
            tail = Tail(A=a / 2, D=e)
            ode = bethe.make_poly_ode([0, 0, 1], [-2 * e, 2 * alpha + 1, 0, 2 * a],
                                      [2 * alpha - 1, -4 * a * e, -2 * a * n])
        else:
            B = lam1 * b / (1 + 2 * alpha + 2 * n)
            eps2 = b * b - B * B
            tail = Tail(B=B, D=e)
            ode = bethe.make_poly_ode([0, 0, 1], [-2 * e, 2 * alpha + 1, 2 * B],
                                      [2 * alpha - 1 - 2 * e * (B + b),
                                       (2 * alpha + 1) * B - lam1 * b])
        return ReducedProblem(model, case, n, alpha, tail, lambdas, ode, "r", eps2)

    if fam is Family.QUARTIC:
        lam2 = 1 - m - b
        expo = _positive_exponent(1 + lam2, "2 - m - b", strict)
        eps2 = -4 * a * (n + lam2)
        ode = bethe.make_poly_ode([0, 0, 4], [-4 * e, 4 * (2 + lam2), 4 * a],
                                  [4 * (lam2 - a * e), eps2 + 4 * a * lam2])
        return ReducedProblem(model, case, n, expo, Tail(A=a / 2, F=e / 2),
                              {"lambda_2": lam2}, ode, "r^2", eps2)

    if fam is Family.QUINTIC:
        lam3 = m + d
        eta = _positive_exponent(3 - lam3, "3 - m - d", strict)
        q_low = [-2 * g, -2 * f, -2 * e, 7 - 2 * lam3]
        if case is Case.OSCILLATOR:
            eps2 = -2 * a * (n + 3 - 2 * lam3)
            tail = Tail(A=a / 2, D=e, F=f / 2, G=g / 3)
            ode = bethe.make_poly_ode(
                [0, 0, 0, 0, 1], q_low + [0, 2 * a],
                [-2 * f, -4 * e - 4 * a * g, 9 - 4 * a * f - 6 * lam3, -4 * a * e,
                 eps2 + 6 * a - 4 * a * lam3])
            lambdas = {"lambda_3": lam3}
        else:
            B = b * (1 + 2 * lam3) / (7 + 2 * n - 2 * lam3)
            lam4 = B + b
            eps2 = b * b - B * B
            tail = Tail(B=B, D=e, F=f / 2, G=g / 3)
            ode = bethe.make_poly_ode(
                [0, 0, 0, 0, 1], q_low + [2 * B],
                [-2 * f - 2 * g * lam4, -4 * e - 2 * f * lam4, 9 - 6 * lam3 - 2 * e * lam4,
                 (7 - 2 * lam3) * B - b * (1 + 2 * lam3)])
            lambdas = {"lambda_3": lam3, "lambda_4": lam4}
        return ReducedProblem(model, case, n, eta, tail, lambdas, ode, "r", eps2)

    lam = m + d
    beta = _positive_exponent(4 - lam, "4 - m - d", strict)
    eps2 = -4 * a * (n + 2 - lam)
    ode = bethe.make_poly_ode([0, 0, 0, 4], [-4 * h, -4 * f, 4 * (beta + 1), 4 * a],
                              [-4 * (f + a * h), 16 - 8 * lam - 4 * a * f,
                               8 * a - 4 * a * lam + eps2])
    return ReducedProblem(model, case, n, beta, Tail(A=a / 2, F=f / 2, H=h / 4),
                          {"lambda": lam}, ode, "r^2", eps2)


def energy_squared(model: PotentialModel, case: Case | str, n: int,
                   reduced: ReducedProblem | None = None) -> float:
    """E^2 = M^2 + eps2 with eps2 taken from the relations the reduced ODE enforces."""
    if reduced is None:
        reduced = reduce(model, case, n)
    return model.M ** 2 + reduced.epsilon_squared


def printed_energy_squared(model: PotentialModel, case: Case | str, n: int) -> float:
    """Closed-form spectrum as published, kept for comparison with :func:`energy_squared`."""
    case = _check_case(model, case)
    M2, a, b, m, d = model.M ** 2, model.a, model.b, model.m, model.d
    fam = model.family
    if fam is Family.CUBIC:
        alpha = 1 - m - d
        if case is Case.OSCILLATOR:
            return M2 - 2 * a * (2 * alpha - 1 + n)
        return M2 + (1 - ((3 - 2 * alpha) / (1 + 2 * n + 2 * alpha)) ** 2) * b * b
    if fam is Family.QUARTIC:
        return M2 - 4 * a * (n + 1 - m - b)
    if fam is Family.QUINTIC:
        lam3 = m + d
        if case is Case.OSCILLATOR:
            return M2 - 2 * a * (3 + n - 2 * lam3)
        return M2 + (6 + 2 * n - 4 * lam3) ** 2 * b * b / (7 + 2 * n - 2 * lam3) ** 2
    return M2 - 4 * a * (n + 2 - m - d)


@dataclass(frozen=True)
class Relation:
    """A named parameter relation lhs = rhs evaluated at a root set."""

    name: str
    lhs: complex
    rhs: complex
    scale: float

    @property
    def residual(self) -> float:
        return float(abs(self.lhs - self.rhs) / max(self.scale, 1.0))

    @property
    def satisfied(self) -> bool:
        return self.residual < bethe.CONSTRAINT_TOL


def _rel(name: str, lhs_terms: Sequence, rhs_terms: Sequence) -> Relation:
    lhs = complex(sum(lhs_terms))
    rhs = complex(sum(rhs_terms))
    scale = float(sum(abs(t) for t in lhs_terms) + sum(abs(t) for t in rhs_terms))
    if lhs.imag == 0 and rhs.imag == 0:
        lhs, rhs = lhs.real, rhs.real
    return Relation(name, lhs, rhs, scale)


def family_constraints(model: PotentialModel, case: Case | str, n: int, roots) -> list[Relation]:
    """Evaluate the family's parameter relations at the given roots.

    Roots are in the family's reduced variable (r, or r^2 for quartic and sextic).
    The energy relation is implied by :func:`reduce` and is not repeated.
    """
    red = reduce(model, case, n)
    x = bethe._as_roots(roots)
    if x.size != n:
        raise ValueError(f"expected {n} roots, got {x.size}")
    s = [complex(np.sum(x ** k)) for k in range(5)]
    e2 = 0.5 * (s[1] ** 2 - s[2])
    a, b, e, f, g, h = model.a, model.b, model.e, model.f, model.g, model.h
    fam = model.family
    if fam is Family.CUBIC:
        alpha = red.exponent
        if red.case is Case.OSCILLATOR:
            return [
                _rel("sum_r", [4 * a * e], [2 * a * s[1]]),
                _rel("sum_r2", [2 * a * s[2], (2 * alpha + n - 1) * (n + 1)], [0.0]),
            ]
        B = red.tail.B
        lam1 = red.lambdas["lambda_1"]
        return [
            _rel("B", [(1 + 2 * alpha + 2 * n) * B], [lam1 * b]),
            _rel("sum_r", [(2 * alpha + n - 1) * (n + 1), 2 * B * s[1]],
                 [2 * e * b, 2 * e * B]),
        ]
    if fam is Family.QUARTIC:
        lam2 = red.lambdas["lambda_2"]
        return [_rel("sum_t", [a * s[1], (n + 1) * (n + lam2)], [a * e])]
    if fam is Family.QUINTIC:
        lam3 = red.lambdas["lambda_3"]
        c5 = 5 + 2 * n - 2 * lam3
        if red.case is Case.OSCILLATOR:
            return [
                _rel("sum_r", [2 * a * s[1]], [4 * a * e]),
                _rel("sum_r2", [2 * a * s[2], (n + 3) * (n + 3 - 2 * lam3)], [4 * a * f]),
                _rel("sum_r3", [2 * a * s[3], c5 * s[1]], [2 * e * (n + 2), 4 * a * g]),
                _rel("sum_r4", [2 * a * s[4], c5 * s[2], 2 * e2],
                     [2 * e * s[1], 2 * f * (1 + n)]),
            ]
        B = red.tail.B
        lam4 = red.lambdas["lambda_4"]
        return [
            _rel("B", [(7 + 2 * n - 2 * lam3) * B], [b * (1 + 2 * lam3)]),
            _rel("sum_r", [2 * B * s[1], (n + 3) * (3 + n - 2 * lam3)], [2 * e * lam4]),
            _rel("sum_r2", [2 * B * s[2], c5 * s[1]],
                 [2 * (n + 2) * e, 2 * lam4 * f]),
            _rel("sum_r3", [2 * B * s[3], c5 * s[2], 2 * e2],
                 [2 * (n + 1) * f, 2 * g * lam4, 2 * e * s[1]]),
        ]
    lam = red.lambdas["lambda"]
    return [
        _rel("sum_z", [a * s[1], (n + 2) * (n + 2 - lam)], [a * f]),
        _rel("sum_z2", [a * s[2], (2 * n + 3 - lam) * s[1]], [(n + 1) * f, a * h]),
    ]


@dataclass(frozen=True)
class RadialSampler:
    """phi(r) = scale * r^exponent * S(x(r)) * exp(tail(r)); S given by ascending coefficients."""

    exponent: float
    tail: Tail
    coefficients: np.ndarray
    r_squared: bool = False
    scale: float = 1.0

    def _check(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(~(r > 0)):
            raise EvaluationDomain("the radial sampler is defined for r > 0 only")
        return r

    def _parts(self, r):
        x = r ** 2 if self.r_squared else r
        c = self.coefficients
        S = npoly.polyval(x, c)
        Sx = npoly.polyval(x, npoly.polyder(c)) if c.size > 1 else 0 * x
        Sxx = npoly.polyval(x, npoly.polyder(c, 2)) if c.size > 2 else 0 * x
        if self.r_squared:
            Sr, Srr = 2 * r * Sx, 4 * r * r * Sxx + 2 * Sx
        else:
            Sr, Srr = Sx, Sxx
        with np.errstate(under="ignore"):
            env = self.scale * np.exp(self.exponent * np.log(r) + self.tail.value(r))
        return S, Sr, Srr, env

    def __call__(self, r):
        r = self._check(r)
        S, _, _, env = self._parts(r)
        return _real_if_close(env * S)

    def derivatives(self, r):
        """Analytic (phi, phi', phi'')."""
        r = self._check(r)
        S, Sr, Srr, env = self._parts(r)
        L = self.exponent / r + self.tail.d1(r)
        dL = -self.exponent / r ** 2 + self.tail.d2(r)
        g0, g1, g2 = env, env * L, env * (L * L + dL)
        return (_real_if_close(g0 * S), _real_if_close(g1 * S + g0 * Sr),
                _real_if_close(g2 * S + 2 * g1 * Sr + g0 * Srr))

    def scaled(self, factor: float) -> "RadialSampler":
        return dataclasses.replace(self, scale=self.scale * factor)


def _real_if_close(z):
    z = np.asarray(z)
    if np.iscomplexobj(z) and np.all(np.abs(z.imag) <= 1e-12 * np.maximum(np.abs(z.real), 1e-300)):
        return z.real
    return z


@dataclass(frozen=True)
class QuasiExactSolution:
    """A closed-form level: energy, Bethe roots and every consistency diagnostic."""

    level: int
    energy_squared: float
    epsilon_squared: float
    roots: RootSet
    constraint_report: ConstraintReport
    relations: tuple[Relation, ...]
    reduced: ReducedProblem
    printed_energy_squared: float
    polynomial_residual: float = field(default=0.0)

    @property
    def model(self) -> PotentialModel:
        return self.reduced.model

    @property
    def case(self) -> Case:
        return self.reduced.case

    @property
    def max_relation_residual(self) -> float:
        return max((rel.residual for rel in self.relations), default=0.0)

    @property
    def max_constraint_residual(self) -> float:
        return max(self.constraint_report.max_residual, self.max_relation_residual)

    @property
    def certified(self) -> bool:
        return (bethe.is_certified(self.reduced.ode, self.roots)
                and all(rel.satisfied for rel in self.relations))

    @property
    def physical(self) -> bool:
        """Real roots and non-negative E^2."""
        return bool(self.roots.is_real and self.energy_squared >= 0)


def _candidate_roots(ode: PolyODE, n: int) -> list[np.ndarray]:
    """Roots of the best polynomial solution of the linear coefficient system."""
    if n == 0:
        return [np.zeros(0, complex)]
    A, rhs = bethe.linear_system(ode, n)
    c, *_ = np.linalg.lstsq(A, -rhs, rcond=None)
    coeffs = np.concatenate([c, [1.0]])
    return [np.roots(coeffs[::-1]).astype(complex)]


def build_solution(reduced: ReducedProblem, roots: RootSet) -> QuasiExactSolution:
    model = reduced.model
    return QuasiExactSolution(
        level=reduced.n,
        energy_squared=model.M ** 2 + reduced.epsilon_squared,
        epsilon_squared=reduced.epsilon_squared,
        roots=roots,
        constraint_report=bethe.coefficient_constraints(reduced.ode, roots),
        relations=tuple(family_constraints(model, reduced.case, reduced.n, roots)),
        reduced=reduced,
        printed_energy_squared=printed_energy_squared(model, reduced.case, reduced.n),
        polynomial_residual=bethe.verify_polynomial_solution(reduced.ode, roots),
    )


def solve_level(model: PotentialModel, case: Case | str, n: int, *,
                seeds=None, rng_seed: int = 0) -> list[QuasiExactSolution]:
    """All root sets found for level ``n``, certified ones first.

    The polynomial solution of the linear coefficient system seeds Newton
    first; multistart seeds follow.  Uncertified entries are kept so a caller
    can report why a level fails.
    """
    reduced = reduce(model, case, n)
    ode = reduced.ode
    if n == 0:
        return [build_solution(reduced, bethe.make_root_set(ode, []))]
    found: list[RootSet] = []
    direct = list(seeds) if seeds is not None else _candidate_roots(ode, n)
    try:
        found.extend(bethe.solve_bethe_roots(ode, n, seeds=direct))
    except (bethe.NoConvergence, ValueError):
        pass
    if not any(bethe.is_certified(ode, rs) for rs in found):
        try:
            for rs in bethe.solve_bethe_roots(ode, n, rng_seed=rng_seed):
                tol = bethe.ROOT_MATCH_TOL * np.maximum(1.0, np.abs(rs.roots))
                if not any(np.all(np.abs(rs.roots - o.roots) <= tol) for o in found):
                    found.append(rs)
        except bethe.NoConvergence:
            pass
    sols = [build_solution(reduced, rs) for rs in found]
    sols.sort(key=lambda s: (not s.certified, s.max_constraint_residual))
    return sols


def assemble_wavefunction(solution: QuasiExactSolution) -> RadialSampler:
    """Lower-component radial function with the e^{-i m theta} phase factored out."""
    red = solution.reduced
    coeffs = solution.roots.polynomial()
    return RadialSampler(red.exponent, red.tail, np.asarray(coeffs), red.uses_r_squared)


def _energy(solution: QuasiExactSolution) -> complex:
    E = cmath.sqrt(solution.energy_squared)
    M = solution.model.M
    if abs(E - M) <= SPINOR_TOL * M:
        raise EnergyDegenerate("E = M: the upper component is undefined")
    return E


def upper_radial(solution: QuasiExactSolution,
                 lower: Callable | None = None) -> Callable[[np.ndarray], np.ndarray]:
    """u(r) with upper component = -i e^{-i(m+1) theta} u(r).

    u = (phi' - m phi / r - r f phi) / (E - M), E = +sqrt(E^2).
    """
    E = _energy(solution)
    model = solution.model
    denom = E - model.M
    sampler = lower if lower is not None else assemble_wavefunction(solution)

    def u(r):
        r = np.asarray(r, dtype=float)
        if hasattr(sampler, "derivatives"):
            phi, dphi, _ = sampler.derivatives(r)
        else:
            phi = sampler(r)
            dphi = np.zeros_like(phi)
        val = (dphi - model.m * phi / r - r * model.coupling(r) * phi) / denom
        return _real_if_close(val)

    return u


def assemble_spinor(solution: QuasiExactSolution, r, theta,
                    lower: Callable | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(upper, lower) complex spinor components at (r, theta)."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    sampler = lower if lower is not None else assemble_wavefunction(solution)
    u = upper_radial(solution, sampler)(r)
    m = solution.model.m
    lower_v = sampler(r) * np.exp(-1j * m * theta)
    upper_v = -1j * np.exp(-1j * (m + 1) * theta) * u
    return upper_v, lower_v


def check_normalizable(reduced: ReducedProblem) -> None:
    """Raise :class:`NonNormalizable` unless |phi|^2 r decays at both ends."""
    t = reduced.tail
    if t.A != 0:
        if t.A > 0:
            raise NonNormalizable("Gaussian tail grows: need a < 0")
    elif t.B != 0:
        if t.B > 0:
            raise NonNormalizable("exponential tail grows: need B < 0")
    else:
        raise NonNormalizable("no decaying tail at large r")
    for label, c in (("r^-4", t.H), ("r^-3", t.G), ("r^-2", t.F), ("r^-1", t.D)):
        if c != 0:
            if c > 0:
                raise NonNormalizable(f"envelope diverges at the origin ({label} coefficient > 0)")
            return


def _product_coefficients(solution: QuasiExactSolution) -> np.ndarray:
    c = np.asarray(solution.roots.polynomial())
    sq = npoly.polymul(c, np.conj(c))
    return np.real_if_close(sq, tol=1e6).real


def _closed_form_norm(solution: QuasiExactSolution) -> float:
    from scipy.special import gamma, kv

    red = solution.reduced
    sq = _product_coefficients(solution)
    p0 = 2 * red.exponent + 1
    t = red.tail
    total = 0.0
    if red.model.family is Family.CUBIC and red.case is Case.COULOMB:
        mu1, mu2 = -2 * t.B, -2 * t.D
        for k, c in enumerate(sq):
            p = p0 + k
            if mu2 == 0:
                total += c * gamma(p + 1) / mu1 ** (p + 1)
            else:
                total += c * 2 * (mu2 / mu1) ** ((p + 1) / 2) * kv(p + 1, 2 * math.sqrt(mu1 * mu2))
        return float(total)
    if red.model.family is Family.QUARTIC:
        mu1, mu2 = -2 * t.A, -2 * t.F
        for k, c in enumerate(sq):
            nu = p0 + 2 * k
            if mu2 == 0:
                total += c * gamma((nu + 1) / 2) / (2 * mu1 ** ((nu + 1) / 2))
            else:
                total += c * (mu2 / mu1) ** ((nu + 1) / 4) * kv((nu + 1) / 2, 2 * math.sqrt(mu1 * mu2))
        return float(total)
    raise NotImplementedError


def has_closed_form_norm(reduced: ReducedProblem) -> bool:
    return (reduced.model.family is Family.QUARTIC
            or (reduced.model.family is Family.CUBIC and reduced.case is Case.COULOMB))


def norm_integral(solution: QuasiExactSolution, method: str = "quadrature") -> float:
    """Integral of |phi|^2 r dr over (0, inf)."""
    check_normalizable(solution.reduced)
    if method == "closed_form" and has_closed_form_norm(solution.reduced):
        return _closed_form_norm(solution)
    if method not in ("closed_form", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    from .numeric import quadrature

    sampler = assemble_wavefunction(solution)
    return quadrature(lambda r: np.abs(sampler(r)) ** 2 * r, (0.0, math.inf))


def normalization_constant(solution: QuasiExactSolution, method: str = "quadrature") -> float:
    """N such that N * phi has unit norm under the measure r dr."""
    value = norm_integral(solution, method)
    if not (value > 0 and math.isfinite(value)):
        raise NonNormalizable(f"norm integral is {value}")
    return 1.0 / math.sqrt(value)
