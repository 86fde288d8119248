"""Find potential coefficients for which a given level is quasi-exactly solvable.

For fixed coefficients the monic polynomial factor S of degree n solves a
linear system A(p) c = -rhs(p) whose active rows outnumber the unknowns by
k = deg Q - 1.  The free coefficients p are found by

* a sign-change scan of the normalized determinant of the square system when
  one coefficient is free and k = 1, refined with ``brentq``;
* multistart Levenberg-Marquardt on the joint unknowns (p, c) otherwise.

When the ODE coefficients are affine in p (true for e, f, g, h and most
choices of d) the residual and its Jacobian are assembled from a fixed linear
representation; otherwise p-derivatives are taken by finite differences.
Every candidate is then passed through the Bethe solver and certified.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.stats import qmc

from . import bethe
from .errors import ExponentViolation, FreeParameterUnbounded
from .models import (
    Case,
    PotentialModel,
    QuasiExactSolution,
    family_coefficients,
    reduce,
    solve_level,
)

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = (-5.0, 5.0)
FIT_TOL = 1e-11


@dataclass(frozen=True)
class CalibrationResult:
    model: PotentialModel
    solution: QuasiExactSolution

    @property
    def roots(self):
        return self.solution.roots


def _normalize_free(template: PotentialModel, free) -> tuple[str, ...]:
    names = (free,) if isinstance(free, str) else tuple(free)
    if not names:
        raise ValueError("at least one free coefficient is required")
    allowed = family_coefficients(template.family)
    for name in names:
        if name not in allowed:
            raise ValueError(f"{name!r} is not a coefficient of the {template.family.value} family")
    if len(set(names)) != len(names):
        raise ValueError("free coefficients must be distinct")
    return names


def _normalize_window(names: Sequence[str], window) -> np.ndarray:
    if window is None:
        box = np.array([DEFAULT_WINDOW] * len(names), dtype=float)
    else:
        box = np.asarray(window, dtype=float)
        if box.ndim == 1:
            box = box[None, :]
        if box.shape != (len(names), 2):
            raise FreeParameterUnbounded(
                f"window must give one (lo, hi) pair per free coefficient {names}")
    if not np.all(np.isfinite(box)) or np.any(box[:, 0] >= box[:, 1]):
        raise FreeParameterUnbounded(f"invalid scan window {box.tolist()}")
    return box


def _coefficient_vector(ode: bethe.PolyODE) -> np.ndarray:
    return np.concatenate([ode.p, ode.q, ode.w])


def _system_from_vector(vec: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    p, q, w = vec[:5], vec[5:11], vec[11:16]
    rows = n + 5
    full = np.zeros((rows + 1, n + 1))
    for i in range(n + 1):
        full[i:i + 5, i] += w
        if i >= 1:
            full[i - 1:i + 5, i] += i * q
        if i >= 2:
            full[i - 2:i + 3, i] += i * (i - 1) * p
    return full[:rows, :n], full[:rows, n]


class _Problem:
    """Residual maps over the free coefficients for one template, case and level."""

    def __init__(self, template: PotentialModel, case: Case, n: int,
                 names: tuple[str, ...], box: np.ndarray):
        self.template, self.case, self.n, self.names = template, Case(case), n, names
        self.box = box
        center = box.mean(axis=1)
        ode = self._probe_ode(center)
        self.rows = bethe.active_rows(ode, n)
        self.k = ode.deg_q - 1
        self.scale = float(max(np.max(np.abs(ode.p)), np.max(np.abs(ode.q)), 1e-300))
        self.affine = self._detect_affine(center)

    def _probe_ode(self, center) -> bethe.PolyODE:
        pts = [center] + list(qmc.scale(qmc.Sobol(len(self.names), seed=1).random(16),
                                        self.box[:, 0], self.box[:, 1]))
        for p in pts:
            try:
                return reduce(self.model(p), self.case, self.n).ode
            except ExponentViolation:
                continue
        raise FreeParameterUnbounded("no point of the window satisfies the exponent condition")

    def model(self, p) -> PotentialModel:
        return self.template.replace(**{k: float(v) for k, v in zip(self.names, p)})

    def vector(self, p) -> np.ndarray:
        return _coefficient_vector(reduce(self.model(p), self.case, self.n).ode)

    def _detect_affine(self, center):
        # Exponent checks are skipped here: the map is algebraic in p.
        def raw(p):
            return _raw_vector(self.template, self.case, self.n, self.names, p)

        try:
            v0 = raw(center)
            width = self.box[:, 1] - self.box[:, 0]
            cols = []
            for i in range(len(self.names)):
                step = np.zeros(len(self.names))
                step[i] = 0.25 * width[i]
                cols.append((raw(center + step) - raw(center - step)) / (0.5 * width[i]))
            Phi = np.column_stack(cols)
            rng = np.random.default_rng(7)
            for _ in range(3):
                p = rng.uniform(self.box[:, 0], self.box[:, 1])
                pred = v0 + Phi @ (p - center)
                if np.max(np.abs(raw(p) - pred)) > 1e-10 * max(1.0, np.max(np.abs(v0))):
                    return None
        except (ZeroDivisionError, FloatingPointError, ValueError):
            return None
        return center, v0, Phi

    def residual(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Scaled active residual rows and their Jacobian in z = (p, c)."""
        k = len(self.names)
        p, c = z[:k], z[k:]
        cm = np.concatenate([c, [1.0]])
        if self.affine is not None:
            center, v0, Phi = self.affine
            A, rhs = _system_from_vector(v0 + Phi @ (p - center), self.n)
            r = (A @ c + rhs)[:self.rows]
            Jp = np.empty((self.rows, k))
            for i in range(k):
                Ai, bi = _system_from_vector(Phi[:, i], self.n)
                Jp[:, i] = (np.column_stack([Ai, bi]) @ cm)[:self.rows]
        else:
            A, rhs = _system_from_vector(self.vector(p), self.n)
            r = (A @ c + rhs)[:self.rows]
            Jp = np.empty((self.rows, k))
            for i in range(k):
                h = 1e-7 * max(1.0, abs(p[i]))
                pp = p.copy()
                pp[i] += h
                Ah, bh = _system_from_vector(self.vector(pp), self.n)
                Jp[:, i] = ((Ah @ c + bh)[:self.rows] - r) / h
        J = np.column_stack([Jp, A[:self.rows]])
        return r / self.scale, J / self.scale

    def determinant(self, p: float) -> float:
        """Determinant of the square [A | rhs] with columns scaled to unit-or-larger norm."""
        try:
            A, rhs = _system_from_vector(self.vector([p]), self.n)
        except ExponentViolation:
            return math.nan
        Mx = np.column_stack([A, rhs])[:self.rows] / self.scale
        if Mx.shape[0] != Mx.shape[1]:
            raise ValueError("determinant scan needs a square system")
        norms = np.maximum(np.linalg.norm(Mx, axis=0), 1.0)
        return float(np.linalg.det(Mx / norms))

    def projected_norm(self, p) -> float:
        """Norm of the residual of the best monic polynomial at coefficients p."""
        A, rhs = _system_from_vector(self.vector(p), self.n)
        A, rhs = A[:self.rows] / self.scale, rhs[:self.rows] / self.scale
        if A.shape[1] == 0:
            return float(np.linalg.norm(rhs))
        c, *_ = np.linalg.lstsq(A, -rhs, rcond=None)
        return float(np.linalg.norm(A @ c + rhs))


def _raw_vector(template, case, n, names, p) -> np.ndarray:
    """ODE coefficients without the exponent-positivity check."""
    model = template.replace(**{k: float(v) for k, v in zip(names, p)})
    return _coefficient_vector(reduce(model, case, n, strict=False).ode)


def _levenberg_marquardt(prob: _Problem, z: np.ndarray, max_iter: int = 60):
    """Minimize |residual|^2; returns (z, residual norm)."""
    try:
        r, J = prob.residual(z)
    except ExponentViolation:
        return z, math.inf
    cost = float(r @ r)
    first = cost
    lam = 1e-3
    for it in range(max_iter):
        if math.sqrt(cost) < 1e-15:
            break
        if it == 20 and cost > 1e-6 * first:
            break
        g = J.T @ r
        H = J.T @ J
        d = np.diag(H) + 1e-12
        while True:
            try:
                step = np.linalg.solve(H + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                return z, math.sqrt(cost)
            zn = z + step
            try:
                rn, Jn = prob.residual(zn)
                cn = float(rn @ rn)
            except ExponentViolation:
                cn = math.inf
            if np.isfinite(cn) and cn < cost:
                z, r, J, cost = zn, rn, Jn, cn
                lam = max(lam * 0.1, 1e-12)
                break
            lam *= 10.0
            if lam > 1e12:
                return z, math.sqrt(cost)
    return z, math.sqrt(cost)


def _root_seed(rng: np.random.Generator, n: int) -> np.ndarray:
    radii = np.exp(rng.uniform(math.log(0.2), math.log(20.0), n))
    roots = radii * rng.choice([-1.0, 1.0], n)
    return np.poly(roots)[::-1][:-1] if n else np.zeros(0)


def _multistart(prob: _Problem, starts: int, seed: int) -> list[np.ndarray]:
    box = prob.box
    dim = box.shape[0]
    # Sobol balance needs a power-of-two draw; keep the first ``starts`` points.
    draw = qmc.Sobol(dim, scramble=True, seed=seed).random_base2(max(0, math.ceil(math.log2(starts))))
    pts = qmc.scale(draw[:starts], box[:, 0], box[:, 1])
    rng = np.random.default_rng(seed)
    found: list[np.ndarray] = []
    for j, p0 in enumerate(pts):
        if j % 4 == 3 and prob.n:
            try:
                A, rhs = _system_from_vector(prob.vector(p0), prob.n)
                c0 = np.linalg.lstsq(A[:prob.rows], -rhs[:prob.rows], rcond=None)[0]
            except ExponentViolation:
                c0 = _root_seed(rng, prob.n)
        else:
            c0 = _root_seed(rng, prob.n)
        z, res = _levenberg_marquardt(prob, np.concatenate([p0, c0]))
        p = z[:dim]
        if not (res < FIT_TOL and np.all(np.isfinite(z))):
            continue
        if np.any(p < box[:, 0]) or np.any(p > box[:, 1]):
            continue
        if any(np.all(np.abs(p - q) <= 1e-7 * np.maximum(1, np.abs(q))) for q in found):
            continue
        found.append(p)
    return found


def _scan_roots(prob: _Problem, points: int) -> list[np.ndarray]:
    lo, hi = prob.box[0]
    xs = np.linspace(lo, hi, points)
    ys = np.array([prob.determinant(x) for x in xs])
    found = []
    for i in range(points - 1):
        y0, y1 = ys[i], ys[i + 1]
        if not (np.isfinite(y0) and np.isfinite(y1)):
            continue
        if y0 == 0.0:
            found.append(float(xs[i]))
        elif y0 * y1 < 0:
            found.append(brentq(prob.determinant, xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15,
                                maxiter=200))
    if ys[-1] == 0.0:
        found.append(float(xs[-1]))
    return [np.array([v]) for v in found]


def constraint_profile(template: PotentialModel, case: Case | str, n: int, free: str,
                       values, window=None) -> np.ndarray:
    """Constraint residual along a one-parameter scan.

    Signed normalized determinant when the square scan applies, otherwise the
    norm of the projected residual.  NaN where the exponent condition fails.
    """
    names = _normalize_free(template, free)
    if len(names) != 1:
        raise ValueError("a profile needs exactly one free coefficient")
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (float(np.min(values)), float(np.max(values)))
    prob = _Problem(template, case, n, names, _normalize_window(names, window))
    out = np.empty(values.size)
    for i, v in enumerate(values):
        if prob.k == 1:
            out[i] = prob.determinant(v)
        else:
            try:
                out[i] = prob.projected_norm([v])
            except ExponentViolation:
                out[i] = math.nan
    return out


def calibrate(template: PotentialModel, case: Case | str, n: int, free="e",
              window=None, *, points: int = 400, starts: int = 96, seed: int = 0,
              jobs: int = 1) -> list[CalibrationResult]:
    """Coefficient values making level ``n`` quasi-exactly solvable.

    ``free`` names one coefficient or a sequence of them; ``window`` gives a
    (lo, hi) pair per free coefficient.  Returns certified results sorted by
    the free values, possibly empty.
    """
    case = Case(case)
    names = _normalize_free(template, free)
    box = _normalize_window(names, window)
    if n < 0:
        raise ValueError("level must be non-negative")
    prob = _Problem(template, case, n, names, box)
    if len(names) == 1 and prob.k == 1:
        candidates = _scan_roots(prob, points)
    else:
        candidates = _multistart(prob, starts, seed)

    def certify(p):
        model = prob.model(np.where(np.abs(p) < 1e-13, 0.0, p))
        try:
            sols = solve_level(model, case, n)
        except (ExponentViolation, bethe.NoConvergence):
            return []
        return [CalibrationResult(model, s) for s in sols if s.certified]

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            batches = list(pool.map(certify, candidates))
    else:
        batches = [certify(p) for p in candidates]
    results: list[CalibrationResult] = []
    for batch in batches:
        for res in batch:
            key = np.array([getattr(res.model, nm) for nm in names])
            if any(np.all(np.abs(key - np.array([getattr(o.model, nm) for nm in names]))
                          <= 1e-7 * np.maximum(1, np.abs(key)))
                   and res.roots.n == o.roots.n
                   and np.allclose(res.roots.roots, o.roots.roots, rtol=1e-7, atol=1e-7)
                   for o in results):
                continue
            results.append(res)
    results.sort(key=lambda res: tuple(getattr(res.model, nm) for nm in names))
    logger.debug("calibrate %s/%s n=%d free=%s: %d result(s)", template.family.value,
                 case.value, n, names, len(results))
    return results
