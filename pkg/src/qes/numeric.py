"""Independent numerical checks of the radial equation.

Nothing here calls the Bethe solver or the closed-form energies: the FD
eigensolver and the residual evaluator only need the Laurent coefficients of
f(r) and the magnetic number m.

Radial operator:  L phi = -phi'' - phi'/r + (V - eps2) phi with
V = m^2/r^2 + r f' + 2 f + r^2 f^2 + 2 m f.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import NoConvergence, NotConfining

logger = logging.getLogger(__name__)


class HasLaurent(Protocol):
    m: int

    def laurent(self) -> np.ndarray: ...


@dataclass(frozen=True)
class RadialGrid:
    r_min: float
    r_max: float
    count: int
    spacing: str = "log"

    def __post_init__(self) -> None:
        if not (0 < self.r_min < self.r_max):
            raise ValueError("need 0 < r_min < r_max")
        if self.count < 16:
            raise ValueError("count must be at least 16")
        if self.spacing not in ("log", "uniform"):
            raise ValueError("spacing must be 'log' or 'uniform'")

    def points(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.r_min, self.r_max, self.count)
        return np.linspace(self.r_min, self.r_max, self.count)


DEFAULT_RESIDUAL_GRID = RadialGrid(1e-2, 10.0, 200, "log")
DEFAULT_FD_GRID = RadialGrid(1e-3, 15.0, 4000, "uniform")


def potential_terms(model: HasLaurent, r) -> np.ndarray:
    """The five pieces m^2/r^2, r f', 2f, r^2 f^2, 2 m f stacked along axis 0."""
    r = np.asarray(r, dtype=float)
    c = np.asarray(model.laurent(), dtype=float)
    f = sum(c[k] * r ** (-k) for k in range(c.size))
    df = sum(-k * c[k] * r ** (-k - 1) for k in range(1, c.size))
    m = model.m
    return np.stack([m * m / r ** 2, r * df, 2 * f, (r * f) ** 2, 2 * m * f])


def effective_potential(model: HasLaurent, r) -> np.ndarray:
    return potential_terms(model, r).sum(axis=0)


_FD_STEP = 1e-2


def radial_residual(model: HasLaurent, sampler: Callable, epsilon_squared: float,
                    grid: RadialGrid | None = None, *, step: str = "adaptive",
                    derivatives: str = "fd", profile: bool = False):
    """Maximum relative residual of L phi on the grid.

    Derivatives are taken in x = ln r with the 5-point stencil.  ``step``
    selects the stencil width: ``"adaptive"`` scales it with the local
    wavenumber, ``"grid"`` uses the grid spacing.  ``derivatives="analytic"``
    uses ``sampler.derivatives`` instead.

    The relative residual at a point is |r^2 L phi| divided by
    |phi_xx| + r^2 (sum |V pieces| + |eps2|) * amp, where amp combines |phi|
    and |phi_x| / kappa so that nodes of phi do not produce 0/0.  Points
    where amp is below 1e-30 of its maximum are skipped.
    """
    grid = grid or DEFAULT_RESIDUAL_GRID
    r = grid.points()
    pieces = np.abs(potential_terms(model, r)).sum(axis=0) + abs(epsilon_squared)
    V = effective_potential(model, r)
    kappa = np.sqrt(1.0 + r * r * pieces)

    if derivatives == "analytic":
        with np.errstate(over="ignore", invalid="ignore"):
            phi, d1, d2 = sampler.derivatives(r)
            phi_x = r * d1
            phi_xx = r * r * d2 + r * d1
    elif derivatives == "fd":
        if step == "adaptive":
            delta = _FD_STEP / kappa
        elif step == "grid":
            if grid.spacing == "log":
                delta = np.full_like(r, math.log(grid.r_max / grid.r_min) / (grid.count - 1))
            else:
                delta = ((grid.r_max - grid.r_min) / (grid.count - 1)) / r
        else:
            raise ValueError(f"unknown step mode {step!r}")
        with np.errstate(over="ignore", invalid="ignore"):
            s = [np.asarray(sampler(r * np.exp(k * delta))) for k in (-2, -1, 0, 1, 2)]
            phi = s[2]
            phi_x = (s[0] - 8 * s[1] + 8 * s[3] - s[4]) / (12 * delta)
            phi_xx = (-s[0] + 16 * s[1] - 30 * s[2] + 16 * s[3] - s[4]) / (12 * delta ** 2)
    else:
        raise ValueError(f"unknown derivative mode {derivatives!r}")

    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(phi_x)) and np.all(np.isfinite(phi_xx))):
        logger.debug("radial_residual: non-finite wavefunction samples")
        worst = math.inf
        return (worst, r, np.full_like(r, math.inf)) if profile else worst
    lhs = -phi_xx + r * r * (V - epsilon_squared) * phi
    amp = np.sqrt(np.abs(phi) ** 2 + np.abs(phi_x / kappa) ** 2)
    keep = amp > 1e-30 * np.max(amp) if np.max(amp) > 0 else np.zeros_like(amp, bool)
    denom = np.abs(phi_xx) + r * r * pieces * amp
    rel = np.zeros_like(r)
    rel[keep] = np.abs(lhs[keep]) / denom[keep]
    worst = float(np.max(rel)) if np.any(keep) else 0.0
    if profile:
        return worst, r, rel
    return worst


@dataclass(frozen=True)
class SpectrumEstimate:
    """Ascending eps2 estimates with Richardson error bars."""

    eigenvalues: np.ndarray
    richardson_error: np.ndarray
    discretization: dict = field(default_factory=dict)

    def contains(self, value: float, rtol: float = 1e-4) -> bool:
        """True if some eigenvalue lies within rtol * max(1, |value|) of ``value``."""
        tol = rtol * max(1.0, abs(value))
        return bool(np.any(np.abs(self.eigenvalues - value) <= tol))

    def nearest(self, value: float) -> tuple[int, float]:
        i = int(np.argmin(np.abs(self.eigenvalues - value)))
        return i, float(self.eigenvalues[i] - value)


def _wall_radius(model: HasLaurent, r_lo: float, r_hi: float, v_cap: float) -> float:
    """Largest r below the potential minimum where the singular wall reaches v_cap."""
    probe = np.geomspace(r_lo, r_hi, 4000)
    U = effective_potential(model, probe) - 0.25 / probe ** 2
    imin = int(np.argmin(U))
    above = np.flatnonzero(U[:imin + 1] >= v_cap)
    if above.size == 0:
        return r_lo
    return float(probe[above[-1]])


def _tridiagonal_levels(model: HasLaurent, r_lo: float, r_hi: float, intervals: int,
                        k: int) -> np.ndarray:
    h = (r_hi - r_lo) / intervals
    r = r_lo + h * np.arange(1, intervals)
    U = effective_potential(model, r) - 0.25 / r ** 2
    diag = 2.0 / h ** 2 + U
    off = np.full(r.size - 1, -1.0 / h ** 2)
    return eigh_tridiagonal(diag, off, eigvals_only=True, select="i",
                            select_range=(0, k - 1))


def fd_eigensolve(model: HasLaurent, grid: RadialGrid | None = None, k: int = 1, *,
                  v_cap: float = 1e6, confinement_rtol: float = 1e-6) -> SpectrumEstimate:
    """Lowest ``k`` eps2 eigenvalues of the radial operator by finite differences.

    chi = sqrt(r) phi turns the operator into -chi'' + (V - 1/(4 r^2)) chi.
    Dirichlet ends; the inner end moves out to where the singular wall
    reaches ``v_cap``.  Three grids with halved spacing are combined by
    two-level Richardson extrapolation (h^2 then h^4).
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    grid = grid or DEFAULT_FD_GRID
    r_lo = _wall_radius(model, grid.r_min, grid.r_max, v_cap)
    r_hi = grid.r_max
    base = grid.count + 1
    lam = [_tridiagonal_levels(model, r_lo, r_hi, base * 2 ** j, k) for j in range(3)]
    r1 = (4 * lam[1] - lam[0]) / 3
    r1b = (4 * lam[2] - lam[1]) / 3
    r2 = (16 * r1b - r1) / 15
    err = np.abs(r2 - r1b)

    stretched = 1.25 * r_hi
    h = (r_hi - r_lo) / base
    wide = _tridiagonal_levels(model, r_lo, stretched, int(round((stretched - r_lo) / h)), 1)
    drift = abs(wide[0] - lam[0][0])
    if drift > confinement_rtol * max(1.0, abs(lam[0][0])):
        raise NotConfining(
            f"lowest eigenvalue moves by {drift:.3g} when r_max grows to {stretched:g}")
    order = np.argsort(r2)
    return SpectrumEstimate(r2[order], err[order], {
        "r_min": r_lo, "r_max": r_hi, "intervals": [base * 2 ** j for j in range(3)],
        "v_cap": v_cap, "raw": [l[order] for l in lam]})


# Gauss-Kronrod 7/15 nodes on [-1, 1] (positive half) and weights.
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[1:14:2] = np.concatenate([_WG[:-1], _WG[::-1]])


def _gk15(fun: Callable, lo: float, hi: float) -> tuple[float, float]:
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    vals = np.asarray(fun(mid + half * _NODES), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NoConvergence("integrand is not finite inside the window")
    kron = half * float(vals @ _KW)
    gauss = half * float(vals @ _GW)
    return kron, abs(kron - gauss)


def quadrature(integrand: Callable, window: tuple[float, float], *, rtol: float = 1e-10,
               atol: float = 0.0, max_intervals: int = 5000, initial: int = 16,
               require_decay: bool = False) -> float:
    """Adaptive Gauss-Kronrod (7, 15) integration with a global error queue.

    An infinite upper limit is handled with r = lo + t / (1 - t).  With
    ``require_decay`` a finite window is treated as a truncation of a longer
    integral, so the integrand must be negligible at its ends.  Stalls and
    exhausted subdivisions raise :class:`NoConvergence`.
    """
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ValueError("window must satisfy lo < hi")
    if math.isinf(hi):
        def fun(t):
            t = np.asarray(t, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                return integrand(lo + t / (1 - t)) / (1 - t) ** 2
        a, b = 0.0, 1.0
    else:
        fun, a, b = integrand, lo, hi

    edges = np.linspace(a, b, initial + 1)
    heap: list[tuple[float, float, float, float]] = []
    total = 0.0
    err_total = 0.0
    for x0, x1 in zip(edges[:-1], edges[1:]):
        val, err = _gk15(fun, x0, x1)
        heapq.heappush(heap, (-err, x0, x1, val))
        total += val
        err_total += err
    count = initial
    while err_total > max(rtol * abs(total), atol):
        if count >= max_intervals:
            raise NoConvergence(f"quadrature did not converge in {max_intervals} intervals",
                                err_total)
        neg, x0, x1, val = heapq.heappop(heap)
        xm = 0.5 * (x0 + x1)
        if not (x0 < xm < x1) or (x1 - x0) < 1e-15 * max(1.0, abs(xm)):
            raise NoConvergence("quadrature stalled on an unresolved interval", err_total)
        v0, e0 = _gk15(fun, x0, xm)
        v1, e1 = _gk15(fun, xm, x1)
        total += v0 + v1 - val
        err_total += e0 + e1 + neg
        heapq.heappush(heap, (-e0, x0, xm, v0))
        heapq.heappush(heap, (-e1, xm, x1, v1))
        count += 1
        if count % 256 == 0:
            # resum to shed accumulated rounding
            total = sum(item[3] for item in heap)
            err_total = sum(-item[0] for item in heap)

    total = sum(item[3] for item in heap)
    if require_decay and math.isfinite(hi):
        scale = 10 * rtol * max(abs(total), atol)
        tail_hi = abs(float(np.asarray(integrand(np.array([hi])))[0])) * (hi - lo)
        tail_lo = abs(float(np.asarray(integrand(np.array([lo])))[0])) * max(lo, 0.0) if lo > 0 else 0.0
        if tail_hi > scale or tail_lo > scale:
            raise NoConvergence("integrand has not decayed at the window ends")
    return float(total)
