"""Limits in which a higher inverse-power family collapses onto a lower one.

quintic -> cubic when f, g -> 0, and sextic -> quartic when h -> 0 (with the
sextic d, f playing the quartic b, e).  Three measurements per path step:

* the FD spectral distance between the shrunk higher model and the lower model,
* the deviation of the extra envelope factor from 1 on a fixed grid,
* the distance between the closed-form level sets, with the best index shift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ExponentViolation
from .models import Case, Family, PotentialModel, reduce
from .numeric import RadialGrid, fd_eigensolve

ENVELOPE_GRID = RadialGrid(0.5, 10.0, 200, "log")
_EXTRA = {Family.QUINTIC: ("f", "g"), Family.SEXTIC: ("h",)}


def lower_model(higher: PotentialModel) -> PotentialModel:
    """The lower-family model obtained by dropping the extra coefficients."""
    if higher.family is Family.QUINTIC:
        return PotentialModel(Family.CUBIC, a=higher.a, b=higher.b, d=higher.d, e=higher.e,
                              M=higher.M, m=higher.m)
    if higher.family is Family.SEXTIC:
        return PotentialModel(Family.QUARTIC, a=higher.a, b=higher.d, e=higher.f,
                              M=higher.M, m=higher.m)
    raise ValueError("degeneration is defined for the quintic and sextic families")


def shrink(higher: PotentialModel, scale: float) -> PotentialModel:
    """Multiply the extra coefficients by ``scale``."""
    return higher.replace(**{k: scale * getattr(higher, k) for k in _EXTRA[higher.family]})


def _case_pair(higher: PotentialModel, case: Case | str | None) -> tuple[Case, Case]:
    if higher.family is Family.SEXTIC:
        return Case.PLAIN, Case.PLAIN
    case = Case(case) if case is not None else (Case.COULOMB if higher.a == 0 else Case.OSCILLATOR)
    return case, case


def qes_levels(model: PotentialModel, case: Case | str, levels: int) -> np.ndarray:
    """Closed-form E^2 for n = 0..levels-1 (NaN where the exponent condition fails)."""
    out = np.full(levels, np.nan)
    for n in range(levels):
        try:
            red = reduce(model, case, n)
        except ExponentViolation:
            continue
        out[n] = model.M ** 2 + red.epsilon_squared
    return out


def set_distance(higher: np.ndarray, lower: np.ndarray, max_shift: int = 4) -> tuple[int, float]:
    """Best integer shift s with higher[n] ~ lower[n + s] and the max deviation there."""
    best = (0, np.inf)
    for s in range(-max_shift, max_shift + 1):
        diffs = [abs(higher[n] - lower[n + s]) for n in range(higher.size)
                 if 0 <= n + s < lower.size and np.isfinite(higher[n]) and np.isfinite(lower[n + s])]
        if len(diffs) < max(1, higher.size - max_shift):
            continue
        d = max(diffs)
        if d < best[1] - 1e-14 or (abs(d - best[1]) <= 1e-14 and abs(s) < abs(best[0])):
            best = (s, d)
    return best


@dataclass(frozen=True)
class DegenerationStep:
    scale: float
    coefficients: dict
    spectral_distance: float
    richardson_error: float
    envelope_deviation: float
    qes_distance: float
    qes_shift: int


@dataclass(frozen=True)
class DegenerationReport:
    higher: PotentialModel
    lower: PotentialModel
    shift: int
    endpoint_distance: float
    steps: tuple[DegenerationStep, ...] = field(default_factory=tuple)

    @property
    def spectral_distances(self) -> np.ndarray:
        return np.array([s.spectral_distance for s in self.steps])

    @property
    def monotone(self) -> bool:
        d = self.spectral_distances
        return bool(np.all(np.diff(d) < 0))


def envelope_deviation(model: PotentialModel, grid: RadialGrid = ENVELOPE_GRID) -> float:
    """max |exp(extra tail) - 1| on the grid."""
    r = grid.points()
    if model.family is Family.QUINTIC:
        extra = model.f / (2 * r ** 2) + model.g / (3 * r ** 3)
    else:
        extra = model.h / (4 * r ** 4)
    return float(np.max(np.abs(np.expm1(extra))))


def degeneration_check(higher: PotentialModel, limit_path, *, case: Case | str | None = None,
                       levels: int = 3, fd_grid: RadialGrid | None = None) -> DegenerationReport:
    """Compare ``higher`` shrunk by each factor of ``limit_path`` with its lower family.

    The factors multiply the extra coefficients (f, g or h).  The endpoint
    (factor 0) fixes the reported shift and closed-form set distance.
    """
    hcase, lcase = _case_pair(higher, case)
    low = lower_model(higher)
    lower_qes = qes_levels(low, lcase, levels + 4)
    lower_fd = fd_eigensolve(low, fd_grid, k=levels)
    steps = []
    for s in limit_path:
        model = shrink(higher, float(s))
        spectrum = fd_eigensolve(model, fd_grid, k=levels)
        dist = float(np.max(np.abs(spectrum.eigenvalues - lower_fd.eigenvalues)))
        err = float(np.max(spectrum.richardson_error + lower_fd.richardson_error))
        shift, qd = set_distance(qes_levels(model, hcase, levels), lower_qes)
        steps.append(DegenerationStep(float(s), model.coefficients(), dist, err,
                                      envelope_deviation(model), qd, shift))
    shift, endpoint = set_distance(qes_levels(shrink(higher, 0.0), hcase, levels), lower_qes)
    return DegenerationReport(higher, low, shift, endpoint, tuple(steps))
