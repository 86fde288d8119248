from __future__ import annotations

from dataclasses import dataclass

import pytest

from qes.models import PotentialModel


@dataclass(frozen=True)
class Cell:
    label: str
    template: PotentialModel
    case: str
    free: tuple[str, ...]
    window: tuple[tuple[float, float], ...]


P = PotentialModel

# One calibration setup per family/case: fixed coefficients plus the free ones and their windows.
CELLS = (
    Cell("cubic/oscillator", P("cubic", a=-1.0), "oscillator", ("d", "e"), ((-1, 0.99), (-3, 3))),
    Cell("cubic/coulomb", P("cubic", b=-1.0, d=0.2), "coulomb", ("e",), ((-10, -1e-3),)),
    Cell("quartic/plain", P("quartic", a=-1.0, b=0.5), "plain", ("e",), ((-10, -1e-3),)),
    Cell("quintic/oscillator", P("quintic", a=-1.0), "oscillator", ("d", "e", "f", "g"),
         ((0, 2.99), (-3, 3), (-3, 3), (-3, -1e-3))),
    Cell("quintic/coulomb", P("quintic", b=-1.0, d=1.0), "coulomb", ("e", "f", "g"),
         ((-3, 3), (-3, 3), (-3, -1e-3))),
    Cell("sextic/plain", P("sextic", a=-1.0, d=0.3), "plain", ("f", "h"),
         ((-10, 10), (-10, -1e-3))),
)

CELL_BY_LABEL = {c.label: c for c in CELLS}


@pytest.fixture(scope="session")
def cells():
    return CELL_BY_LABEL


@pytest.fixture
def quartic_ground():
    from qes.models import solve_level

    model = PotentialModel("quartic", a=-1.0, b=0.5, e=-0.5)
    return solve_level(model, "plain", 0)[0]
