"""Solve one quartic-family model end to end and cross-check it three ways.

1. calibrate e so that levels n = 0, 1, 2 are quasi-exact,
2. evaluate the radial residual of the assembled wavefunction,
3. locate the same eps^2 in the finite-difference spectrum,
4. compare the closed-form norm with adaptive quadrature.

Usage: python demos/quartic_walkthrough.py
"""

from __future__ import annotations

import numpy as np

from qes import PotentialModel, calibrate, fd_eigensolve, radial_residual
from qes.models import assemble_wavefunction, norm_integral

template = PotentialModel("quartic", a=-1.0, b=0.5)

for n in range(3):
    for res in calibrate(template, "plain", n, "e", (-10.0, -1e-3)):
        sol = res.solution
        eps2 = sol.epsilon_squared
        resid = radial_residual(res.model, assemble_wavefunction(sol), eps2)
        idx, diff = fd_eigensolve(res.model, k=n + 3).nearest(eps2)
        closed, quad = norm_integral(sol, "closed_form"), norm_integral(sol, "quadrature")
        roots = np.array2string(sol.roots.roots.real, precision=6)
        print(f"n={n}  e={res.model.e:+.10f}  E^2={sol.energy_squared:.10f}  roots t={roots}")
        print(f"      residual {resid:.1e}   FD level {idx} off by {diff:+.1e}   "
              f"norm closed/quad - 1 = {closed / quad - 1:+.1e}")
