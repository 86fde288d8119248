"""Which cubic-oscillator levels admit a polynomial solution at all.

Reduced ODE in r (a = -1, alpha = 1 - m - d):

    r^2 S'' + (-2e + (2 alpha + 1) r + 2a r^3) S' + (2 alpha - 1 - 4ae r - 2an r^2) S = 0.

Solving the coefficient equations for (roots, e, alpha) shows that n = 1
only works at alpha = 0, e = 0 with the root on the pole r = 0, while n = 2
has the real family alpha = 1/2, e = 0.

Usage: python demos/cubic_oscillator_levels.py
"""

from __future__ import annotations

import sympy as sp

r, e, alpha = sp.symbols("r e alpha")
a = -1

for n in (0, 1, 2):
    cs = sp.symbols(f"c0:{n}") if n else ()
    S = r ** n + sum(c * r ** k for k, c in enumerate(cs))
    Q = -2 * e + (2 * alpha + 1) * r + 2 * a * r ** 3
    W = (2 * alpha - 1) - 4 * a * e * r - 2 * a * n * r ** 2
    expr = sp.expand(r ** 2 * sp.diff(S, r, 2) + Q * sp.diff(S, r) + W * S)
    eqs = [c for c in sp.Poly(expr, r).all_coeffs() if c != 0]
    print(f"n = {n}:")
    for sol in sp.solve(eqs, [*cs, e, alpha], dict=True):
        real = all(v.is_real for v in sol.values())
        usable = real and sol[alpha] > 0
        roots = sp.Poly(S.subs(sol), r).nroots() if n else []
        print(f"    {sol}  roots {roots}  {'usable' if usable else 'rejected'}")
