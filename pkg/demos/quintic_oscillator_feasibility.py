"""Why the quintic oscillator branch has no normalizable quasi-exact level.

With a = -1 (any a < 0 scales to this), the reduced ODE in r is

    P = r^4,  Q = -2g - 2f r - 2e r^2 + (7 - 2 l) r^3 + 2a r^5,
    W = -2f - (4e + 4ag) r + (9 - 4af - 6l) r^2 - 4ae r^3 - 2an r^4,

with l = m + d.  A polynomial S of degree n exists only if every coefficient
of P S'' + Q S' + W S vanishes.  The script eliminates the unknowns with a
Groebner basis and prints what survives.  Normalizability needs g < 0 and
3 - l > 0.

Usage: python demos/quintic_oscillator_feasibility.py [max_level]
"""

from __future__ import annotations

import sys

import numpy as np
import sympy as sp

r, e, f, g, l = sp.symbols("r e f g l")
a = -1


def equations(n: int):
    cs = sp.symbols(f"c0:{n}") if n else ()
    S = r ** n + sum(c * r ** k for k, c in enumerate(cs))
    P = r ** 4
    Q = -2 * g - 2 * f * r - 2 * e * r ** 2 + (7 - 2 * l) * r ** 3 + 2 * a * r ** 5
    W = (-2 * f - (4 * e + 4 * a * g) * r + (9 - 4 * a * f - 6 * l) * r ** 2
         - 4 * a * e * r ** 3 - 2 * a * n * r ** 4)
    expr = sp.expand(P * sp.diff(S, r, 2) + Q * sp.diff(S, r) + W * S)
    return [c for c in sp.Poly(expr, r).all_coeffs() if c != 0], cs


def main(max_level: int = 2) -> None:
    for n in range(max_level + 1):
        eqs, cs = equations(n)
        basis = sp.groebner(eqs, *cs, e, f, g, l, order="lex")
        print(f"n = {n}: {len(eqs)} equations in {len(cs)} root coefficients")
        # the last basis elements involve only the model parameters
        tail = [b for b in basis.exprs if not b.free_symbols & set(cs)]
        for b in tail:
            print("   ", sp.factor(b), "= 0")
        # branch on the real values of l, then collect the real g every g-l element allows
        gl = [b for b in tail if b.free_symbols <= {g, l}]
        for lv in sorted(set(sp.real_roots(sp.Poly(gl[-1], l)))):
            allowed = None
            for b in gl:
                coeffs = [complex(c) for c in sp.Poly(b.subs(l, lv), g).all_coeffs()]
                if all(abs(c) < 1e-12 for c in coeffs):
                    continue
                roots = [z.real for z in np.roots(coeffs) if abs(z.imag) < 1e-9]
                allowed = roots if allowed is None else [
                    x for x in allowed if any(abs(x - y) < 1e-7 for y in roots)]
            gs = sorted({float(round(x, 10)) + 0.0 for x in allowed}) if allowed is not None else ["any"]
            ok = "3 - l > 0" if 3 - lv > 0 else "3 - l <= 0, excluded"
            print(f"    l = {float(lv):.6g} ({ok}): real g in {gs}")
        print()


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 2)
