"""Tabulate how the quintic and sextic spectra approach their lower families.

Prints, per shrink factor, the FD spectral distance, its ratio to the factor
(flat once the response is linear) and the envelope deviation.

Usage: python demos/degeneration_table.py
"""

from __future__ import annotations

from qes import PotentialModel, degeneration_check

PATH = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
MODELS = {
    "quintic -> cubic": PotentialModel("quintic", a=-1.0, d=0.3, e=-0.2, f=-0.5, g=-0.4),
    "sextic -> quartic": PotentialModel("sextic", a=-1.0, d=0.3, f=-0.4, h=-0.5),
}

for label, model in MODELS.items():
    rep = degeneration_check(model, PATH)
    print(f"{label}: index shift {rep.shift:+d}, endpoint distance {rep.endpoint_distance:.1e}")
    print(f"  {'scale':>8} {'distance':>12} {'distance/scale':>15} {'envelope':>10}")
    for s in rep.steps:
        print(f"  {s.scale:8.0e} {s.spectral_distance:12.4e} {s.spectral_distance / s.scale:15.4f} "
              f"{s.envelope_deviation:10.2e}")
    print()
