"""Recover the five Morse levels (mu = 0.2) with one scan and refine each.

Run: python demos/morse_spectrum.py
"""
import numpy as np

from selectrelax import Morse, RelaxConfig, auto_domain, relax, scan_spectrum
from selectrelax.oracle import morse_levels

spec = Morse(0.2)
scan = scan_spectrum(spec, (-1.0, 0.0), 64, 1e-2, max_iter=30)
exact = morse_levels(0.2)
print(f"{len(scan.clusters)} levels from 64 selecting energies "
      f"({100 * scan.converged_fraction:.0f}% converged)")
print(" n   basin (scan energies)      E_rel(dx=1e-3)      exact     err/dx^2")
for n, c in enumerate(scan.clusters):
    r = relax(RelaxConfig(E=c.E_n, dx=1e-3, domain=auto_domain(spec, c.E_n), max_iter=30), spec)
    print(f"{n:2d}  [{c.gamma_lo:+.4f}, {c.gamma_hi:+.4f}]  {r.E_rel:+.10f}  "
          f"{exact[n]:+.4f}  {(r.E_rel - exact[n]) / 1e-6:+.5f}")
