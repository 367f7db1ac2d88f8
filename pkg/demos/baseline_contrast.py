"""Plain imaginary-time relaxation always falls to the ground state;
selective relaxation lands on the level nearest the selecting energy.

Run: python demos/baseline_contrast.py
"""
from selectrelax import Harmonic, RelaxConfig, heat_relax_baseline, relax

spec = Harmonic(1.0)
print("   E    heat baseline   selective")
for E in (0.9, 2.9, 4.9, 7.2, 9.1):
    h = heat_relax_baseline(RelaxConfig(E=E, dx=1e-2, max_iter=400), spec)
    s = relax(RelaxConfig(E=E, dx=1e-2), spec)
    print(f"{E:5.1f}  {h.E_rel:12.6f}  {s.E_rel:10.6f}")
