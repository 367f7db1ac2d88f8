"""Double-well tunneling splittings at dx = 1e-3 next to the reference column.

Run: python demos/table_one.py   (about 0.3 s per row)
"""
from selectrelax import DoubleWell, splitting

REFERENCE = {0.5: 2.4637, 1: 2.1769, 2: 1.5752, 3: 9.7115e-1, 4: 4.6242e-1, 5: 1.5947e-1,
             6: 4.1398e-2, 7: 8.6531e-3, 8: 1.5164e-3, 9: 2.2792e-4, 10: 2.9821e-5,
             11: 3.4338e-6, 12: 3.5093e-7}

print("lambda        T_rel       reference   rel. diff")
for lam, ref in REFERENCE.items():
    s = splitting(DoubleWell(lam), 1e-3)
    print(f"{lam:6g}  {s.T_rel:.8e}  {ref:.4e}  {s.T_rel / ref - 1:+.1e}")
