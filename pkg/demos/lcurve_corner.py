"""L-curve of a single Tikhonov sweep on a blurred image.

Solves with D = I for every lambda on the grid and writes the
(log residual, log seminorm, curvature) table to ``lcurve.csv``.

    python demos/lcurve_corner.py [n]
"""

import sys

from edgemg import RunConfig, make_problem, run
from edgemg.lcurve import write_lcurve_csv

n = int(sys.argv[1]) if len(sys.argv) > 1 else 32
p = make_problem("blur", n, 0.02, seed=0)
res = run(p.A, p.b, n, config=RunConfig(max_outer=1), x_true=p.x_true)
o = res.outer[0]
for pt in o.lcurve.points:
    mark = "  <- corner" if pt.grid_index == o.chosen_index else ""
    print(f"{pt.grid_index:3d}  lambda {pt.lam:9.3g}  residual {pt.resid_norm:10.4g}  "
          f"seminorm {pt.constraint_norm:10.4g}{mark}")
write_lcurve_csv("lcurve.csv", o.lcurve)
print(f"corner at lambda {o.chosen_lambda:.3g}, relative error {o.rel_error:.4f}; wrote lcurve.csv")
