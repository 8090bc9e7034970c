"""Average inner iterations per outer step for several V-cycle variants.

More pre-relaxation costs more per cycle but should need fewer FGMRES
iterations.  Small sizes keep this quick.

    python demos/cycle_comparison.py [n] [kind]
"""

import sys

from edgemg import RunConfig, make_problem, run

n = int(sys.argv[1]) if len(sys.argv) > 1 else 32
kind = sys.argv[2] if len(sys.argv) > 2 else "tomo_full"
p = make_problem(kind, n, 0.01, seed=0)

for nu1, nu2 in [(0, 1), (1, 1), (2, 1), (2, 2)]:
    res = run(p.A, p.b, n, config=RunConfig(nu1=nu1, nu2=nu2, max_outer=8))
    avgs = " ".join(f"{o.avg_iterations:6.1f}" for o in res.outer)
    print(f"V({nu1},{nu2}) total {res.total_iterations():6d} | {avgs}")
