"""Compare the full lambda sweep with the 10-wide trimmed window.

After the first outer iteration only the ten grid points around the previous
corner are solved.  The chosen indices should match the untrimmed run while
the number of solves drops by a factor of three.

    python demos/trimming.py [n]
"""

import sys

from edgemg import RunConfig, make_problem, run

n = int(sys.argv[1]) if len(sys.argv) > 1 else 32
p = make_problem("blur", n, 0.01, seed=0)

for mode in ("never", "after_first", "always"):
    res = run(p.A, p.b, n, config=RunConfig(trim_mode=mode), x_true=p.x_true)
    print(f"{mode:12s} solves {len(res.records):4d}  inner its {res.total_iterations():6d}  "
          f"error {res.outer[-1].rel_error:.4f}  indices {res.state.chosen_indices}")
