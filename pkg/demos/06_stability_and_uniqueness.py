"""Stability verdicts, uniqueness criteria, and perturbation probes.

This demo runs a four-cell slice of the (a, b) forcing grid through the
full pipeline (certify the zero solution, build measures, classify, check
uniqueness, confirm with a perturbation probe), then shows the sweep that
hunts for non-uniqueness from random initial data.  The full eight-cell
table is available as `contacthj table1` (runs a few minutes).
"""

from contacthj.experiments import run_table1, run_uniqueness_sweep
from contacthj.hamiltonians import example2, example3
from contacthj.mather import uniqueness_check

print(__doc__)

cells = [(0.0, 2.0), (1.0, 0.5), (0.0, -1.0), (1.0, 0.0)]
print(f"running cells {cells} (about two minutes)...")
res = run_table1(cells=cells, lyap_T=8.0, log=print)
print()

# The three uniqueness routes on their flagship models.
for model, name in [(example3(0.0, 2.0), "forcing family (0, 2)"),
                    (example2(), "pendulum-type"),
                    (example3(1.0, 1.0), "forcing family (1, 1)")]:
    crit = uniqueness_check(model)
    print(f"{name}: route = {crit.route}, passed = {crit.passed}")
print("the three routes: positive coupling on the whole level set, "
      "positive coupling on the rest set of a reversible model, and the "
      "bracket-span condition at coupling-degenerate points")
print()

# Random initial data all funnel into the same stationary solution.
sweep = run_uniqueness_sweep(n_initials=6, n=64, dt=5e-3, seed=2)
print(f"sweep: {sweep.n_converged}/{sweep.n_initials} runs converged into "
      f"{sweep.n_clusters} cluster(s), spread {sweep.max_spread:.1e}, "
      f"limit sup norm {sweep.cluster_sup_norms[0]:.1e}")
print(f"caveat: {sweep.caveat}")
