"""
Tracing the feasible region
===========================

Enumerate every deterministic map X -> Z and search over stochastic
channels. On an instance with noisy labels no point rises above the
diagonal; with deterministic labels a perfect-LPP point with positive
utility appears on the y-axis.
"""

from pathlib import Path

import numpy as np

from leastpriv.dist import posterior_positivity
from leastpriv.frontier import (
    SearchConfig,
    enumerate_deterministic,
    feasibility_check,
    pareto_filter,
    search_channels,
)
from leastpriv.instances import deterministic_label_joint, random_positive_joint
from leastpriv.render import render_frontier_svg

out = Path("demo_out")
out.mkdir(exist_ok=True)

# %%
# A random instance with a strictly positive posterior.
jxy = random_positive_joint(4, 3, np.random.default_rng(0))
points = enumerate_deterministic(jxy, 3)
points += search_channels(jxy, SearchConfig(z_size=3, restarts=8, steps_per_restart=300, seed=0))
feas = feasibility_check(points, posterior_positivity(jxy))
print(f"{len(points)} channels, worst residual {feas.worst_residual:.2e}, pass {feas.passed}")

front = pareto_filter(points)
for p in front[:8]:
    print(f"gamma {p.gamma_lpp:.4f}  utility {p.utility_iinf:.4f}  {p.provenance.value}")
(out / "frontier_positive.svg").write_bytes(render_frontier_svg(points))

# %%
# Search under a budget: the best point never beats the budget itself.
budgeted = search_channels(jxy, SearchConfig(z_size=3, leakage_budget=0.3, seed=1))
ok = [p for p in budgeted if p.gamma_lpp <= 0.3 + 1e-9]
print("best utility within budget 0.3:", max(p.utility_iinf for p in ok))

# %%
# Parity labels: the map x -> x mod 2 leaks nothing beyond Y and carries
# one full bit of utility. The check is vacuous here.
parity = deterministic_label_joint(4, [0, 1, 0, 1])
ppoints = enumerate_deterministic(parity, 2)
pfeas = feasibility_check(ppoints, posterior_positivity(parity))
print("parity frontier head:", pareto_filter(ppoints)[0])
print("check:", pfeas.note, "worst residual", pfeas.worst_residual)
(out / "frontier_parity.svg").write_bytes(render_frontier_svg(ppoints))
