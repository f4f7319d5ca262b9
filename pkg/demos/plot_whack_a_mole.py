"""
Censoring one attribute at a time
=================================

A synthetic table with two tasks and three correlated sensitive
attributes. We train plain encoders, audit them, censor the worst
attribute per task with gradient reversal, and audit again.
"""

from pathlib import Path

from leastpriv.empirical import audit_matrix, pearson_matrix, split_dataset
from leastpriv.render import HeatmapSpec, render_heatmap_svg
from leastpriv.replab import (
    BATTERY_FEATURES,
    BATTERY_SENSITIVE,
    BATTERY_TASKS,
    TrainConfig,
    correlated_battery,
    representation_provider,
)

out = Path("demo_out")
out.mkdir(exist_ok=True)

ds = correlated_battery(seed=0)
split = split_dataset(ds, 0)
cfg = TrainConfig(seed=0)

# %%
# The sensitive attributes share a latent cause with the tasks.
print(pearson_matrix(ds, ["T1", "T2"]).round(3))

# %%
# Plain training: positive delta_adv means the adversary gains more from
# the representation than the task does.
erm = audit_matrix(ds, split, BATTERY_TASKS, BATTERY_SENSITIVE, representation_provider(ds, BATTERY_FEATURES, cfg))
print(erm.values().round(3))
(out / "heatmap_erm.svg").write_bytes(render_heatmap_svg(HeatmapSpec.from_matrix(erm)))

# %%
# Censor the top attribute of each task (lambda = 4 by default).
targets = {t: erm.top_attribute(t) for t in BATTERY_TASKS}
print("censoring", targets)
grad = audit_matrix(ds, split, BATTERY_TASKS, BATTERY_SENSITIVE,
                    representation_provider(ds, BATTERY_FEATURES, cfg, censor=targets))
print(grad.values().round(3))
(out / "heatmap_grad.svg").write_bytes(render_heatmap_svg(HeatmapSpec.from_matrix(grad)))

# %%
# The censored cell drops, but another attribute still leaks.
for t, s in targets.items():
    others = {o: round(grad.cell(t, o).delta_adv, 3) for o in BATTERY_SENSITIVE if o != s}
    print(f"{t}: {s} {erm.cell(t, s).delta_adv:.3f} -> {grad.cell(t, s).delta_adv:.3f}; others {others}")
