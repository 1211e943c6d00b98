"""
Training under stragglers
=========================

Run asynchronous LWPD training against the K-asynchronous and gradient
coding baselines on one delay tape, then write a table and a chart.

The baselines take one step of size lr per round. An LWPD pass over the
systematic rows moves each block by lr * sqrt(t) * (k / t) times its
gradient, so the second half of the script repeats the race with the
baselines' step size matched.
"""

import math
from pathlib import Path

from lwpd.config import ExperimentConfig
from lwpd.metrics import write_csv
from lwpd.report import comparison_table, median_curves, svg_chart, time_to_target
from lwpd.simulator import prepare, run

out = Path("demo_output")
out.mkdir(exist_ok=True)

budget = 200.0
common = dict(n=8, k=4, t=2, spread=1.0, n_records=20000, straggler_prob=0.2, straggler_factor=5,
              time_budget=budget, eval_interval=budget / 40)
extras = {"lwpd": {}, "kac": {"K": 4}, "gc": {"s_gc": 1}, "centralized": {}}


def race(seeds, lr_for):
    records = []
    for seed in seeds:
        setup = prepare(ExperimentConfig(scheme="centralized", seed=seed, **common))
        for scheme, extra in extras.items():
            cfg = ExperimentConfig(scheme=scheme, seed=seed, lr=lr_for(scheme), **common, **extra)
            records += run(cfg, setup)
    return records


seeds = range(5)
records = race(seeds, lambda scheme: 0.1)
curves = median_curves(records)
target = [loss for tm, loss in curves["centralized"] if tm <= budget / 2][-1]
print(comparison_table(records, target=target))
write_csv(records, out / "same_lr.csv")
(out / "same_lr.svg").write_text(svg_chart(records, log_scale=True))

# Matched step: baselines get lr * sqrt(t) * k / t.
boost = math.sqrt(2) * 4 / 2
matched = race(seeds, lambda scheme: 0.1 if scheme in ("lwpd", "centralized") else 0.1 * boost)
curves = median_curves(matched)
for scheme in ("lwpd", "kac", "gc"):
    print(f"matched step, {scheme}: median time to {target:.4f} = {time_to_target(curves[scheme], target):g}")
(out / "matched_lr.svg").write_text(svg_chart(matched, log_scale=True))
print("wrote", sorted(p.name for p in out.iterdir()))
