"""
Coded worker tasks
==================

Each worker returns one signed sum of block gradients. Summing the
results of a systematic group with the master's signs gives back every
block gradient exactly, while a parity worker's result is only an
approximation built from its own two data partitions.
"""

import numpy as np

from lwpd.assignment import assign_data, partition_bounds, partition_gradient, scatter_plan
from lwpd.codebook import CodeParams, build_code
from lwpd.learner import coded_task, full_gradient, gen_mixture, init_model

data = gen_mixture(num_classes=4, num_components=8, dim=20, n_records=4000, seed=0)
X, y = data.train
model = init_model("logistic", (20, 4), seed=0)

cb = build_code(CodeParams(8, 4, 2))
layout = partition_gradient(model.layer_sizes, cb.params, mode="2d")
bounds = partition_bounds(len(X), cb.params.k)
held = assign_data(cb, len(X))


def local(worker):
    return {p: (X[slice(*bounds[p])], y[slice(*bounds[p])]) for p in held[worker]}


results = {w: coded_task(model, cb, layout, w, 0, local(w)) for w in range(8)}
print("floats per message:", results[0].floats_communicated)

# Decode with additions only: every block gets +v or -v from each worker.
est = np.zeros((4, layout.block_dim))
for w in range(4):
    for j, sign in scatter_plan(cb, layout, w).entries:
        est[j] += sign * results[w].v / cb.t

half = len(X) // 2
for j in range(4):
    sl = slice(0, half) if j < 2 else slice(half, len(X))
    truth = layout.gather(j, full_gradient(model, X[sl], y[sl]))
    print(f"block {j}: systematic decode error {np.max(np.abs(est[j] - truth)):.2e}")

# A parity worker alone: how close is its direction to the exact one?
for w in (4, 6):
    exact = np.zeros(layout.block_dim)
    for j, sign in scatter_plan(cb, layout, w).entries:
        sl = slice(0, half) if j < 2 else slice(half, len(X))
        exact += sign * layout.gather(j, full_gradient(model, X[sl], y[sl]))
    v = results[w].v
    cos = v @ exact / (np.linalg.norm(v) * np.linalg.norm(exact))
    print(f"worker {w}: cosine to the lossless coded gradient {cos:.4f}")
