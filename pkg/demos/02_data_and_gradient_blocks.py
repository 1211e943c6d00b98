"""
Data partitions and gradient blocks
===================================

Bind the code's four columns to concrete pieces of work: which records
each worker holds and which parameter coordinates each block covers.
"""

from lwpd.assignment import assign_data, dumps_assignment, partition_gradient, scatter_plan
from lwpd.codebook import CodeParams, build_code

cb = build_code(CodeParams(8, 4, 2))

# Ten thousand training records cut into four contiguous partitions.
# A worker holds the partitions named by the non-zero columns of its row,
# so the parity workers 4..7 see only two of the four.
print(dumps_assignment(assign_data(cb, 10_000)))

# Softmax regression with 20 features and 4 classes. In the 2d layout
# block j is (output group j % 2, data half j // 2).
layout = partition_gradient((20, 4), cb.params, mode="2d")
print(layout.dumps())
print("padded block length B =", layout.block_dim)

# With a hidden layer every layer is split the same way, and the block
# concatenates the group's slice of each weight matrix.
deep = partition_gradient((10, 8, 4), cb.params, mode="2d")
for b in deep.blocks[:2]:
    print(f"block {b.block_id}: ranges {b.weight_range}, {b.unpadded_len} coordinates")

# The master turns a worker's single vector into t signed block updates.
for w in (0, 1, 6, 7):
    print(f"worker {w}: plan {scatter_plan(cb, layout, w).entries}")

# Under a schedule the plan changes every round.
sched = build_code(CodeParams(6, 3, 2))
for r in range(3):
    print("round", r, "worker 0 ->", scatter_plan(sched, None, 0, r))
