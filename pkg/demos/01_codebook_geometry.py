"""
Codebook geometry
=================

Build the 8-worker code, look at its signs, and measure how far apart its
rows sit as lines through the origin.
"""

import math

import numpy as np

from lwpd.codebook import (CodeParams, analyze_distance, build_code, build_X, check_coverage, dumps_codebook,
                           weight_distribution)

# The character matrix is a Sylvester Hadamard matrix; scaled by 1/sqrt(t)
# it is orthogonal.
x4 = build_X(4)
print(x4)
print("X4 X4^T =\n", x4 @ x4.T)

# 8 workers, 4 gradient blocks, 2 blocks per worker. The first four rows
# are block-diagonal copies of X^(2); the last four wrap around.
cb = build_code(CodeParams(8, 4, 2))
print(dumps_codebook(cb))
print("weights:", weight_distribution(cb))

# Every pair of rows is either orthogonal or at 60 degrees.
rep = analyze_distance(cb)
print(rep.summary())

# Larger codes keep the same two distances.
for n, k, t in [(16, 8, 2), (16, 8, 4), (32, 16, 4)]:
    rep = analyze_distance(build_code(CodeParams(n, k, t)))
    print(f"({n},{k},{t}) min distance / pi = {rep.min_distance / math.pi:.6f}, pairs by distance:",
          {round(d / math.pi, 4): c for d, c in rep.pair_histogram.items()})

# Odd sizes use the next power-of-two code plus a round schedule.
cb = build_code(CodeParams(6, 3, 2))
print("(6,3,2) displacement d =", cb.params.d)
for r in range(3):
    print("round", r, [cb.row_for(i, r)[0] for i in range(6)])
print("covers all row/task offsets:", check_coverage(cb.params))

# The schedule only reaches every offset pair when n' and k are coprime.
for n, k in [(10, 5), (12, 6), (14, 7)]:
    p = build_code(CodeParams(n, k, 2)).params
    print(f"n={n} k={k} n'={p.n_pow} d={p.d} gcd={math.gcd(p.n_pow, k)} covered={check_coverage(p)}")

print("rows are unit vectors:", np.allclose(np.linalg.norm(cb.matrix(), axis=1), 1.0))
