"""
K-means on raw coordinates
==========================

The clustering runs in plain (lat, lon) degrees. This notebook checks
the properties the rest of the pipeline relies on.
"""

# %%
import itertools

import numpy as np

from jackup_ais.clustering import kmeans_fit, restarts

rng = np.random.default_rng(0)
a = rng.normal([55.0, 7.0], 0.01, (50, 2))
b = rng.normal([55.0, 8.0], 0.01, (50, 2))
P = np.vstack([a, b])

m = kmeans_fit(P, 2, seed=0)
print(m.centers)
print(a.mean(axis=0), b.mean(axis=0))

# %%
# The objective never rises from one iteration to the next.
print(np.round(m.history, 8))

# %%
# Ten points have 511 two-way splits, few enough to try them all.
Q = rng.uniform([55, 7], [56, 8], (10, 2))
best = min(
    sum(((g - g.mean(0)) ** 2).sum() for g in (Q[list(s)], Q[[i for i in range(10) if i not in s]]))
    for r in range(1, 6)
    for s in itertools.combinations(range(10), r)
)
print(best, restarts(Q, 2, list(range(10))).inertia)

# %%
# Input order only changes label numbers, never the grouping.
perm = rng.permutation(len(P))
m2 = kmeans_fit(P[perm], 2, seed=0)
print(sorted(map(tuple, m.centers)) == sorted(map(tuple, m2.centers)))
