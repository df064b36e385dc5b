"""Compiled inner loops for k-means. Sequential on purpose: results must not depend on threading."""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def assign(X, C):
    n = X.shape[0]
    k = C.shape[0]
    labels = np.empty(n, dtype=np.int64)
    d2 = np.empty(n, dtype=np.float64)
    for i in range(n):
        x0 = X[i, 0]
        x1 = X[i, 1]
        best = 0
        a = x0 - C[0, 0]
        b = x1 - C[0, 1]
        bd = a * a + b * b
        for j in range(1, k):
            a = x0 - C[j, 0]
            b = x1 - C[j, 1]
            d = a * a + b * b
            if d < bd:
                bd = d
                best = j
        labels[i] = best
        d2[i] = bd
    return labels, d2


@numba.njit(cache=True)
def candidate_potentials(X, closest, cand):
    """Objective after adding each candidate point as a center."""
    t = cand.shape[0]
    pots = np.zeros(t, dtype=np.float64)
    for c in range(t):
        c0 = X[cand[c], 0]
        c1 = X[cand[c], 1]
        s = 0.0
        for i in range(X.shape[0]):
            a = X[i, 0] - c0
            b = X[i, 1] - c1
            d = a * a + b * b
            s += d if d < closest[i] else closest[i]
        pots[c] = s
    return pots


@numba.njit(cache=True)
def update_closest(X, closest, idx):
    c0 = X[idx, 0]
    c1 = X[idx, 1]
    for i in range(X.shape[0]):
        a = X[i, 0] - c0
        b = X[i, 1] - c1
        d = a * a + b * b
        if d < closest[i]:
            closest[i] = d
