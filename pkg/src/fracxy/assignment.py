"""Exact min-cost assignment for small dense cost matrices.

Potential-based shortest augmenting path (Hungarian) solver, O(n^3).
Instances downstream hold at most a few tens of particles, so clarity
beats vectorization here.
"""

from __future__ import annotations

import numpy as np


def solve_assignment(cost: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimum-cost perfect matching of a square cost matrix.

    Returns (row_to_col, total_cost). Costs may be any finite floats.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {cost.shape}")
    n = cost.shape[0]
    if n == 0:
        return np.empty(0, dtype=int), 0.0
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains non-finite entries")

    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=int)  # match[j] = row assigned to column j (1-based)
    way = np.zeros(n + 1, dtype=int)

    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1

    row_to_col = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        row_to_col[match[j] - 1] = j - 1
    total = float(cost[np.arange(n), row_to_col].sum())
    return row_to_col, total
