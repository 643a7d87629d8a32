"""Visit order over sub-region representatives: an open path from the robot."""

from __future__ import annotations

import numpy as np

from .topo import TopoGraph

# stands in for an unreachable representative so the tour still totals finitely
UNREACHABLE_PENALTY = 1.0e6


def path_cost(order: list[int], d0: np.ndarray, D: np.ndarray) -> float:
    if not order:
        return 0.0
    c = d0[order[0]]
    for a, b in zip(order[:-1], order[1:]):
        c += D[a, b]
    return float(c)


def held_karp_open(d0: np.ndarray, D: np.ndarray) -> list[int]:
    """Exact minimum open path over all targets, starting from the robot.

    Bitmask dynamic program, exponential in len(d0); callers cap the size.
    """
    n = len(d0)
    if n == 0:
        return []
    if n == 1:
        return [0]
    full = 1 << n
    cost = np.full((full, n), np.inf)
    parent = np.full((full, n), -1, dtype=np.int64)
    for j in range(n):
        cost[1 << j, j] = d0[j]
    for mask in range(1, full):
        row = cost[mask]
        for last in range(n):
            if not mask & (1 << last) or not np.isfinite(row[last]):
                continue
            base = row[last]
            for nxt in range(n):
                if mask & (1 << nxt):
                    continue
                v = base + D[last, nxt]
                m2 = mask | (1 << nxt)
                if v < cost[m2, nxt] - 1e-12:
                    cost[m2, nxt] = v
                    parent[m2, nxt] = last
    last = int(np.argmin(cost[full - 1]))
    order = [last]
    mask = full - 1
    while parent[mask, order[-1]] >= 0:
        p = int(parent[mask, order[-1]])
        mask ^= 1 << order[-1]
        order.append(p)
    return order[::-1]


def nn_two_opt(d0: np.ndarray, D: np.ndarray) -> list[int]:
    """Nearest-neighbor seed improved by first-improvement 2-opt to stability."""
    n = len(d0)
    if n == 0:
        return []
    order: list[int] = []
    left = sorted(range(n))
    cur = -1
    while left:
        costs = [d0[j] if cur < 0 else D[cur, j] for j in left]
        j = left[int(np.argmin(costs))]
        order.append(j)
        left.remove(j)
        cur = j
    improved = True
    while improved:
        improved = False
        best = path_cost(order, d0, D)
        for i in range(n - 1):
            for k in range(i + 1, n):
                cand = order[:i] + order[i : k + 1][::-1] + order[k + 1 :]
                if path_cost(cand, d0, D) < best - 1e-12:
                    order = cand
                    improved = True
                    best = path_cost(order, d0, D)
    return order


def order_subregions_tsp(regions, start_xy, g: TopoGraph, exact_cap: int = 12, dists: np.ndarray | None = None):
    """Order the unvisited sub-regions for touring.

    Returns (ordered region ids, flagged region ids). Distances run along the
    waypoint graph from the node nearest the robot; a representative the graph
    cannot reach keeps a large constant cost and lands in the flagged set.
    Exact dynamic programming up to exact_cap regions, 2-opt beyond.
    """
    pending = [r for r in regions if not r.visited]
    if not pending:
        return [], set()
    reps = [r.representative for r in pending]
    src = g.nearest_node(start_xy)
    rows = g.distances(sources=[src] + reps) if dists is None else dists[[src] + reps]
    start = np.asarray(start_xy, dtype=np.float64)
    offset = float(np.hypot(*(g.nodes[src].xy - start)))
    d0 = rows[0][reps] + offset
    D = rows[1:][:, reps]
    flagged = {pending[i].id for i in range(len(pending)) if not np.isfinite(d0[i])}
    d0 = np.where(np.isfinite(d0), d0, UNREACHABLE_PENALTY)
    D = np.where(np.isfinite(D), D, UNREACHABLE_PENALTY)
    if len(pending) <= exact_cap:
        order = held_karp_open(d0, D)
    else:
        order = nn_two_opt(d0, D)
    return [pending[i].id for i in order], flagged
