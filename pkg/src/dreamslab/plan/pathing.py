"""Shortest paths over the free-space grid.

Travel is restricted to cells classified free; unknown is as untraversable as
a wall. Tracked movers block a disc inflated by the robot radius so the
planned line never clips one.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .freespace import FREE, FreeSpaceMap


class NoPath(RuntimeError):
    """Start and goal are not connected through free cells."""


def blocked_mask(fs: FreeSpaceMap, movers=(), robot_radius: float = 0.2) -> np.ndarray:
    """Cells the robot must not enter: non-free, plus inflated mover discs."""
    grid = fs.grid
    blocked = grid.values != FREE
    for mx, my, r in movers:
        rr = float(r) + robot_radius
        ix0, iy0 = grid.cell_of(mx - rr, my - rr)
        ix1, iy1 = grid.cell_of(mx + rr, my + rr)
        ix0, iy0 = max(0, int(ix0)), max(0, int(iy0))
        ix1, iy1 = min(grid.nx - 1, int(ix1)), min(grid.ny - 1, int(iy1))
        if ix1 < ix0 or iy1 < iy0:
            continue
        ixs, iys = np.meshgrid(np.arange(ix0, ix1 + 1), np.arange(iy0, iy1 + 1))
        cx, cy = grid.center_of(ixs, iys)
        inside = (cx - mx) ** 2 + (cy - my) ** 2 <= rr**2
        blocked[iys[inside], ixs[inside]] = True
    return blocked


def _grid_graph(open_: np.ndarray, cell: float):
    ny, nx = open_.shape
    ids = np.arange(ny * nx).reshape(ny, nx)
    a_list, b_list, w_list = [], [], []
    for dy, dx, wt in ((0, 1, 1.0), (1, 0, 1.0), (1, 1, math.sqrt(2.0)), (1, -1, math.sqrt(2.0))):
        a_sl = (slice(max(0, -dy), ny - max(0, dy)), slice(max(0, -dx), nx - max(0, dx)))
        b_sl = (slice(max(0, dy), ny - max(0, -dy)), slice(max(0, dx), nx - max(0, -dx)))
        m = open_[a_sl] & open_[b_sl]
        a_list.append(ids[a_sl][m])
        b_list.append(ids[b_sl][m])
        w_list.append(np.full(int(m.sum()), wt * cell))
    a = np.concatenate(a_list)
    b = np.concatenate(b_list)
    w = np.concatenate(w_list)
    return coo_matrix((w, (a, b)), shape=(ny * nx, ny * nx)).tocsr()


def plan_path(
    start_xy,
    goal_xy,
    fs: FreeSpaceMap,
    movers=(),
    robot_radius: float = 0.2,
) -> np.ndarray:
    """Shortest 8-connected route from start to goal, as cell-center waypoints.

    The robot's own cell always counts as open. Raises NoPath when the goal
    cell is blocked, outside the grid, or unreachable.
    """
    grid = fs.grid
    blocked = blocked_mask(fs, movers, robot_radius)
    six, siy = (int(v) for v in grid.cell_of(start_xy[0], start_xy[1]))
    gix, giy = (int(v) for v in grid.cell_of(goal_xy[0], goal_xy[1]))
    if not bool(grid.in_bounds(six, siy)):
        raise NoPath("start lies outside the grid")
    if not bool(grid.in_bounds(gix, giy)) or blocked[giy, gix]:
        raise NoPath("goal cell is blocked or outside the grid")
    blocked[siy, six] = False
    if (six, siy) == (gix, giy):
        x, y = grid.center_of(gix, giy)
        return np.array([[float(x), float(y)]])

    csr = _grid_graph(~blocked, grid.cell)
    s = siy * grid.nx + six
    t = giy * grid.nx + gix
    dist, pred = dijkstra(csr, directed=False, indices=s, return_predecessors=True)
    if not np.isfinite(dist[t]):
        raise NoPath("goal is unreachable through free cells")
    chain = [t]
    while chain[-1] != s:
        chain.append(int(pred[chain[-1]]))
    chain.reverse()
    iy, ix = np.divmod(np.array(chain), grid.nx)
    x, y = grid.center_of(ix, iy)
    return np.column_stack([x, y])


def path_length(path: np.ndarray) -> float:
    path = np.asarray(path, dtype=np.float64)
    if len(path) < 2:
        return 0.0
    return float(np.hypot(*np.diff(path, axis=0).T).sum())


def path_blocked_at(path: np.ndarray, fs: FreeSpaceMap, movers=(), robot_radius: float = 0.2, start: int = 0):
    """Index of the first path vertex now inside a blocked cell, or None."""
    if len(path) == 0:
        return None
    grid = fs.grid
    blocked = blocked_mask(fs, movers, robot_radius)
    ix, iy = grid.cell_of(path[start:, 0], path[start:, 1])
    ok = grid.in_bounds(ix, iy)
    bad = ~ok | blocked[np.clip(iy, 0, grid.ny - 1), np.clip(ix, 0, grid.nx - 1)]
    hits = np.flatnonzero(bad)
    return int(hits[0]) + start if hits.size else None
