"""Waypoint graph on the generalized Voronoi ridge of the free space.

The ridge is found by brushfire: each free cell knows its nearest obstacle
cell, and wherever adjacent free cells disagree about that obstacle by more
than a few cells, the boundary between two walls runs through. The ridge band
is thinned to one cell, short spurs from wall corners are dropped, and nodes
are placed at junctions, endpoints, and every d_wp meters along each arc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_edt, label
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from skimage.morphology import skeletonize

from .freespace import FreeSpaceMap

# adjacent ridge cells whose nearest obstacles are at least this many cells
# apart are anchored to different walls
FEATURE_SEP = 3.0

_SHIFTS8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


class NoFreeSpace(RuntimeError):
    """The snapshot contains no free cells to plan over."""


@dataclass
class TopoNode:
    id: int
    cell: tuple[int, int]  # (ix, iy)
    xy: np.ndarray  # world coordinates of the cell center


@dataclass
class TopoGraph:
    nodes: list[TopoNode]
    edges: list[tuple[int, int, float]]
    d_wp: float
    adjacency: dict[int, list[tuple[int, float]]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.adjacency:
            adj: dict[int, list[tuple[int, float]]] = {n.id: [] for n in self.nodes}
            for a, b, w in self.edges:
                adj[a].append((b, w))
                if a != b:
                    adj[b].append((a, w))
            self.adjacency = adj

    def positions(self) -> np.ndarray:
        return np.array([n.xy for n in self.nodes]).reshape(len(self.nodes), 2)

    def distances(self, sources=None) -> np.ndarray:
        """All-pairs (or sources-to-all) shortest path lengths; inf if disconnected."""
        n = len(self.nodes)
        if n == 0:
            return np.zeros((0, 0))
        if self.edges:
            ai = np.array([e[0] for e in self.edges])
            bi = np.array([e[1] for e in self.edges])
            w = np.array([e[2] for e in self.edges])
            mat = coo_matrix((np.r_[w, w], (np.r_[ai, bi], np.r_[bi, ai])), shape=(n, n))
        else:
            mat = coo_matrix((n, n))
        if sources is None:
            return dijkstra(mat.tocsr(), directed=False)
        return dijkstra(mat.tocsr(), directed=False, indices=np.asarray(sources))

    def nearest_node(self, xy) -> int:
        pos = self.positions()
        d = np.hypot(pos[:, 0] - xy[0], pos[:, 1] - xy[1])
        return int(np.argmin(d))


def _ridge_mask(free: np.ndarray, occupied: np.ndarray, min_clearance_cells: float) -> tuple[np.ndarray, np.ndarray]:
    # clearance is measured to walls; lone unsampled cells inside a mapped room
    # must not spawn ridge features. Without any wall the frontier stands in.
    basis = ~occupied if occupied.any() else free
    edt, ind = distance_transform_edt(basis, return_indices=True)
    fy, fx = ind[0].astype(np.float64), ind[1].astype(np.float64)
    ridge = np.zeros_like(free)
    H, W = free.shape
    # each unordered neighbor pair once
    for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
        a_sl = (slice(max(0, -dy), H - max(0, dy)), slice(max(0, -dx), W - max(0, dx)))
        b_sl = (slice(max(0, dy), H - max(0, -dy)), slice(max(0, dx), W - max(0, -dx)))
        both = free[a_sl] & free[b_sl]
        sep2 = (fy[a_sl] - fy[b_sl]) ** 2 + (fx[a_sl] - fx[b_sl]) ** 2
        hit = both & (sep2 >= FEATURE_SEP**2)
        ridge[a_sl] |= hit
        ridge[b_sl] |= hit
    ridge &= edt >= min_clearance_cells
    return ridge, edt


def _collapse_corners(skel: np.ndarray) -> np.ndarray:
    """Drop cells whose two neighbors already touch each other.

    Thinning can leave 3-cell triangles at line ends and staircase corners;
    such a cell adds a parallel path without adding reach, so removing it
    keeps the skeleton connected.
    """
    skel = skel.copy()
    cells = {tuple(c) for c in np.argwhere(skel)}
    changed = True
    while changed:
        changed = False
        for c in sorted(cells):
            ns = [(c[0] + dy, c[1] + dx) for dy, dx in _SHIFTS8 if (c[0] + dy, c[1] + dx) in cells]
            if len(ns) == 2:
                (ay, ax), (by, bx) = ns
                if max(abs(ay - by), abs(ax - bx)) == 1:
                    cells.discard(c)
                    skel[c] = False
                    changed = True
    return skel


def _prune_spurs(skel: np.ndarray, max_len: int) -> np.ndarray:
    """Remove leaf chains shorter than max_len that end at a junction."""
    skel = skel.copy()
    cells = {tuple(c) for c in np.argwhere(skel)}

    def nbrs(c):
        return [(c[0] + dy, c[1] + dx) for dy, dx in _SHIFTS8 if (c[0] + dy, c[1] + dx) in cells]

    leaves = [c for c in sorted(cells) if len(nbrs(c)) == 1]
    for leaf in leaves:
        if leaf not in cells or len(nbrs(leaf)) != 1:
            continue
        chain = [leaf]
        prev, cur = leaf, nbrs(leaf)[0]
        while len(chain) < max_len:
            around = nbrs(cur)
            if len(around) > 2:
                # junction reached: the chain was a spur
                for c in chain:
                    cells.discard(c)
                    skel[c] = False
                break
            chain.append(cur)
            nxt = [m for m in around if m != prev]
            if not nxt:
                break  # open chain end; keep it
            prev, cur = cur, nxt[0]
    return skel


def build_topo_graph(fs: FreeSpaceMap, d_wp: float = 1.0, min_clearance: float = 0.2) -> TopoGraph:
    """Place waypoints on the thinned equidistant ridge of the free space.

    Raises NoFreeSpace when no cell is free. A free region too small to carry
    a ridge gets a single node at its deepest cell.
    """
    grid = fs.grid
    free = fs.free
    if not free.any():
        raise NoFreeSpace("no free cells in the snapshot")

    ridge, edt = _ridge_mask(free, fs.occupied, min_clearance / grid.cell)
    skel = skeletonize(ridge) if ridge.any() else ridge
    if skel.any():
        # pruning an arm can expose a new corner triangle, so collapse twice
        skel = _collapse_corners(skel)
        skel = _prune_spurs(skel, max_len=max(3, int(round(0.5 * d_wp / grid.cell))))
        skel = _collapse_corners(skel)
    if skel.any():
        # ridge specks shed by thinning would become edgeless nodes, and an
        # edgeless node next to the robot poisons every graph distance
        comp, ncomp = label(skel, structure=np.ones((3, 3), dtype=bool))
        if ncomp > 1:
            sizes = np.bincount(comp.ravel())
            sizes[0] = 0
            keep = np.flatnonzero(sizes >= 3)
            skel = np.isin(comp, keep) if keep.size else comp == np.argmax(sizes)
    if not skel.any():
        iy, ix = np.unravel_index(np.argmax(np.where(free, edt, -1.0)), free.shape)
        skel = np.zeros_like(free)
        skel[iy, ix] = True

    cells = sorted(tuple(c) for c in np.argwhere(skel))
    cellset = set(cells)

    def nbrs(c):
        out = [(c[0] + dy, c[1] + dx) for dy, dx in _SHIFTS8]
        return sorted(m for m in out if m in cellset)

    deg = {c: len(nbrs(c)) for c in cells}
    structural = [c for c in cells if deg[c] != 2]
    comp, ncomp = label(skel, structure=np.ones((3, 3), dtype=bool))
    seen = {comp[c] for c in structural}
    for k in range(1, ncomp + 1):
        if k not in seen:
            # a pure cycle still needs an anchor node
            structural.append(min(c for c in cells if comp[c] == k))
    structural.sort()

    nodes: list[TopoNode] = []
    node_id: dict[tuple[int, int], int] = {}

    def add_node(c) -> int:
        x, y = grid.center_of(c[1], c[0])
        nodes.append(TopoNode(len(nodes), (c[1], c[0]), np.array([float(x), float(y)])))
        node_id[c] = nodes[-1].id
        return nodes[-1].id

    for c in structural:
        add_node(c)

    edges: list[tuple[int, int, float]] = []
    used: set[tuple[tuple[int, int], tuple[int, int]]] = set()

    def step_len(a, b) -> float:
        return grid.cell * (math.sqrt(2.0) if a[0] != b[0] and a[1] != b[1] else 1.0)

    for c in structural:
        for n in nbrs(c):
            if (c, n) in used:
                continue
            used.add((c, n))
            used.add((n, c))
            prev, cur = c, n
            last = node_id[c]
            acc = step_len(c, n)
            while True:
                if cur in node_id:
                    edges.append((last, node_id[cur], acc))
                    break
                if acc >= d_wp - 1e-9:
                    nid = add_node(cur)
                    edges.append((last, nid, acc))
                    last, acc = nid, 0.0
                nxt = [m for m in nbrs(cur) if m != prev]
                if not nxt:
                    nid = add_node(cur)
                    edges.append((last, nid, acc))
                    break
                used.add((cur, nxt[0]))
                used.add((nxt[0], cur))
                acc += step_len(cur, nxt[0])
                prev, cur = cur, nxt[0]

    return TopoGraph(nodes, edges, d_wp)
