"""Grouping of waypoints into sub-regions to tour."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .topo import TopoGraph


@dataclass
class SubRegion:
    id: int
    members: list[int]  # node ids
    representative: int  # medoid node id
    status: str = "observed"  # or "dreamed"
    visited: bool = False


def cluster_subregions(g: TopoGraph, r_sub: float = 4.0, dists: np.ndarray | None = None) -> list[SubRegion]:
    """Partition the nodes by greedy ball growing.

    The lowest-id unassigned node seeds a region and absorbs every unassigned
    node within graph distance r_sub; the representative is the member with
    the smallest total distance to the others (ties to the lowest id). The
    result is a partition and depends only on the graph, so repeated calls
    agree.
    """
    n = len(g.nodes)
    if n == 0:
        return []
    if dists is None:
        dists = g.distances()
    assigned = np.zeros(n, dtype=bool)
    regions: list[SubRegion] = []
    for seed in range(n):
        if assigned[seed]:
            continue
        members = np.flatnonzero(~assigned & (dists[seed] <= r_sub))
        assigned[members] = True
        sub = dists[np.ix_(members, members)]
        finite = np.where(np.isfinite(sub), sub, 0.0)
        rep = members[int(np.argmin(finite.sum(axis=1)))]
        regions.append(SubRegion(len(regions), [int(m) for m in members], int(rep)))
    return regions


def mark_dreamed_regions(regions: list[SubRegion], g: TopoGraph, fs_observed) -> None:
    """Tag regions whose representative stands on unverified ground.

    A region counts as dreamed when the map with dreamed structures stripped
    does not show free space under its representative node, i.e. only dreamed
    content put it on the tour.
    """
    from .freespace import FREE

    for r in regions:
        ix, iy = g.nodes[r.representative].cell
        h, w = fs_observed.grid.values.shape
        inside = 0 <= ix < w and 0 <= iy < h
        if not (inside and fs_observed.grid.values[iy, ix] == FREE):
            r.status = "dreamed"
