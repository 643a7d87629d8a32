"""Tri-state floor-plan extraction from a Gaussian map.

A cell is occupied when the obstacle slab (roughly ankle to head height) stacks
enough opacity over it, free when it is not occupied but the floor slab was
observed there, and unknown otherwise. Both slabs are binned by splat centers;
floor evidence is then grown by a fixed radius so the gaps between sampled
floor points count as observed, without the range-dependent marginal footprint
bleeding floor through thin walls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..grid import Grid2D
from ..splat import GaussianMap, render_topview_opacity
from .config import PlannerConfig

UNKNOWN = np.int8(-1)
FREE = np.int8(0)
OCCUPIED = np.int8(1)


@dataclass
class FreeSpaceMap:
    grid: Grid2D  # int8 values in {UNKNOWN, FREE, OCCUPIED}

    @property
    def free(self) -> np.ndarray:
        return self.grid.values == FREE

    @property
    def occupied(self) -> np.ndarray:
        return self.grid.values == OCCUPIED

    @property
    def unknown(self) -> np.ndarray:
        return self.grid.values == UNKNOWN

    def counts(self) -> dict:
        v = self.grid.values
        return {
            "free": int((v == FREE).sum()),
            "occupied": int((v == OCCUPIED).sum()),
            "unknown": int((v == UNKNOWN).sum()),
        }


def map_bounds(gmap: GaussianMap, pad: float = 0.5) -> tuple[float, float, float, float]:
    """XY bounding box of the background splats, padded outward."""
    idx = gmap.subset_indices("background")
    if idx.size == 0:
        return (-pad, -pad, pad, pad)
    c = gmap.centers[idx]
    return (
        float(c[:, 0].min() - pad),
        float(c[:, 1].min() - pad),
        float(c[:, 0].max() + pad),
        float(c[:, 1].max() + pad),
    )


def _close(mask: np.ndarray, r: int) -> np.ndarray:
    """Morphological closing with a radius-r disc, padded so the border
    behaves like open space rather than clamping the dilation."""
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    disc = (yy * yy + xx * xx) <= r * r
    m = np.pad(mask, r)
    m = ndimage.binary_erosion(ndimage.binary_dilation(m, structure=disc), structure=disc)
    return m[r:-r, r:-r]


def extract_free_space(
    gmap: GaussianMap,
    cfg: PlannerConfig | None = None,
    bounds: tuple[float, float, float, float] | None = None,
    frame: int | None = None,
    include_dreamed: bool = True,
    bake_movers: bool = False,
) -> FreeSpaceMap:
    """Classify every cell of the extent as unknown, free, or occupied.

    Only background splats vote; movers never mark cells. `include_dreamed`
    False restricts the vote to directly observed splats, which is how
    coverage is judged. `bake_movers` is a deliberately broken mode for
    baseline comparisons: mover splats vote at their first observed position,
    turning anything that ever crossed the view into a permanent wall.
    """
    cfg = cfg or PlannerConfig()
    if bounds is None:
        bounds = map_bounds(gmap, cfg.pad)
    grid = Grid2D.from_bounds(bounds, cfg.cell, fill=UNKNOWN, dtype=np.int8)
    if gmap.subset_indices("background").size == 0:
        return FreeSpaceMap(grid)

    subset = None if bake_movers else "background"
    obstacle = render_topview_opacity(
        gmap, bounds, cfg.cell, subset=subset, z_range=cfg.obstacle_slab,
        frame=frame, include_dreamed=include_dreamed, binning="center",
    )
    floor = render_topview_opacity(
        gmap, bounds, cfg.cell, subset=subset, z_range=cfg.floor_slab,
        frame=frame, include_dreamed=include_dreamed, binning="center",
    )
    samples = floor.values >= cfg.tau_opacity
    occupied = obstacle.values >= cfg.tau_opacity
    observed_floor = samples
    fill = int(round(cfg.floor_fill / cfg.cell))
    if fill > 0 and occupied.any():
        # a wall face sampled at range is a dotted line: column spacing grows
        # with distance while every dot is true surface. The same closing rule
        # as for floor bridges the dots without growing past the outermost
        # sample, so doorways (much wider than 2*fill) stay open. Left dotted,
        # the reachability flood leaks into the exterior and coverage scores
        # near that wall can never settle.
        occupied = _close(occupied, fill)
    if fill > 0 and samples.any():
        # closing, not dilation: gaps between floor samples up to 2*fill wide
        # count as observed, but the mask never grows past the outermost
        # sample, so floor evidence at a wall base stays on its own side
        observed_floor = samples | _close(samples, fill)
        # a wall sensed from both sides can get its unobserved core bridged by
        # the closing; certified floor must touch a sample without crossing a wall
        comp, _ = ndimage.label(observed_floor & ~occupied, structure=np.ones((3, 3), dtype=bool))
        good = np.unique(comp[samples & ~occupied])
        observed_floor = np.isin(comp, good[good > 0]) | samples
    grid.values[occupied] = OCCUPIED
    grid.values[~occupied & observed_floor] = FREE
    return FreeSpaceMap(grid)
