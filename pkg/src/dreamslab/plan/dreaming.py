"""Speculative map structure: adding dreamed Gaussians and taking them back.

Selected partial views are inpainted, the filled pixels are back-projected
with the dreamer's depth, and the points join the map marked as dreamed with
reduced confidence. Two retirement rules keep dreams from outliving reality:
any dreamed Gaussian falling inside a sensed frustum no deeper than the
measured surface is deleted on the spot, and any dreamed Gaussian standing in
a cell the robot has since genuinely observed is deleted as replaced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..dream import Dreamer, make_inpaint_mask_B
from ..geometry import PoseSE3
from ..mapper import SensorModel
from ..scene import CameraIntrinsics, back_project
from ..splat import NEAR_PLANE, PROV_DREAMED, PROV_OBSERVED, GaussianMap, RenderConfig, rasterize
from .config import PlannerConfig
from .freespace import UNKNOWN, FreeSpaceMap


@dataclass
class DreamStats:
    views_tried: int = 0
    views_dreamed: int = 0
    added: int = 0


def dream_structures(
    gmap: GaussianMap,
    poses: list[PoseSE3],
    dreamer: Dreamer,
    K: CameraIntrinsics,
    cfg: PlannerConfig | None = None,
    sensor: SensorModel | None = None,
    frame: int = 0,
    key_base: int = 0,
    stride: int = 2,
    render_cfg: RenderConfig | None = None,
) -> DreamStats:
    """Inpaint each view and merge the imagined surfaces into the map.

    At most dream_view_cap poses are used per call. New Gaussians carry the
    dreamed provenance, half confidence, and are deduplicated against every
    background splat already present so repeated dreaming cannot pile up.
    """
    cfg = cfg or PlannerConfig()
    sensor = sensor or SensorModel()
    stats = DreamStats()
    for k, pose in enumerate(poses[: cfg.dream_view_cap]):
        stats.views_tried += 1
        r = rasterize(gmap, pose, K, render_cfg, subset="background", frame=frame)
        mask = make_inpaint_mask_B(r.alpha, cfg.tau_opacity)
        if not mask.any():
            continue
        rgb = dreamer.inpaint_view(r.rgb, r.alpha, mask, pose, key=key_base + k)
        depth = dreamer.inpaint_depth(r.depth, mask, pose, key=key_base + k)
        pick = mask & np.isfinite(depth) & (depth > NEAR_PLANE)
        vs, us = np.nonzero(pick)
        keep = (vs % stride == 0) & (us % stride == 0)
        vs, us = vs[keep], us[keep]
        if vs.size == 0:
            continue
        stats.views_dreamed += 1
        world = back_project(depth, K, pose)[vs, us]
        d = depth[vs, us]
        scales = sensor.scale_factor * d / K.fx
        bg = gmap.subset_indices("background")
        if bg.size:
            dist, _ = cKDTree(gmap.centers[bg]).query(world)
            fresh = dist > scales
        else:
            fresh = np.ones(vs.size, dtype=bool)
        n = int(fresh.sum())
        if n == 0:
            continue
        # negative source frame: dreamed rows must never alias a real frame's
        # pixel table during localization lookups
        gmap.append_arrays(
            world[fresh],
            np.repeat(scales[fresh][:, None], 3, axis=1),
            np.tile(pose.q, (n, 1)),
            np.full(n, sensor.opacity),
            rgb[vs, us][fresh],
            0.5 / (1.0 + sensor.sigma_depth * d[fresh]),
            np.zeros(n, dtype=np.uint32),
            np.full(n, PROV_DREAMED, dtype=np.uint8),
            np.full(n, -(frame + 1), dtype=np.int64),
            np.column_stack([us, vs])[fresh],
            np.full(n, frame, dtype=np.int64),
        )
        stats.added += n
    return stats


def retire_dreamed(
    gmap: GaussianMap,
    pose: PoseSE3,
    depth_img: np.ndarray,
    K: CameraIntrinsics,
    margin: float = 0.1,
) -> int:
    """Delete dreamed Gaussians the current frame sees through or up to.

    depth_img holds the sensed depth per pixel; pixels the sensor did not
    sample should carry -inf so nothing behind them is touched.
    """
    rows = np.flatnonzero(gmap.provenance == PROV_DREAMED)
    if rows.size == 0:
        return 0
    local = pose.inverse().apply(gmap.centers[rows])
    z = local[:, 2]
    ok = z > NEAR_PLANE
    u = np.full(rows.size, -1, dtype=np.int64)
    v = np.full(rows.size, -1, dtype=np.int64)
    u[ok] = np.round(K.fx * local[ok, 0] / z[ok] + K.cx).astype(np.int64)
    v[ok] = np.round(K.fy * local[ok, 1] / z[ok] + K.cy).astype(np.int64)
    ok &= (u >= 0) & (u < K.width) & (v >= 0) & (v < K.height)
    kill = np.zeros(rows.size, dtype=bool)
    sel = np.flatnonzero(ok)
    kill[sel] = z[sel] <= depth_img[v[sel], u[sel]] + margin
    if not kill.any():
        return 0
    mask = np.ones(len(gmap), dtype=bool)
    mask[rows[kill]] = False
    gmap.keep(mask)
    return int(kill.sum())


def retire_replaced(gmap: GaussianMap, fs_observed: FreeSpaceMap) -> int:
    """Delete dreamed Gaussians standing where real observations now exist.

    fs_observed must be extracted from observed splats only; a dreamed
    Gaussian over a cell that map calls free or occupied has been superseded.
    """
    rows = np.flatnonzero(gmap.provenance == PROV_DREAMED)
    if rows.size == 0:
        return 0
    grid = fs_observed.grid
    ix, iy = grid.cell_of(gmap.centers[rows, 0], gmap.centers[rows, 1])
    inb = grid.in_bounds(ix, iy)
    kill = np.zeros(rows.size, dtype=bool)
    sel = np.flatnonzero(inb)
    kill[sel] = grid.values[iy[sel], ix[sel]] != UNKNOWN
    if not kill.any():
        return 0
    mask = np.ones(len(gmap), dtype=bool)
    mask[rows[kill]] = False
    gmap.keep(mask)
    return int(kill.sum())


def dreamed_count(gmap: GaussianMap) -> int:
    return int((gmap.provenance == PROV_DREAMED).sum())


def observed_count(gmap: GaussianMap) -> int:
    return int((gmap.provenance == PROV_OBSERVED).sum())
