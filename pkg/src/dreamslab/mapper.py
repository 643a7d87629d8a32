"""Per-pixel Gaussian prediction, map integration, refinement, and pruning.

The sensor model stands in for a learned per-pixel prediction network: it
back-projects ground-truth depth (optionally noised) into camera-frame
Gaussians and reports a confidence that decays with depth and near mask
boundaries. Its cross-time output, the scene at time t indexed by frame-t
pixels but expressed in camera frame t+1, is what makes pixel-associated
point-cloud alignment solvable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter, minimum_filter
from scipy.spatial import cKDTree

from .geometry import PoseSE3, quat_from_yaw
from .rng import (
    STREAM_SENSOR_DEPTH_CURR,
    STREAM_SENSOR_DEPTH_NEXT,
    STREAM_SENSOR_DROPOUT_CURR,
    STREAM_SENSOR_DROPOUT_NEXT,
    stream_rng,
)
from .scene import CameraIntrinsics, WorldSpec, render_gt, world_at
from .splat import PROV_OBSERVED, GaussianMap, RenderConfig, rasterize_l1_grads


class OracleUnavailable(RuntimeError):
    pass


class MissingViews(UserWarning):
    """Refinement was asked to run with fewer than two dreamed views."""


@dataclass
class SensorModel:
    sigma_depth: float = 0.01  # multiplicative depth noise std per unit depth
    p_invalid: float = 0.01  # chance a valid pixel is dropped
    border_px: int = 2  # confidence halves this close to an object-id boundary
    opacity: float = 0.9
    # the splat disc spans 1.5 pixel footprints d/fx; the stored scale is its
    # 1-sigma radius, anything larger blurs self-reprojection below 30 dB
    scale_factor: float = 0.75
    stride: int = 1
    seed: int = 0


@dataclass
class FrameOracle:
    """Ground-truth handles the sensor consults; the learned net's stand-in inputs."""

    world: WorldSpec
    time_t: float
    time_next: float
    pose_t: PoseSE3  # true camera poses, not estimates
    pose_next: PoseSE3
    gt_t: object = None  # optional pre-rendered frames, filled lazily
    gt_next: object = None

    def frame_t(self, K: CameraIntrinsics):
        if self.gt_t is None:
            self.gt_t = render_gt(world_at(self.world, self.time_t), self.pose_t, K)
        return self.gt_t

    def frame_next(self, K: CameraIntrinsics):
        if self.gt_next is None:
            self.gt_next = render_gt(world_at(self.world, self.time_next), self.pose_next, K)
        return self.gt_next


@dataclass
class FramePrediction:
    frame: int  # index of frame t+1
    next_centers: np.ndarray  # (N,3) camera frame t+1
    next_scales: np.ndarray  # (N,) isotropic
    next_colors: np.ndarray
    next_conf: np.ndarray
    next_uv: np.ndarray  # (N,2) pixels of I_{t+1}
    next_oid: np.ndarray
    curr_centers: np.ndarray  # (M,3) scene at t, camera frame t+1
    curr_conf: np.ndarray
    curr_uv: np.ndarray  # (M,2) pixels of I_t
    curr_oid: np.ndarray
    opacity: float = 0.9


def _confidence(depth: np.ndarray, oid: np.ndarray, sensor: SensorModel) -> np.ndarray:
    d = np.where(np.isfinite(depth), depth, 0.0)  # invalid pixels are dropped later
    c = 1.0 / (1.0 + sensor.sigma_depth * d)
    if sensor.border_px > 0:
        size = 2 * sensor.border_px + 1
        near_edge = maximum_filter(oid, size=size) != minimum_filter(oid, size=size)
        c = np.where(near_edge, 0.5 * c, c)
    return c


def _sample_pixels(gt, img, sensor: SensorModel, depth_stream: int, drop_stream: int, frame: int, K):
    H, W = K.height, K.width
    us, vs = np.meshgrid(np.arange(0, W, sensor.stride), np.arange(0, H, sensor.stride))
    us, vs = us.ravel(), vs.ravel()
    depth = gt.depth[vs, us]
    conf_img = _confidence(gt.depth, gt.fg_mask, sensor)

    valid = np.isfinite(depth)
    if sensor.p_invalid > 0:
        rng = stream_rng(sensor.seed, drop_stream, frame)
        valid &= rng.uniform(size=us.shape) >= sensor.p_invalid
    if sensor.sigma_depth > 0:
        rng = stream_rng(sensor.seed, depth_stream, frame)
        noise = rng.normal(size=us.shape)
        depth = depth * (1.0 + sensor.sigma_depth * noise)
        valid &= depth > 0

    us, vs, depth = us[valid], vs[valid], depth[valid]
    x = (us - K.cx) / K.fx * depth
    y = (vs - K.cy) / K.fy * depth
    centers = np.stack([x, y, depth], axis=1)
    return {
        "centers": centers,
        "uv": np.stack([us, vs], axis=1).astype(np.int32),
        "conf": conf_img[vs, us],
        "oid": gt.fg_mask[vs, us].astype(np.uint32),
        "colors": img[vs, us] if img is not None else None,
        "scales": sensor.scale_factor * depth / K.fx,
    }


def predict_frame_gaussians(
    img_next: np.ndarray,
    img_t: np.ndarray,
    oracle: FrameOracle,
    K: CameraIntrinsics,
    sensor: SensorModel,
    frame: int,
) -> FramePrediction:
    """Per-pixel Gaussians for the scene at t+1 and, cross-time, the scene at t.

    Both lists live in camera frame t+1. The cross-time list is indexed by the
    pixels of I_t: each entry is the surface point that frame-t pixel saw,
    which is exactly what ties it to the map Gaussian created from that pixel.
    """
    if oracle is None:
        raise OracleUnavailable("per-pixel prediction needs the simulator oracle")
    gt_next = oracle.frame_next(K)
    gt_curr = oracle.frame_t(K)

    nxt = _sample_pixels(gt_next, img_next, sensor, STREAM_SENSOR_DEPTH_NEXT, STREAM_SENSOR_DROPOUT_NEXT, frame, K)
    cur = _sample_pixels(gt_curr, None, sensor, STREAM_SENSOR_DEPTH_CURR, STREAM_SENSOR_DROPOUT_CURR, frame, K)

    # scene-at-t points through frame-t pixels, re-expressed in camera frame t+1
    world_pts = cur["centers"] @ oracle.pose_t.R.T + oracle.pose_t.t
    inv = oracle.pose_next.inverse()
    cur_centers = world_pts @ inv.R.T + inv.t

    return FramePrediction(
        frame=frame,
        next_centers=nxt["centers"],
        next_scales=nxt["scales"],
        next_colors=nxt["colors"],
        next_conf=nxt["conf"],
        next_uv=nxt["uv"],
        next_oid=nxt["oid"],
        curr_centers=cur_centers,
        curr_conf=cur["conf"],
        curr_uv=cur["uv"],
        curr_oid=cur["oid"],
        opacity=sensor.opacity,
    )


@dataclass
class MapperConfig:
    dedup_factor: float = 1.0  # duplicate if an observed splat sits within this many footprints
    track_margin: float = 0.1  # m depth slack when re-marking tracked Gaussians
    icp_iters: int = 5
    voxel: float = 0.1
    k_max: int = 4
    horizon: int = 10
    refine_iters: int = 30
    refine_step: float = 0.05


def prediction_to_world(pred: FramePrediction, pose: PoseSE3, which: str = "next"):
    """World-frame centers and per-Gaussian quaternions for a prediction list."""
    centers = np.asarray(getattr(pred, f"{which}_centers"))
    world = centers @ pose.R.T + pose.t
    quats = np.tile(pose.q, (world.shape[0], 1))
    return world, quats


def _planar_kabsch(src: np.ndarray, dst: np.ndarray) -> PoseSE3:
    """Yaw + XY translation aligning src to dst (movers slide on the floor)."""
    sa = src[:, :2].mean(axis=0)
    da = dst[:, :2].mean(axis=0)
    A = src[:, :2] - sa
    B = dst[:, :2] - da
    num = float((A[:, 0] * B[:, 1] - A[:, 1] * B[:, 0]).sum())
    den = float((A * B).sum())
    yaw = np.arctan2(num, den)
    c, s = np.cos(yaw), np.sin(yaw)
    t2 = da - np.array([c * sa[0] - s * sa[1], s * sa[0] + c * sa[1]])
    return PoseSE3(quat_from_yaw(yaw), np.array([t2[0], t2[1], 0.0]))


def _icp_planar(src: np.ndarray, dst: np.ndarray, iters: int) -> PoseSE3:
    """Nearest-neighbor ICP constrained to floor-plane motion; src toward dst."""
    tree = cKDTree(dst)
    delta = PoseSE3.identity()
    for _ in range(iters):
        moved = src @ delta.R.T + delta.t
        _, nn = tree.query(moved)
        step = _planar_kabsch(moved, dst[nn])
        delta = step @ delta
        if np.linalg.norm(step.t) < 1e-10 and abs(step.rotation_angle_to(PoseSE3.identity())) < 1e-10:
            break
    return delta


@dataclass
class IntegrateStats:
    appended_background: int = 0
    appended_foreground: int = 0
    duplicates_dropped: int = 0
    tracks_updated: dict = field(default_factory=dict)


def integrate_frame(
    gmap: GaussianMap,
    pred: FramePrediction,
    pose: PoseSE3,
    frame: int,
    K: CameraIntrinsics,
    cfg: MapperConfig | None = None,
) -> IntegrateStats:
    """Grow the map with this frame's prediction; extend mover tracks instead of duplicating."""
    cfg = cfg or MapperConfig()
    stats = IntegrateStats()
    centers_w, quats = prediction_to_world(pred, pose, "next")
    scales = np.asarray(pred.next_scales)
    oid = np.asarray(pred.next_oid)
    bg = oid == 0

    # background: append only points not already explained by an observed splat
    new_bg = np.flatnonzero(bg)
    if new_bg.size:
        existing = np.flatnonzero((gmap.object_id == 0) & (gmap.provenance == PROV_OBSERVED))
        keep = np.ones(new_bg.size, dtype=bool)
        if existing.size:
            tree = cKDTree(gmap.centers[existing])
            dist, _ = tree.query(centers_w[new_bg])
            keep = dist > cfg.dedup_factor * scales[new_bg]
        rows = new_bg[keep]
        stats.duplicates_dropped += int(new_bg.size - rows.size)
        if rows.size:
            _append_rows(gmap, pred, centers_w, quats, rows, frame)
            stats.appended_background += rows.size

    # foreground: first sight appends with an identity track entry; afterwards
    # the object's rigid track is extended by planar ICP on its point clouds
    for obj in np.unique(oid[~bg]):
        rows = np.flatnonzero(oid == int(obj))
        pred_pts = centers_w[rows]
        if int(obj) not in gmap.tracks:
            _append_rows(gmap, pred, centers_w, quats, rows, frame)
            gmap.set_track(int(obj), frame, PoseSE3.identity())
            stats.appended_foreground += rows.size
            continue
        sel = np.flatnonzero(gmap.object_id == obj)
        placed, _ = gmap.placed(sel, frame - 1)
        if sel.size >= 3 and pred_pts.shape[0] >= 3:
            delta = _icp_planar(placed, pred_pts, cfg.icp_iters)
            latest = gmap.track_at(int(obj), frame - 1)
            gmap.set_track(int(obj), frame, delta @ latest)
            stats.tracks_updated[int(obj)] = delta
            gmap.last_tracked[sel] = frame

    # re-mark every mapped Gaussian whose surface the camera saw again
    _update_last_tracked(gmap, pred, pose, frame, K, cfg)
    return stats


def _append_rows(gmap, pred, centers_w, quats, rows, frame):
    n = rows.size
    gmap.append_arrays(
        centers_w[rows],
        np.repeat(np.asarray(pred.next_scales)[rows][:, None], 3, axis=1),
        quats[rows],
        np.full(n, pred.opacity),
        np.asarray(pred.next_colors)[rows],
        np.asarray(pred.next_conf)[rows],
        np.asarray(pred.next_oid)[rows],
        np.zeros(n, dtype=np.uint8),
        np.full(n, pred.frame, dtype=np.int64),
        np.asarray(pred.next_uv)[rows],
        np.full(n, frame, dtype=np.int64),
    )


def _update_last_tracked(gmap, pred, pose, frame, K: CameraIntrinsics, cfg: MapperConfig):
    """A Gaussian is re-observed when it projects onto a sampled pixel at the sensed depth."""
    if len(gmap) == 0:
        return
    depth_img = np.full((K.height, K.width), np.inf)
    uv = np.asarray(pred.next_uv)
    if uv.size:
        depth_img[uv[:, 1], uv[:, 0]] = np.asarray(pred.next_centers)[:, 2]
    idx = np.arange(len(gmap))
    centers, _ = gmap.placed(idx, frame)
    inv = pose.inverse()
    X = centers @ inv.R.T + inv.t
    z = X[:, 2]
    zsafe = np.where(z > 0.05, z, 1.0)
    ui = np.round(K.fx * X[:, 0] / zsafe + K.cx).astype(np.int64)
    vi = np.round(K.fy * X[:, 1] / zsafe + K.cy).astype(np.int64)
    inside = (z > 0.05) & (ui >= 0) & (ui < K.width) & (vi >= 0) & (vi < K.height)
    sel = np.flatnonzero(inside)
    d = depth_img[vi[sel], ui[sel]]
    seen = np.zeros(len(gmap), dtype=bool)
    seen[sel] = np.abs(z[sel] - d) <= cfg.track_margin
    gmap.last_tracked[seen] = frame
    # re-seen static rows are re-keyed to this frame's pixel table; pairing
    # the next step against rows anchored long ago stops the pose chain from
    # random-walking, where deduplication would leave it only fresh scraps
    rekey = np.flatnonzero(seen & (gmap.object_id == 0) & (gmap.provenance == PROV_OBSERVED))
    if rekey.size:
        gmap.source_frame[rekey] = frame
        gmap.source_uv[rekey] = np.stack([ui[rekey], vi[rekey]], axis=1)


def refine_gaussians(
    gmap: GaussianMap,
    visible: np.ndarray,
    views: list[tuple[np.ndarray, PoseSE3, int | None]],
    K: CameraIntrinsics,
    cfg: MapperConfig | None = None,
    render_cfg: RenderConfig | None = None,
) -> tuple[float, float, int]:
    """Gradient-descend color and opacity of the visible set against the given views.

    Each view is (target image, camera pose, mover placement frame); geometry
    stays frozen and the objective is the summed mean-L1 over views. Fewer than
    two dreamed views (three views total) degrades to whatever is available
    with a warning. Returns (initial loss, final loss, accepted steps).
    """
    cfg = cfg or MapperConfig()
    render_cfg = render_cfg or RenderConfig()
    if len(views) < 3:
        warnings.warn("refinement downgraded: fewer than two dreamed views available", MissingViews)
    visible = np.asarray(visible)
    upd = np.zeros(len(gmap), dtype=bool)
    upd[visible] = True

    def eval_loss_grads():
        total = 0.0
        gc = np.zeros((len(gmap), 3))
        go = np.zeros(len(gmap))
        for target, pose, view_frame in views:
            loss, dc, do = rasterize_l1_grads(gmap, pose, K, target, render_cfg, frame=view_frame)
            total += loss
            gc += dc
            go += do
        return total, gc, go

    def eval_loss():
        return sum(
            rasterize_l1_grads(gmap, pose, K, target, render_cfg, frame=view_frame)[0]
            for target, pose, view_frame in views
        )

    initial, gc, go = eval_loss_grads()
    cur = initial
    step = cfg.refine_step
    accepted = 0
    for _ in range(cfg.refine_iters):
        cand_color = gmap.color.copy()
        cand_op = gmap.opacity.copy()
        cand_color[upd] = np.clip(gmap.color[upd] - step * gc[upd], 0.0, 1.0)
        cand_op[upd] = np.clip(gmap.opacity[upd] - step * go[upd], 1e-4, 1.0)
        old_color, old_op = gmap.color, gmap.opacity
        gmap.color, gmap.opacity = cand_color, cand_op
        cand = eval_loss()
        if cand < cur:
            cur = cand
            accepted += 1
            _, gc, go = eval_loss_grads()
        else:
            gmap.color, gmap.opacity = old_color, old_op
            step *= 0.5
            if step < 1e-4:
                break
    return initial, cur, accepted


@dataclass
class PruneStats:
    removed: int = 0
    kept_tracked: int = 0


def prune_untracked(
    gmap: GaussianMap,
    frame: int,
    cfg: MapperConfig | None = None,
) -> PruneStats:
    """Density-cap stale Gaussians: per voxel keep the K_max best untracked ones.

    Gaussians tracked within the horizon are never touched. Survivors are the
    highest-opacity occupants (ties: higher confidence, then lower index).
    """
    cfg = cfg or MapperConfig()
    stats = PruneStats()
    if len(gmap) == 0:
        return stats
    exempt = gmap.last_tracked >= frame - cfg.horizon
    stats.kept_tracked = int(exempt.sum())
    stale = np.flatnonzero(~exempt)
    if stale.size == 0:
        return stats
    keys = np.floor(gmap.centers[stale] / cfg.voxel).astype(np.int64)
    # quality order first, then a stable group-by-voxel keeps that order per voxel
    order = np.lexsort((stale, -gmap.confidence[stale], -gmap.opacity[stale]))
    ranked = stale[order]
    _, inverse = np.unique(keys[order], axis=0, return_inverse=True)
    by_voxel = np.argsort(inverse, kind="stable")
    grp = inverse[by_voxel]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(grp)) + 1])
    seg = np.cumsum(np.concatenate([[0], (np.diff(grp) != 0).astype(np.int64)]))
    rank_in_voxel = np.arange(grp.size) - starts[seg]
    drop = ranked[by_voxel][rank_in_voxel >= cfg.k_max]
    if drop.size:
        mask = np.ones(len(gmap), dtype=bool)
        mask[drop] = False
        gmap.keep(mask)
        stats.removed = int(drop.size)
    return stats
