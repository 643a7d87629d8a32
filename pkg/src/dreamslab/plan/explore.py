"""Closed-loop exploration: sense, localize, map, plan, act, every tick.

The robot is a unicycle carrying the camera at a fixed height. Each tick it
renders a ground-truth frame at its true pose, localizes the frame against
the last keyframe's Gaussians, integrates a keyframe when it has moved enough,
and steers along a planned path. Planning state (free space, waypoint graph,
sub-regions, tour order) is rebuilt from scratch at every waypoint arrival;
when the region being explored runs out of under-explored waypoints, the
frontier is dreamed, the regions re-clustered, and the tour re-ordered.

Everything is deterministic given the world spec and configs: sensor noise is
keyed by tick, dream noise by replan slot, and no other randomness exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import label

from ..dream import Dreamer
from ..geometry import PoseSE3, camera_pose
from ..localize import LocalizeConfig, localize_frame
from ..mapper import (
    FrameOracle,
    MapperConfig,
    SensorModel,
    integrate_frame,
    predict_frame_gaussians,
    prune_untracked,
)
from ..grid import Grid2D
from ..scene import CameraIntrinsics, WorldSpec, render_gt, world_at
from ..splat import PROV_DREAMED, GaussianMap
from .config import PlannerConfig
from .dreaming import dream_structures, retire_dreamed, retire_replaced
from .freespace import FREE, OCCUPIED, UNKNOWN, FreeSpaceMap, extract_free_space
from .pathing import NoPath, plan_path
from .regions import cluster_subregions
from .topo import NoFreeSpace, TopoGraph, build_topo_graph
from .tsp import order_subregions_tsp
from .views import score_waypoint_views


class StuckDetection(RuntimeError):
    """The robot made no progress for the stuck window; aborts with context."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def wrap_angle(a: float) -> float:
    return float(math.atan2(math.sin(a), math.cos(a)))


@dataclass
class ExploreConfig:
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    mapper: MapperConfig = field(default_factory=MapperConfig)
    v_max: float = 0.4
    w_max: float = 0.6
    dt: float = 0.2
    t_stuck: float = 30.0
    keyframe_dist: float = 0.25
    keyframe_yaw: float = 0.35
    prune_every: int = 20  # keyframes between density prunes
    waypoint_tol: float = 0.2
    vertex_tol: float = 0.08
    turn_gate: float = 0.6  # rad; drive forward only when roughly aligned
    mover_expiry: float = 3.0  # s a tracked mover keeps blocking paths
    retire_margin: float = 0.1
    creep_dist: float = 0.6  # blind-frontier hop when nothing is plannable
    progress_eps: float = 0.3  # net motion that resets the stuck timer
    dream_enabled: bool = True
    bake_movers: bool = False  # crippled baseline: movers become walls
    cam_width: int = 64
    score_width: int = 33  # render size for view scoring and dreaming
    dream_stride: int = 1


@dataclass
class ExplorationState:
    spec: WorldSpec
    cfg: ExploreConfig
    K: CameraIntrinsics
    score_K: CameraIntrinsics
    sensor: SensorModel
    dreamer: Dreamer
    loc_cfg: LocalizeConfig
    gmap: GaussianMap
    bounds: tuple

    true_xy: np.ndarray
    true_yaw: float
    est_pose: PoseSE3

    time: float = 0.0
    tick: int = 0
    mode: str = "explore"
    done: bool = False

    # keyframe anchor the localizer tracks against
    kf_frame: int = 0
    kf_time: float = 0.0
    kf_gt: object = None
    kf_true_pose: PoseSE3 = None
    kf_est_pose: PoseSE3 = None
    integrations: int = 0

    # planning state, rebuilt at events
    fs: FreeSpaceMap = None
    graph: TopoGraph = None
    target_node: int = -1
    target_xy: np.ndarray = None
    path: np.ndarray = None
    path_i: int = 0
    active_anchor: np.ndarray = None  # representative position being explored
    pending_regions: int = 0
    creep: bool = False  # current path is a blind hop, not a planned one

    # cells the robot has physically swept; free by construction, since a
    # forward camera at standing height never images the floor underfoot
    trail: Grid2D = None
    trail_last: np.ndarray = None

    # logs
    trajectory: list = field(default_factory=list)  # (t, x, y, yaw, mode)
    est_traj: list = field(default_factory=list)  # (t, PoseSE3)
    gt_traj: list = field(default_factory=list)
    events: list = field(default_factory=list)

    last_progress_time: float = 0.0
    progress_anchor: np.ndarray = None

    def est_xy(self) -> np.ndarray:
        return self.est_pose.t[:2].copy()

    def est_yaw(self) -> float:
        R = self.est_pose.R
        return float(math.atan2(R[1, 2], R[0, 2]))

    def log_event(self, kind: str, **extra):
        self.events.append({"tick": self.tick, "t": round(self.time, 6), "kind": kind, **extra})


def init_exploration(
    spec: WorldSpec,
    start_xy,
    start_yaw: float,
    bounds: tuple,
    cfg: ExploreConfig | None = None,
    dreamer: Dreamer | None = None,
    sensor: SensorModel | None = None,
) -> ExplorationState:
    """Set up an episode; the first step senses and anchors the map."""
    cfg = cfg or ExploreConfig()
    K = CameraIntrinsics.with_fov90(cfg.cam_width, cfg.cam_width)
    score_K = CameraIntrinsics.with_fov90(cfg.score_width, cfg.score_width)
    sensor = sensor or SensorModel(stride=2)
    if dreamer is None:
        from ..dream import DreamerConfig

        dreamer = Dreamer(DreamerConfig(), world=spec, K=score_K)
    start_xy = np.asarray(start_xy, dtype=np.float64).reshape(2)
    pose0 = camera_pose(start_xy[0], start_xy[1], cfg.planner.camera_height, start_yaw)
    st = ExplorationState(
        spec=spec,
        cfg=cfg,
        K=K,
        score_K=score_K,
        sensor=sensor,
        dreamer=dreamer,
        loc_cfg=LocalizeConfig(refine=None),
        gmap=GaussianMap(),
        bounds=tuple(bounds),
        true_xy=start_xy.copy(),
        true_yaw=float(start_yaw),
        est_pose=pose0,
        progress_anchor=start_xy.copy(),
        trail=Grid2D.from_bounds(tuple(bounds), cfg.planner.cell, fill=False, dtype=bool),
    )
    _stamp_trail(st)
    return st


# --- planning helpers -----------------------------------------------------


def reachable_unknown(fs: FreeSpaceMap, robot_xy) -> np.ndarray:
    """Unknown cells connected to the robot through non-occupied cells.

    Unknown territory sealed behind observed walls can never be visited and
    must not keep the episode alive.
    """
    passable = fs.grid.values != OCCUPIED
    comp, _ = label(passable, structure=np.ones((3, 3), dtype=bool))
    ix, iy = fs.grid.cell_of(robot_xy[0], robot_xy[1])
    ix = int(np.clip(ix, 0, fs.grid.nx - 1))
    iy = int(np.clip(iy, 0, fs.grid.ny - 1))
    mine = comp[iy, ix]
    if mine == 0:
        # robot cell reads occupied (noise); take the largest component
        sizes = np.bincount(comp.ravel())
        sizes[0] = 0
        mine = int(np.argmax(sizes)) if sizes.size > 1 else 0
    return (fs.grid.values == UNKNOWN) & (comp == mine)


def _disc_offsets(r_cells: int) -> np.ndarray:
    d = np.arange(-r_cells, r_cells + 1)
    dx, dy = np.meshgrid(d, d)
    return (dx * dx + dy * dy) <= r_cells * r_cells


def underexplored_scores(fs: FreeSpaceMap, unknown_mask: np.ndarray, nodes_xy: np.ndarray, r_under: float) -> np.ndarray:
    """u(w): fraction of the disc around each waypoint that is still unknown."""
    grid = fs.grid
    r = max(1, int(math.floor(r_under / grid.cell)))
    disc = _disc_offsets(r)
    out = np.zeros(len(nodes_xy))
    for i, xy in enumerate(nodes_xy):
        ix, iy = (int(v) for v in grid.cell_of(xy[0], xy[1]))
        x0, x1 = max(0, ix - r), min(grid.nx, ix + r + 1)
        y0, y1 = max(0, iy - r), min(grid.ny, iy + r + 1)
        if x0 >= x1 or y0 >= y1:
            continue
        sub = disc[y0 - (iy - r) : y1 - (iy - r), x0 - (ix - r) : x1 - (ix - r)]
        denom = int(sub.sum())
        if denom == 0:
            continue
        out[i] = float((unknown_mask[y0:y1, x0:x1] & sub).sum()) / denom
    return out


def select_local_waypoint(region, fs: FreeSpaceMap, g: TopoGraph, robot_xy, cfg: PlannerConfig, u=None, drow=None, min_dist=0.0):
    """Next waypoint of the region, or None when it is explored out.

    Score is u(w) over (epsilon + graph distance from the robot); ties go to
    the lower node id; members below the done threshold never qualify.
    min_dist skips waypoints the robot already stands on: the floor underfoot
    is outside the camera's view, so staying put can never lower their score.
    """
    if u is None:
        u = underexplored_scores(fs, reachable_unknown(fs, robot_xy), g.positions(), cfg.r_under)
    if drow is None:
        src = g.nearest_node(robot_xy)
        drow = g.distances(sources=[src])[0] + float(np.hypot(*(g.nodes[src].xy - np.asarray(robot_xy))))
    best = None
    best_score = -1.0
    for m in sorted(region.members):
        if u[m] < cfg.done_threshold:
            continue
        if min_dist > 0.0 and float(np.hypot(*(g.nodes[m].xy - np.asarray(robot_xy)))) < min_dist:
            continue
        d = drow[m]
        score = 0.0 if not np.isfinite(d) else u[m] / (cfg.eps_distance + d)
        if score > best_score + 1e-15:
            best, best_score = m, score
    return best


def _stamp_trail(st: ExplorationState):
    """Mark the robot's footprint disc around the current estimate."""
    est = st.est_xy()
    if st.trail_last is not None and np.hypot(*(est - st.trail_last)) < 0.5 * st.trail.cell:
        return
    st.trail_last = est.copy()
    r = max(1, int(math.floor(st.cfg.planner.robot_radius / st.trail.cell)))
    ix, iy = (int(v) for v in st.trail.cell_of(est[0], est[1]))
    x0, x1 = max(0, ix - r), min(st.trail.nx, ix + r + 1)
    y0, y1 = max(0, iy - r), min(st.trail.ny, iy + r + 1)
    if x0 >= x1 or y0 >= y1:
        return
    disc = _disc_offsets(r)
    st.trail.values[y0:y1, x0:x1] |= disc[y0 - (iy - r) : y1 - (iy - r), x0 - (ix - r) : x1 - (ix - r)]


def _tracked_movers(st: ExplorationState) -> list:
    """Footprints (x, y, r) of movers tracked recently enough to trust."""
    if st.cfg.bake_movers:
        return []
    out = []
    horizon = st.cfg.mover_expiry / st.cfg.dt
    for oid in sorted(st.gmap.tracks):
        frames = [f for f, _ in st.gmap.tracks[oid]]
        if not frames or st.tick - max(frames) > horizon:
            continue
        sel = np.flatnonzero(st.gmap.object_id == oid)
        if sel.size == 0:
            continue
        placed, _ = st.gmap.placed(sel, int(max(frames)))
        xy = placed[:, :2]
        c = xy.mean(axis=0)
        r = float(np.hypot(*(xy - c).T).max()) + 0.05
        out.append((float(c[0]), float(c[1]), r))
    return out


def _refresh_fs(st: ExplorationState):
    st.fs = extract_free_space(
        st.gmap, st.cfg.planner, bounds=st.bounds, frame=st.tick,
        include_dreamed=True, bake_movers=st.cfg.bake_movers,
    )
    v = st.fs.grid.values
    v[st.trail.values & (v == UNKNOWN)] = FREE


def _frontier_rescue(st: ExplorationState, unk: np.ndarray):
    """Path to a free cell that borders a lot of reachable unknown.

    Runs only when no waypoint can be planned to; covers free pockets whose
    waypoints the skeleton missed or that connect through unknown space.
    Candidates are tried by unknown gain, not proximity: the nearest border
    cell is usually the robot's own footprint edge, a pointless hop.
    """
    from scipy.ndimage import binary_dilation, uniform_filter

    grid = st.fs.grid
    border = binary_dilation(unk, structure=np.ones((3, 3), dtype=bool)) & (grid.values == FREE)
    if not border.any():
        return None
    iy, ix = np.nonzero(border)
    x, y = grid.center_of(ix, iy)
    est = st.est_xy()
    d = np.hypot(x - est[0], y - est[1])
    near = unk.astype(np.float64)
    k = 2 * max(1, int(math.floor(0.5 / grid.cell))) + 1
    gain = uniform_filter(near, size=k, mode="constant")[iy, ix]
    keep = d >= 2 * st.cfg.waypoint_tol
    if not keep.any():
        return None
    cand = np.flatnonzero(keep)
    cand = cand[np.lexsort((d[cand], -gain[cand]))]
    for k in cand[:20]:
        try:
            return plan_path((est[0], est[1]), (x[k], y[k]), st.fs, _tracked_movers(st), st.cfg.planner.robot_radius), np.array([x[k], y[k]])
        except NoPath:
            continue
    return None


def _creep_corridor_clear(st: ExplorationState, pts: np.ndarray) -> bool:
    """No occupied evidence or tracked mover within the robot disc of any point."""
    grid = st.fs.grid
    r = st.cfg.planner.robot_radius
    ix, iy = grid.cell_of(pts[:, 0], pts[:, 1])
    if not grid.in_bounds(ix, iy).all():
        return False
    occ = st.fs.occupied
    rc = max(1, int(math.ceil(r / grid.cell)))
    for jx, jy in zip(ix, iy):
        x0, x1 = max(0, jx - rc), min(grid.nx, jx + rc + 1)
        y0, y1 = max(0, jy - rc), min(grid.ny, jy + rc + 1)
        if occ[y0:y1, x0:x1].any():
            return False
    for mx, my, mr in _tracked_movers(st):
        if np.hypot(pts[:, 0] - mx, pts[:, 1] - my).min() <= mr + r:
            return False
    return True


def _creep(st: ExplorationState, unk: np.ndarray) -> bool:
    """Short straight hop toward unknown space when no waypoint is plannable.

    The camera cannot certify floor inside its standing-height blind disc, so
    a freshly spawned robot (or one that turned into an unseen pocket) sits on
    a free island no planned path can leave. Obstacle evidence has no such
    blind zone: anything wall-like ahead paints the obstacle slab at its true
    position. A hop is taken only along a heading whose swept corridor is
    clear of occupied cells and tracked movers and that gains unknown ground.
    """
    grid = st.fs.grid
    est = st.est_xy()
    yaw = st.est_yaw()
    step = 0.5 * grid.cell
    n = max(1, int(round(st.cfg.creep_dist / step)))
    gain_r = max(1, int(math.floor(0.5 / grid.cell)))
    disc = _disc_offsets(gain_r)
    best_gain, best_end = 0, None
    for k in range(0, 11):
        for s in (1.0, -1.0) if k else (1.0,):
            h = yaw + s * k * 0.3
            d = np.array([math.cos(h), math.sin(h)])
            pts = est[None, :] + np.arange(1, n + 1)[:, None] * step * d[None, :]
            if not _creep_corridor_clear(st, pts):
                continue
            ix, iy = (int(v) for v in grid.cell_of(pts[-1, 0], pts[-1, 1]))
            x0, x1 = max(0, ix - gain_r), min(grid.nx, ix + gain_r + 1)
            y0, y1 = max(0, iy - gain_r), min(grid.ny, iy + gain_r + 1)
            sub = disc[y0 - (iy - gain_r) : y1 - (iy - gain_r), x0 - (ix - gain_r) : x1 - (ix - gain_r)]
            gain = int((unk[y0:y1, x0:x1] & sub).sum())
            if gain > best_gain:
                best_gain, best_end = gain, pts[-1]
    if best_end is None:
        return False
    st.path = np.vstack([est, best_end])
    st.target_xy = best_end.copy()
    st.target_node, st.path_i, st.mode, st.creep = -1, 0, "explore", True
    st.log_event("creep", to=[float(best_end[0]), float(best_end[1])], gain=best_gain)
    return True


def _dream_frontier(st: ExplorationState, u: np.ndarray):
    """Dream at the under-explored waypoints, most unknown first."""
    cfg = st.cfg.planner
    cand = [i for i in range(len(u)) if u[i] >= cfg.done_threshold]
    cand.sort(key=lambda i: (-u[i], i))
    total = 0
    views = 0
    for slot, nid in enumerate(cand[: cfg.dream_view_cap]):
        scores = score_waypoint_views(st.gmap, st.graph.nodes[nid].xy, st.score_K, cfg, frame=st.tick)
        poses = [scores.poses[i] for i in scores.selected]
        if not poses:
            continue
        stats = dream_structures(
            st.gmap, poses, st.dreamer, st.score_K, cfg, st.sensor,
            frame=st.tick, key_base=(st.tick << 6) + slot * 4, stride=st.cfg.dream_stride,
        )
        total += stats.added
        views += stats.views_dreamed
    if total:
        st.log_event("dream", waypoints=len(cand[: cfg.dream_view_cap]), views=views, added=total)
        _refresh_fs(st)
    return total


def _replan(st: ExplorationState, dream_ok: bool = True):
    """Rebuild all planning state and choose the next goal."""
    cfg = st.cfg.planner
    st.creep = False
    _refresh_fs(st)
    fs_obs = extract_free_space(st.gmap, cfg, bounds=st.bounds, frame=st.tick, include_dreamed=False)
    replaced = retire_replaced(st.gmap, fs_obs)
    if replaced:
        st.log_event("retire", rule="replaced", removed=replaced)
        _refresh_fs(st)

    est = st.est_xy()
    try:
        st.graph = build_topo_graph(st.fs, cfg.d_wp, cfg.min_clearance)
    except NoFreeSpace:
        st.target_node, st.target_xy, st.path = -1, None, None
        st.mode = "wait"
        return
    unk = reachable_unknown(st.fs, est)
    u = underexplored_scores(st.fs, unk, st.graph.positions(), cfg.r_under)

    # a region whose every waypoint is explored out is visited
    dists = st.graph.distances()
    regions = cluster_subregions(st.graph, cfg.r_sub, dists)
    for r in regions:
        r.visited = all(u[m] < cfg.done_threshold for m in r.members)

    # completion of the region being explored triggers frontier dreaming
    if st.active_anchor is not None and st.cfg.dream_enabled and dream_ok:
        anchor_node = st.graph.nearest_node(st.active_anchor)
        active = next((r for r in regions if anchor_node in r.members), None)
        if active is not None and active.visited and any(not r.visited for r in regions):
            st.log_event("region_done", region=active.id)
            if _dream_frontier(st, u):
                _replan(st, dream_ok=False)
                return

    pending = [r for r in regions if not r.visited]
    st.pending_regions = len(pending)
    if not pending:
        _finish(st)
        return

    order, flagged = order_subregions_tsp(regions, est, st.graph, cfg.exact_tsp_cap, dists)
    order = [rid for rid in order if rid not in flagged]
    st.log_event("replan", order=order, flagged=sorted(flagged), regions=len(regions), pending=len(pending))
    if not order:
        # every pending region is walled off from the tour graph
        rescue = _frontier_rescue(st, unk)
        if rescue is None:
            if _creep(st, unk):
                return
            _finish(st)
            return
        st.path, st.target_xy = rescue
        st.target_node, st.path_i, st.mode = -1, 0, "explore"
        return

    src = st.graph.nearest_node(est)
    drow = dists[src] + float(np.hypot(*(st.graph.nodes[src].xy - est)))
    movers = _tracked_movers(st)
    for rid in order:
        region = regions[rid]
        wp = select_local_waypoint(region, st.fs, st.graph, est, cfg, u, drow, min_dist=st.cfg.waypoint_tol)
        while wp is not None:
            try:
                st.path = plan_path(est, st.graph.nodes[wp].xy, st.fs, movers, cfg.robot_radius)
                st.target_node = wp
                st.target_xy = st.graph.nodes[wp].xy.copy()
                st.path_i = 0
                st.active_anchor = st.graph.nodes[region.representative].xy.copy()
                st.mode = "explore"
                return
            except NoPath:
                u = u.copy()
                u[wp] = 0.0  # defer this waypoint for the rest of the cycle
                wp = select_local_waypoint(region, st.fs, st.graph, est, cfg, u, drow, min_dist=st.cfg.waypoint_tol)
        st.log_event("deferred", region=rid)

    # nothing plannable: movers in the way mean waiting helps, walls do not
    if movers:
        st.target_node, st.target_xy, st.path = -1, None, None
        st.mode = "wait"
        st.log_event("wait")
        return
    rescue = _frontier_rescue(st, unk)
    if rescue is not None:
        st.path, st.target_xy = rescue
        st.target_node, st.path_i, st.mode = -1, 0, "explore"
        return
    if _creep(st, unk):
        return
    _finish(st)


def _finish(st: ExplorationState):
    # dreamed Gaussians are planning scaffolding, never part of the delivered
    # map; whatever observation has not already replaced is dropped wholesale
    dreamed = st.gmap.provenance == PROV_DREAMED
    removed = int(dreamed.sum())
    if removed:
        st.gmap.keep(~dreamed)
    st.done = True
    st.mode = "done"
    st.target_node, st.target_xy, st.path = -1, None, None
    st.log_event("done", retired=removed)


# --- per-tick pipeline ----------------------------------------------------


def _sense_localize_map(st: ExplorationState):
    true_pose = camera_pose(st.true_xy[0], st.true_xy[1], st.cfg.planner.camera_height, st.true_yaw)
    state = world_at(st.spec, st.time)
    gt = render_gt(state, true_pose, st.K)

    if st.tick == 0:
        st.est_pose = true_pose  # the first pose anchors the map frame
        oracle = FrameOracle(st.spec, st.time, st.time, true_pose, true_pose, gt_t=gt, gt_next=gt)
        pred = predict_frame_gaussians(gt.rgb, gt.rgb, oracle, st.K, st.sensor, frame=0)
        keyframe = True
    else:
        oracle = FrameOracle(st.spec, st.kf_time, st.time, st.kf_true_pose, true_pose, gt_t=st.kf_gt, gt_next=gt)
        pred = predict_frame_gaussians(gt.rgb, st.kf_gt.rgb, oracle, st.K, st.sensor, frame=st.tick)
        st.est_pose, diag = localize_frame(
            st.kf_est_pose, st.gmap, pred, st.dreamer, st.kf_gt.rgb, gt.rgb,
            st.K, st.loc_cfg, frame_t=st.kf_frame, time_t=st.kf_time, pose_next_oracle=true_pose,
        )
        if diag.degenerate_seed:
            st.log_event("degenerate_seed")
            st.est_pose = st.kf_est_pose
        moved = st.est_pose.translation_distance_to(st.kf_est_pose)
        turned = st.est_pose.rotation_angle_to(st.kf_est_pose)
        keyframe = moved >= st.cfg.keyframe_dist or turned >= st.cfg.keyframe_yaw

    if keyframe:
        integrate_frame(st.gmap, pred, st.est_pose, st.tick, st.K, st.cfg.mapper)
        st.integrations += 1
        depth_img = np.full((st.K.height, st.K.width), -np.inf)
        uv = np.asarray(pred.next_uv)
        if uv.size:
            depth_img[uv[:, 1], uv[:, 0]] = np.asarray(pred.next_centers)[:, 2]
        retired = retire_dreamed(st.gmap, st.est_pose, depth_img, st.K, st.cfg.retire_margin)
        if retired:
            st.log_event("retire", rule="frustum", removed=retired)
        if st.integrations % st.cfg.prune_every == 0:
            prune_untracked(st.gmap, st.tick, st.cfg.mapper)
        st.kf_frame, st.kf_time, st.kf_gt = st.tick, st.time, gt
        st.kf_true_pose, st.kf_est_pose = true_pose, st.est_pose
        if st.fs is not None:
            _refresh_fs(st)
    return keyframe


def _act(st: ExplorationState):
    v = w = 0.0
    est = st.est_xy()
    yaw = st.est_yaw()
    if st.mode == "explore" and st.path is not None and len(st.path):
        while st.path_i < len(st.path) - 1 and np.hypot(*(st.path[st.path_i] - est)) < st.cfg.vertex_tol:
            st.path_i += 1
        tgt = st.path[st.path_i]
        vec = tgt - est
        d = float(np.hypot(*vec))
        if d > 1e-9:
            err = wrap_angle(math.atan2(vec[1], vec[0]) - yaw)
            w = float(np.clip(err / st.cfg.dt, -st.cfg.w_max, st.cfg.w_max))
            if abs(err) < st.cfg.turn_gate:
                v = min(st.cfg.v_max, d / st.cfg.dt)
    st.true_yaw = wrap_angle(st.true_yaw + w * st.cfg.dt)
    st.true_xy = st.true_xy + v * st.cfg.dt * np.array([math.cos(st.true_yaw), math.sin(st.true_yaw)])
    st.time += st.cfg.dt


def step_exploration(st: ExplorationState) -> ExplorationState:
    """One tick of the sense, localize, map, plan, act loop."""
    if st.done:
        return st

    keyframe = _sense_localize_map(st)
    _stamp_trail(st)

    # record the post-localization state for this timestamp
    est = st.est_xy()
    true_pose = camera_pose(st.true_xy[0], st.true_xy[1], st.cfg.planner.camera_height, st.true_yaw)
    st.trajectory.append((st.time, float(est[0]), float(est[1]), st.est_yaw(), st.mode))
    st.est_traj.append((st.time, st.est_pose))
    st.gt_traj.append((st.time, true_pose))

    # plan: arrivals and missing goals rebuild, standing paths get validated
    if st.tick == 0 or (st.mode == "explore" and st.target_xy is None):
        _replan(st)
    elif st.mode == "explore" and st.target_xy is not None:
        if float(np.hypot(*(st.target_xy - est))) <= st.cfg.waypoint_tol:
            st.log_event("arrival", node=int(st.target_node))
            st.target_xy, st.path = None, None
            _mark_progress(st)
            _replan(st)
        elif keyframe or st.tick % 5 == 0:
            _validate_path(st)
    elif st.mode == "wait":
        if st.tick % 5 == 0:
            _replan(st)

    if not st.done and np.hypot(*(est - st.progress_anchor)) >= st.cfg.progress_eps:
        _mark_progress(st)
    if not st.done and st.time - st.last_progress_time > st.cfg.t_stuck:
        raise StuckDetection(
            "no exploration progress within the stuck window",
            {
                "tick": st.tick,
                "time": round(st.time, 3),
                "mode": st.mode,
                "position": [float(est[0]), float(est[1])],
                "target": None if st.target_xy is None else [float(st.target_xy[0]), float(st.target_xy[1])],
                "pending_regions": st.pending_regions,
            },
        )

    _act(st)
    st.tick += 1
    return st


def _mark_progress(st: ExplorationState):
    st.last_progress_time = st.time
    st.progress_anchor = st.est_xy()


def _validate_path(st: ExplorationState):
    from .pathing import path_blocked_at

    if st.creep:
        # a creep segment crosses unknown floor on purpose; it only dies when
        # occupied evidence or a mover shows up inside its corridor
        est = st.est_xy()
        vec = st.target_xy - est
        d = float(np.hypot(*vec))
        step = 0.5 * st.fs.grid.cell
        n = max(1, int(math.ceil(d / step)))
        pts = est[None, :] + np.linspace(1.0 / n, 1.0, n)[:, None] * vec[None, :]
        if not _creep_corridor_clear(st, pts):
            st.target_xy, st.path = None, None
            _replan(st)
        return

    movers = _tracked_movers(st)
    hit = path_blocked_at(st.path, st.fs, movers, st.cfg.planner.robot_radius, start=st.path_i)
    if hit is None:
        return
    est = st.est_xy()
    try:
        st.path = plan_path(est, st.target_xy, st.fs, movers, st.cfg.planner.robot_radius)
        st.path_i = 0
        st.log_event("replan_path", reason="blocked")
    except NoPath:
        try:
            plan_path(est, st.target_xy, st.fs, (), st.cfg.planner.robot_radius)
        except NoPath:
            # walls, not movers: the goal itself is stale
            st.target_xy, st.path = None, None
            _replan(st)
            return
        st.mode = "wait"
        st.path = None
        st.log_event("wait", reason="mover")


def run_exploration(st: ExplorationState, tick_limit: int = 20000) -> ExplorationState:
    """Step until the episode is done or the tick budget runs out."""
    while not st.done and st.tick < tick_limit:
        step_exploration(st)
    return st
