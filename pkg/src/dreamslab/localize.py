"""Frame-to-frame camera tracking.

The relative transform ΔT maps camera-frame-t coordinates of a time-t surface
point to camera-frame-(t+1) coordinates, so camera-to-world poses compose as
C_{t+1} = C_t ∘ ΔT⁻¹. The geometric seed comes from weighted point-cloud
alignment of pixel-associated pairs (foreground included: both sides describe
the scene at time t, so mover points obey the same rigid camera motion). The
seed is then refined against the cross-time dreamed image by damped
Gauss-Newton on a numeric Jacobian, accepting only steps that lower the full
photometric loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import PoseSE3, quat_premul
from .losses import photometric_loss
from .scene import CameraIntrinsics
from .splat import GaussianMap, RenderConfig, rasterize


class TooFewPairs(ValueError):
    pass


class DegenerateGeometry(ValueError):
    pass


class EmptyOverlap(ValueError):
    pass


class RenderEmpty(RuntimeError):
    pass


class DivergedOptimization(RuntimeError):
    pass


@dataclass
class CorrespondenceSet:
    """Pixel-associated point pairs: p in camera frame t+1, p_bar in camera frame t."""

    p: np.ndarray  # (N, 3)
    p_bar: np.ndarray  # (N, 3)
    weights: np.ndarray  # (N,) in [0, 1]

    def __post_init__(self) -> None:
        self.p = np.asarray(self.p, dtype=np.float64).reshape(-1, 3)
        self.p_bar = np.asarray(self.p_bar, dtype=np.float64).reshape(-1, 3)
        if self.weights is None:
            self.weights = np.ones(self.p.shape[0])
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if not (self.p.shape[0] == self.p_bar.shape[0] == self.weights.shape[0]):
            raise ValueError("pair arrays must have equal length")
        if not (np.all(np.isfinite(self.p)) and np.all(np.isfinite(self.p_bar))):
            raise ValueError("pair coordinates must be finite")

    def __len__(self) -> int:
        return self.p.shape[0]


@dataclass
class RefineConfig:
    max_iters: int = 50
    lambda0: float = 1e-3  # Levenberg damping, x10 on reject, /10 on accept
    fd_step: float = 1e-4  # central-difference step on the 6-vector twist
    rel_tol: float = 1e-6  # stop when relative loss decrease falls below this
    step_tol: float = 1e-8  # stop when the accepted step norm falls below this
    patience: int = 10  # consecutive rejected proposals before giving up
    render: RenderConfig = field(default_factory=RenderConfig)


def svd_align(pairs: CorrespondenceSet, weighted: bool = True) -> tuple[PoseSE3, float]:
    """Weighted least-squares rigid transform with p ≈ ΔT(p_bar); returns (ΔT, residual RMS)."""
    if len(pairs) < 3:
        raise TooFewPairs(f"need >= 3 pairs, got {len(pairs)}")
    w = pairs.weights if weighted else np.ones(len(pairs))
    wsum = float(w.sum())
    if wsum <= 0:
        raise ValueError("weights sum to zero")
    wn = w / wsum
    c_bar = wn @ pairs.p_bar
    c = wn @ pairs.p
    A = pairs.p_bar - c_bar
    B = pairs.p - c
    H = (A * wn[:, None]).T @ B
    U, S, Vt = np.linalg.svd(H)
    spread = float(np.sqrt((wn * (A * A).sum(axis=1)).sum()))
    if spread < 1e-12 or S[1] <= 1e-9 * max(S[0], 1e-30):
        raise DegenerateGeometry("points are coincident or collinear")
    D = np.diag([1.0, 1.0, float(np.sign(np.linalg.det(Vt.T @ U.T)))])
    R = Vt.T @ D @ U.T
    t = c - R @ c_bar
    delta = PoseSE3.from_rt(R, t)
    res = pairs.p - (pairs.p_bar @ R.T + t)
    rms = float(np.sqrt((wn * (res * res).sum(axis=1)).sum()))
    return delta, rms


def build_correspondences(
    pred,
    gmap: GaussianMap,
    frame_t: int,
    cam_pose_t: PoseSE3,
    include_foreground: bool = True,
) -> CorrespondenceSet:
    """Pair the cross-time prediction with map Gaussians created at frame t.

    `pred.curr_*` holds the scene-at-t points seen by frame-t pixels, expressed
    in camera frame t+1; the matching map Gaussians carry the same source pixel
    and are moved into camera frame t with the frame-t pose estimate.
    """
    sel = np.flatnonzero(gmap.source_frame == frame_t)
    if sel.size == 0 or len(pred.curr_uv) == 0:
        raise EmptyOverlap("no shared pixels between prediction and map")
    lut = {(int(u), int(v)): int(i) for i, (u, v) in zip(sel, gmap.source_uv[sel])}
    rows_pred = []
    rows_map = []
    for j, (u, v) in enumerate(pred.curr_uv):
        i = lut.get((int(u), int(v)))
        if i is not None:
            rows_pred.append(j)
            rows_map.append(i)
    if not rows_pred:
        raise EmptyOverlap("no shared pixels between prediction and map")
    rows_pred = np.array(rows_pred)
    rows_map = np.array(rows_map)
    if not include_foreground:
        keep = np.asarray(pred.curr_oid)[rows_pred] == 0
        keep &= gmap.object_id[rows_map] == 0
        rows_pred, rows_map = rows_pred[keep], rows_map[keep]
        if rows_pred.size == 0:
            raise EmptyOverlap("no background pixels shared")
    inv = cam_pose_t.inverse()
    p_bar = gmap.centers[rows_map] @ inv.R.T + inv.t
    p = np.asarray(pred.curr_centers)[rows_pred]
    wgt = np.minimum(np.asarray(pred.curr_conf)[rows_pred], gmap.confidence[rows_map])
    return CorrespondenceSet(p, p_bar, wgt)


def map_in_camera_frame(gmap: GaussianMap, idx: np.ndarray, cam_pose: PoseSE3, frame: int | None = None) -> GaussianMap:
    """Copy the chosen Gaussians into a map whose coordinates are camera-local."""
    inv = cam_pose.inverse()
    centers, quats = gmap.placed(idx, frame)
    out = GaussianMap()
    out.append_arrays(
        centers @ inv.R.T + inv.t,
        gmap.scales[idx],
        quat_premul(inv.q, quats),
        gmap.opacity[idx],
        gmap.color[idx],
        gmap.confidence[idx],
        gmap.object_id[idx],
        gmap.provenance[idx],
        gmap.source_frame[idx],
        gmap.source_uv[idx],
        gmap.last_tracked[idx],
    )
    return out


def _render_rgb(gmap_t: GaussianMap, delta: PoseSE3, K: CameraIntrinsics, cfg: RenderConfig):
    # a camera whose view transform equals delta sees point p_bar at delta(p_bar)
    return rasterize(gmap_t, delta.inverse(), K, cfg)


def refine_pose_photometric(
    init: PoseSE3,
    gmap_t: GaussianMap,
    dreamed: np.ndarray,
    K: CameraIntrinsics,
    cfg: RefineConfig | None = None,
    mask: np.ndarray | None = None,
) -> tuple[PoseSE3, float, int]:
    """Descend L_photo(dreamed, render(gmap_t at ΔT)) from the seed; returns (ΔT, loss, iters).

    Steps come from Gauss-Newton on the raw residual vector (squared-error
    surrogate) with Levenberg damping; acceptance is gated on the full
    L1+SSIM loss so accepted iterates never increase it.
    """
    cfg = cfg or RefineConfig()
    dreamed = np.asarray(dreamed, dtype=np.float64)

    def render(delta: PoseSE3) -> np.ndarray:
        return _render_rgb(gmap_t, delta, K, cfg.render).rgb

    def loss(img: np.ndarray) -> float:
        return photometric_loss(dreamed, img, cfg.render, mask)

    first = _render_rgb(gmap_t, init, K, cfg.render)
    if not np.any(first.alpha > 0):
        raise RenderEmpty("no Gaussian visible from the initial pose")

    cur = init
    cur_img = first.rgb
    cur_loss = loss(cur_img)
    if not np.isfinite(cur_loss):
        raise DivergedOptimization("non-finite loss at the initial pose")
    lam = cfg.lambda0
    iters = 0
    for _ in range(cfg.max_iters):
        iters += 1
        r = (cur_img - dreamed).ravel()
        J = np.empty((r.size, 6))
        for k in range(6):
            step = np.zeros(6)
            step[k] = cfg.fd_step
            plus = render(PoseSE3.from_twist(step) @ cur)
            minus = render(PoseSE3.from_twist(-step) @ cur)
            J[:, k] = (plus - minus).ravel() / (2 * cfg.fd_step)
        JtJ = J.T @ J
        g = J.T @ r
        accepted = False
        rejects = 0
        while rejects < cfg.patience:
            try:
                delta = np.linalg.solve(JtJ + lam * np.eye(6), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                rejects += 1
                continue
            cand = PoseSE3.from_twist(delta) @ cur
            cand_img = render(cand)
            cand_loss = loss(cand_img)
            if not np.isfinite(cand_loss):
                raise DivergedOptimization("non-finite loss during refinement")
            if cand_loss < cur_loss:
                rel = (cur_loss - cand_loss) / max(cur_loss, 1e-30)
                cur, cur_img, cur_loss = cand, cand_img, cand_loss
                lam = max(lam / 10, 1e-12)
                accepted = True
                if rel < cfg.rel_tol or np.linalg.norm(delta) < cfg.step_tol:
                    return cur, cur_loss, iters
                break
            lam *= 10
            rejects += 1
        if not accepted:
            break
    return cur, cur_loss, iters


@dataclass
class FrameDiagnostics:
    frame: int
    pairs: int
    seed_rms: float
    refine_iters: int
    final_loss: float
    degenerate_seed: bool


@dataclass
class LocalizeConfig:
    refine: RefineConfig | None = field(default_factory=RefineConfig)
    include_foreground: bool = True  # use mover pixels in the SVD seed
    mask_foreground_loss: bool = False  # exclude dilated fg pixels from Eq-style loss
    weighted_svd: bool = True


def localize_frame(
    prev_pose: PoseSE3,
    gmap: GaussianMap,
    pred,
    dreamer,
    img_t: np.ndarray,
    img_next: np.ndarray,
    K: CameraIntrinsics,
    cfg: LocalizeConfig,
    frame_t: int,
    time_t: float,
    pose_next_oracle: PoseSE3,
) -> tuple[PoseSE3, FrameDiagnostics]:
    """One tracking step: seed, dream, refine, compose; returns (T_{t+1}, diagnostics)."""
    from .dream import make_inpaint_mask_M

    degenerate = False
    seed_rms = float("nan")
    npairs = 0
    try:
        pairs = build_correspondences(pred, gmap, frame_t, prev_pose, cfg.include_foreground)
        npairs = len(pairs)
        delta, seed_rms = svd_align(pairs, cfg.weighted_svd)
    except (EmptyOverlap, TooFewPairs, DegenerateGeometry):
        degenerate = True
        delta = PoseSE3.identity()

    final_loss = float("nan")
    iters = 0
    if cfg.refine is not None:
        fg_next = np.zeros((K.height, K.width), dtype=bool)
        uv = np.asarray(pred.next_uv)
        oid = np.asarray(pred.next_oid)
        if uv.size:
            fg = oid > 0
            fg_next[uv[fg, 1], uv[fg, 0]] = True
        mask_m = make_inpaint_mask_M(fg_next, dreamer.cfg.dilation_px)
        dreamed = dreamer.cross_time(img_t, img_next, mask_m, time_t, pose_next_oracle, key=frame_t)
        loss_mask = ~mask_m if cfg.mask_foreground_loss else None
        idx = np.flatnonzero(gmap.source_frame == frame_t)
        if idx.size:
            gmap_t = map_in_camera_frame(gmap, idx, prev_pose, frame=frame_t)
            delta, final_loss, iters = refine_pose_photometric(delta, gmap_t, dreamed, K, cfg.refine, loss_mask)

    pose_next = prev_pose @ delta.inverse()
    return pose_next, FrameDiagnostics(frame_t + 1, npairs, seed_rms, iters, final_loss, degenerate)
