"""Gaussian map representation and the CPU splatting renderer.

Gaussians are stored struct-of-arrays for vectorized rendering; `Gaussian3D` is the
validated single-splat view used at API boundaries. Rendering projects each splat
perspectively, builds its 2D covariance by first-order projection of
R·diag(scales²)·Rᵀ, and composites front-to-back in view-depth order with an
insertion-index tie-break, so output never depends on storage order.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .geometry import PoseSE3, quat_mul, quat_normalize
from .grid import Grid2D
from .scene import CameraIntrinsics

PROV_OBSERVED = 0
PROV_DREAMED = 1
_PROV_NAMES = {PROV_OBSERVED: "observed", PROV_DREAMED: "dreamed"}
_PROV_CODES = {v: k for k, v in _PROV_NAMES.items()}

# splats closer than this to the image plane are dropped; a first-order 2D
# covariance is meaningless at grazing depths
NEAR_PLANE = 0.05


@dataclass
class RenderConfig:
    loss_alpha: float = 0.8  # L1 weight in the photometric loss
    ssim_c1: float = 0.01**2
    ssim_c2: float = 0.03**2
    ssim_window: int = 7
    cutoff_sigma: float = 3.0
    alpha_clamp: float = 0.99
    min_transmittance: float = 1e-3

    def __post_init__(self) -> None:
        if not (0.0 <= self.loss_alpha <= 1.0):
            raise ValueError("loss_alpha must be in [0, 1]")


@dataclass
class Gaussian3D:
    center: np.ndarray
    scales: np.ndarray
    rotation: np.ndarray  # unit quaternion (w, x, y, z)
    opacity: float
    color: np.ndarray
    confidence: float = 1.0
    object_id: int = 0
    provenance: int = PROV_OBSERVED
    source: tuple[int, int, int] | None = None  # (frame_id, u, v)
    last_tracked: int = -1

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.scales = np.asarray(self.scales, dtype=np.float64).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        self.color = np.asarray(self.color, dtype=np.float64).reshape(3)
        if np.any(self.scales <= 0):
            raise ValueError("scales must be positive")
        if abs(np.linalg.norm(self.rotation) - 1.0) > 1e-6:
            raise ValueError("rotation must be unit-norm")
        if not (0.0 < self.opacity <= 1.0):
            raise ValueError("opacity must be in (0, 1]")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError("confidence must be in [0, 1]")


class GaussianMap:
    """Flat Gaussian store plus per-object rigid pose tracks for movers.

    Tracks hold the object's absolute placement per observed frame; a Gaussian
    created at frame f0 is placed at frame f by track(f) ∘ track(f0)⁻¹.
    """

    def __init__(self) -> None:
        self.centers = np.zeros((0, 3))
        self.scales = np.zeros((0, 3))
        self.quats = np.zeros((0, 4))
        self.opacity = np.zeros(0)
        self.color = np.zeros((0, 3))
        self.confidence = np.zeros(0)
        self.object_id = np.zeros(0, dtype=np.uint32)
        self.provenance = np.zeros(0, dtype=np.uint8)
        self.source_frame = np.zeros(0, dtype=np.int64)
        self.source_uv = np.zeros((0, 2), dtype=np.int32)
        self.last_tracked = np.zeros(0, dtype=np.int64)
        self.tracks: dict[int, list[tuple[int, PoseSE3]]] = {}

    def __len__(self) -> int:
        return self.centers.shape[0]

    def append_arrays(
        self,
        centers,
        scales,
        quats,
        opacity,
        color,
        confidence,
        object_id,
        provenance,
        source_frame,
        source_uv,
        last_tracked,
    ) -> None:
        self.centers = np.concatenate([self.centers, np.asarray(centers, dtype=np.float64)])
        self.scales = np.concatenate([self.scales, np.asarray(scales, dtype=np.float64)])
        self.quats = np.concatenate([self.quats, np.asarray(quats, dtype=np.float64)])
        self.opacity = np.concatenate([self.opacity, np.asarray(opacity, dtype=np.float64)])
        self.color = np.concatenate([self.color, np.asarray(color, dtype=np.float64)])
        self.confidence = np.concatenate([self.confidence, np.asarray(confidence, dtype=np.float64)])
        self.object_id = np.concatenate([self.object_id, np.asarray(object_id, dtype=np.uint32)])
        self.provenance = np.concatenate([self.provenance, np.asarray(provenance, dtype=np.uint8)])
        self.source_frame = np.concatenate([self.source_frame, np.asarray(source_frame, dtype=np.int64)])
        self.source_uv = np.concatenate([self.source_uv, np.asarray(source_uv, dtype=np.int32)])
        self.last_tracked = np.concatenate([self.last_tracked, np.asarray(last_tracked, dtype=np.int64)])

    def add(self, g: Gaussian3D) -> None:
        src = g.source if g.source is not None else (-1, -1, -1)
        self.append_arrays(
            g.center[None],
            g.scales[None],
            quat_normalize(g.rotation)[None],
            [g.opacity],
            g.color[None],
            [g.confidence],
            [g.object_id],
            [g.provenance],
            [src[0]],
            [src[1:]],
            [g.last_tracked],
        )

    def gaussian(self, i: int) -> Gaussian3D:
        src = None
        if self.source_frame[i] >= 0:
            src = (int(self.source_frame[i]), int(self.source_uv[i, 0]), int(self.source_uv[i, 1]))
        return Gaussian3D(
            self.centers[i],
            self.scales[i],
            self.quats[i],
            float(self.opacity[i]),
            self.color[i],
            float(self.confidence[i]),
            int(self.object_id[i]),
            int(self.provenance[i]),
            src,
            int(self.last_tracked[i]),
        )

    def keep(self, mask: np.ndarray) -> None:
        """Drop all Gaussians where mask is False (in place)."""
        idx = np.asarray(mask)
        self.centers = self.centers[idx]
        self.scales = self.scales[idx]
        self.quats = self.quats[idx]
        self.opacity = self.opacity[idx]
        self.color = self.color[idx]
        self.confidence = self.confidence[idx]
        self.object_id = self.object_id[idx]
        self.provenance = self.provenance[idx]
        self.source_frame = self.source_frame[idx]
        self.source_uv = self.source_uv[idx]
        self.last_tracked = self.last_tracked[idx]

    # --- pose tracks -----------------------------------------------------

    def set_track(self, object_id: int, frame: int, pose: PoseSE3) -> None:
        entries = self.tracks.setdefault(int(object_id), [])
        if entries and frame <= entries[-1][0]:
            entries[:] = [(f, p) for (f, p) in entries if f < frame]
        entries.append((int(frame), pose))

    def track_at(self, object_id: int, frame: int) -> PoseSE3 | None:
        entries = self.tracks.get(int(object_id))
        if not entries:
            return None
        best = None
        for f, p in entries:
            if f <= frame:
                best = p
            else:
                break
        return best if best is not None else entries[0][1]

    def subset_indices(self, subset) -> np.ndarray:
        if subset is None:
            return np.arange(len(self))
        if subset == "background":
            return np.flatnonzero(self.object_id == 0)
        ids = np.asarray(sorted(set(int(s) for s in subset)), dtype=np.uint32)
        return np.flatnonzero(np.isin(self.object_id, ids))

    def placed(self, idx: np.ndarray, frame: int | None) -> tuple[np.ndarray, np.ndarray]:
        """Centers and orientations of the chosen Gaussians, movers placed at `frame`."""
        centers = self.centers[idx]
        quats = self.quats[idx]
        if frame is None or not self.tracks:
            return centers, quats
        centers = centers.copy()
        quats = quats.copy()
        oids = self.object_id[idx]
        for oid in self.tracks:
            sel = np.flatnonzero(oids == oid)
            if sel.size == 0:
                continue
            now = self.track_at(oid, frame)
            if now is None:
                continue
            src_frames = self.source_frame[idx][sel]
            for f0 in np.unique(src_frames):
                then = self.track_at(oid, int(f0))
                if then is None:
                    continue
                delta = now @ then.inverse()
                rows = sel[src_frames == f0]
                centers[rows] = delta.apply(centers[rows])
                quats[rows] = np.array([quat_mul(delta.q, q) for q in quats[rows]])
        return centers, quats


@dataclass
class RenderResult:
    rgb: np.ndarray  # (H, W, 3)
    alpha: np.ndarray  # (H, W) in [0, 1]
    depth: np.ndarray  # (H, W) expected view depth, inf where alpha == 0


def _quats_to_rots(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty((q.shape[0], 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def _window_contributions(u0, u1, v0, v1):
    """Flatten per-splat pixel windows into contribution index arrays."""
    w = u1 - u0 + 1
    h = v1 - v0 + 1
    counts = w * h
    total = int(counts.sum())
    gi = np.repeat(np.arange(counts.shape[0]), counts)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    k = np.arange(total) - offsets[gi]
    px = u0[gi] + k % w[gi]
    py = v0[gi] + k // w[gi]
    return gi, px, py


def _splat_contributions(gmap, pose, K, cfg, subset, frame, confidence_weighted):
    """Per-pixel front-to-back contribution arrays shared by render and backward.

    Returns (rows, pix, a, g_exp, o_eff, T, z) for contributions surviving the
    early transmittance stop, where rows index into the map arrays, pix is the
    flat pixel index, a the clamped alpha, g_exp the Gaussian falloff, o_eff
    the effective opacity, T the exclusive transmittance, z the view depth.
    """
    empty = (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)) + tuple(np.zeros(0) for _ in range(5))
    idx = gmap.subset_indices(subset)
    if idx.size == 0:
        return empty
    centers, quats = gmap.placed(idx, frame)
    inv = pose.inverse()
    X = centers @ inv.R.T + inv.t
    vis = X[:, 2] > NEAR_PLANE
    idx, X, quats = idx[vis], X[vis], quats[vis]
    if idx.size == 0:
        return empty

    # global front-to-back order: view depth, ties by insertion index
    order = np.lexsort((idx, X[:, 2]))
    idx, X, quats = idx[order], X[order], quats[order]

    x, y, z = X[:, 0], X[:, 1], X[:, 2]
    u = K.fx * x / z + K.cx
    v = K.fy * y / z + K.cy

    R = _quats_to_rots(quats)
    M = R * gmap.scales[idx][:, None, :]  # Σ_world = M Mᵀ
    Mc = np.einsum("ab,nbc->nac", inv.R, M)
    J = np.zeros((idx.size, 2, 3))
    J[:, 0, 0] = K.fx / z
    J[:, 0, 2] = -K.fx * x / (z * z)
    J[:, 1, 1] = K.fy / z
    J[:, 1, 2] = -K.fy * y / (z * z)
    A = np.einsum("nij,njk->nik", J, Mc)
    s11 = np.einsum("nk,nk->n", A[:, 0], A[:, 0])
    s12 = np.einsum("nk,nk->n", A[:, 0], A[:, 1])
    s22 = np.einsum("nk,nk->n", A[:, 1], A[:, 1])
    det = s11 * s22 - s12 * s12

    rx = cfg.cutoff_sigma * np.sqrt(np.maximum(s11, 0.0))
    ry = cfg.cutoff_sigma * np.sqrt(np.maximum(s22, 0.0))
    u0 = np.maximum(np.ceil(u - rx), 0).astype(np.int64)
    u1 = np.minimum(np.floor(u + rx), K.width - 1).astype(np.int64)
    v0 = np.maximum(np.ceil(v - ry), 0).astype(np.int64)
    v1 = np.minimum(np.floor(v + ry), K.height - 1).astype(np.int64)
    ok = (det > 1e-18) & (u0 <= u1) & (v0 <= v1)
    if not ok.any():
        return empty

    ia = (s22 / det)[ok]
    ib = (-s12 / det)[ok]
    ic = (s11 / det)[ok]
    op = gmap.opacity[idx][ok]
    if confidence_weighted:
        op = op * gmap.confidence[idx][ok]
    zk = z[ok]
    uk, vk = u[ok], v[ok]
    rows = idx[ok]

    gi, px, py = _window_contributions(u0[ok], u1[ok], v0[ok], v1[ok])
    dx = px - uk[gi]
    dy = py - vk[gi]
    q = ia[gi] * dx * dx + 2.0 * ib[gi] * dx * dy + ic[gi] * dy * dy
    inside = q <= cfg.cutoff_sigma**2
    gi, px, py, q = gi[inside], px[inside], py[inside], q[inside]

    g_exp = np.exp(-0.5 * q)
    a = np.minimum(op[gi] * g_exp, cfg.alpha_clamp)
    pix = py * K.width + px
    # contributions are generated in global depth order, so a stable
    # sort by pixel preserves per-pixel front-to-back order
    srt = np.argsort(pix, kind="stable")
    pix, gi, a, g_exp = pix[srt], gi[srt], a[srt], g_exp[srt]

    log1m = np.log1p(-a)
    prefix = np.concatenate([[0.0], np.cumsum(log1m)])
    seg_start = np.concatenate([[0], np.flatnonzero(np.diff(pix)) + 1])
    seg_id = np.cumsum(np.concatenate([[0], (np.diff(pix) != 0).astype(np.int64)]))
    T = np.exp(prefix[:-1] - prefix[seg_start][seg_id])
    kept = T >= cfg.min_transmittance

    gk = gi[kept]
    return rows[gk], pix[kept], a[kept], g_exp[kept], op[gk], T[kept], zk[gk]


def rasterize(
    gmap: GaussianMap,
    pose: PoseSE3,
    K: CameraIntrinsics,
    cfg: RenderConfig | None = None,
    subset=None,
    frame: int | None = None,
    confidence_weighted: bool = False,
) -> RenderResult:
    """Render the map from a camera pose (camera-to-world).

    `subset` is None (all), "background" (object_id == 0), or an iterable of
    object ids. `frame` places mover Gaussians via their pose track.
    `confidence_weighted` multiplies each splat's opacity by its confidence.
    """
    cfg = cfg or RenderConfig()
    H, W = K.height, K.width
    npix = H * W
    rows, pix, a, _, _, T, z = _splat_contributions(gmap, pose, K, cfg, subset, frame, confidence_weighted)

    wgt = T * a
    col = gmap.color[rows] if rows.size else np.zeros((0, 3))
    rgb_acc = np.stack(
        [np.bincount(pix, weights=wgt * col[:, c], minlength=npix) for c in range(3)],
        axis=1,
    )
    alpha_acc = np.bincount(pix, weights=wgt, minlength=npix)
    depth_num = np.bincount(pix, weights=wgt * z, minlength=npix)

    alpha_img = np.clip(alpha_acc, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = np.where(alpha_acc > 0.0, depth_num / alpha_acc, np.inf)
    return RenderResult(rgb_acc.reshape(H, W, 3), alpha_img.reshape(H, W), depth.reshape(H, W))


def rasterize_l1_grads(
    gmap: GaussianMap,
    pose: PoseSE3,
    K: CameraIntrinsics,
    target: np.ndarray,
    cfg: RenderConfig | None = None,
    subset=None,
    frame: int | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean-L1 color loss against `target` plus its analytic per-Gaussian gradients.

    Returns (loss, d_color (N,3), d_opacity (N,)). The gradient is exact for the
    truncated forward pass: contributions dropped by the early transmittance
    stop or pinned at the alpha clamp receive zero opacity gradient.
    """
    cfg = cfg or RenderConfig()
    H, W = K.height, K.width
    npix = H * W
    target = np.asarray(target, dtype=np.float64).reshape(npix, 3)
    rows, pix, a, g_exp, o_eff, T, z = _splat_contributions(gmap, pose, K, cfg, subset, frame, False)

    wgt = T * a
    col = gmap.color[rows] if rows.size else np.zeros((0, 3))
    rgb = np.stack(
        [np.bincount(pix, weights=wgt * col[:, c], minlength=npix) for c in range(3)],
        axis=1,
    )
    diff = rgb - target
    loss = float(np.abs(diff).mean())
    dL = np.sign(diff) / diff.size  # dL/dC per pixel-channel

    d_color = np.zeros((len(gmap), 3))
    d_opacity = np.zeros(len(gmap))
    if rows.size == 0:
        return loss, d_color, d_opacity

    dLp = dL[pix]  # (n_contrib, 3)
    np.add.at(d_color, rows, dLp * wgt[:, None])

    # suffix sums S_i = sum_{j>i in pixel} T_j a_j c_j, via segment totals
    contrib = wgt[:, None] * col
    incl = np.cumsum(contrib, axis=0)
    seg_start = np.concatenate([[0], np.flatnonzero(np.diff(pix)) + 1])
    seg_id = np.cumsum(np.concatenate([[0], (np.diff(pix) != 0).astype(np.int64)]))
    seg_end = np.concatenate([seg_start[1:] - 1, [pix.size - 1]])
    suffix = incl[seg_end][seg_id] - incl
    dC_da = T[:, None] * col - suffix / (1.0 - a)[:, None]
    da_do = np.where(o_eff * g_exp < cfg.alpha_clamp, g_exp, 0.0)
    np.add.at(d_opacity, rows, (dLp * dC_da).sum(axis=1) * da_do)
    return loss, d_color, d_opacity


def render_topview_opacity(
    gmap: GaussianMap,
    bounds: tuple[float, float, float, float],
    cell: float,
    subset="background",
    z_range: tuple[float, float] | None = None,
    frame: int | None = None,
    include_dreamed: bool = True,
    cfg: RenderConfig | None = None,
    binning: str = "marginal",
    alpha_scale: float = 1.0,
) -> Grid2D:
    """Orthographic top-down opacity per cell: 1 − ∏(1 − α_j) over covering splats.

    `z_range` keeps only Gaussians whose center height lies in the slab, which is
    how ceilings are kept from marking floors occupied. Order-independent.
    `binning` picks the footprint: "marginal" spreads each splat by its XY
    covariance; "center" deposits full opacity only in the cell holding the splat
    center, which keeps a whole wall's column of tails from leaking into
    neighboring cells when the projection is thresholded.
    `alpha_scale` discounts every splat's vote; with it below the threshold a
    cell needs several co-located splats before it crosses, which is what
    separates a surface (a column of samples shares one cell) from a stray.
    """
    cfg = cfg or RenderConfig()
    if binning not in ("marginal", "center"):
        raise ValueError(f"unknown binning: {binning!r}")
    grid = Grid2D.from_bounds(bounds, cell)
    idx = gmap.subset_indices(subset)
    if not include_dreamed:
        idx = idx[gmap.provenance[idx] == PROV_OBSERVED]
    if idx.size == 0:
        return grid
    centers, quats = gmap.placed(idx, frame)
    if z_range is not None:
        sel = (centers[:, 2] >= z_range[0]) & (centers[:, 2] <= z_range[1])
        idx, centers, quats = idx[sel], centers[sel], quats[sel]
    if idx.size == 0:
        return grid

    if binning == "center":
        ix, iy = grid.cell_of(centers[:, 0], centers[:, 1])
        ok = grid.in_bounds(ix, iy)
        cells = iy[ok] * grid.nx + ix[ok]
        op = np.minimum(gmap.opacity[idx][ok] * alpha_scale, cfg.alpha_clamp)
        logs = np.bincount(cells, weights=np.log1p(-op), minlength=grid.nx * grid.ny)
        grid.values = (1.0 - np.exp(logs)).reshape(grid.ny, grid.nx)
        return grid

    R = _quats_to_rots(quats)
    M = R * gmap.scales[idx][:, None, :]
    Sig = np.einsum("nij,nkj->nik", M, M)
    s11, s12, s22 = Sig[:, 0, 0], Sig[:, 0, 1], Sig[:, 1, 1]
    det = s11 * s22 - s12 * s12
    ok = det > 1e-20
    idx, centers = idx[ok], centers[ok]
    s11, s12, s22, det = s11[ok], s12[ok], s22[ok], det[ok]
    if idx.size == 0:
        return grid

    # cell-center coordinates of each splat in grid units
    gx = (centers[:, 0] - grid.x0) / cell - 0.5
    gy = (centers[:, 1] - grid.y0) / cell - 0.5
    rx = cfg.cutoff_sigma * np.sqrt(s11) / cell
    ry = cfg.cutoff_sigma * np.sqrt(s22) / cell
    u0 = np.maximum(np.ceil(gx - rx), 0).astype(np.int64)
    u1 = np.minimum(np.floor(gx + rx), grid.nx - 1).astype(np.int64)
    v0 = np.maximum(np.ceil(gy - ry), 0).astype(np.int64)
    v1 = np.minimum(np.floor(gy + ry), grid.ny - 1).astype(np.int64)
    ok = (u0 <= u1) & (v0 <= v1)
    if not ok.any():
        return grid

    ia = (s22 / det)[ok]
    ib = (-s12 / det)[ok]
    ic = (s11 / det)[ok]
    op = gmap.opacity[idx][ok]
    gi, px, py = _window_contributions(u0[ok], u1[ok], v0[ok], v1[ok])
    dx = (px - gx[ok][gi]) * cell
    dy = (py - gy[ok][gi]) * cell
    q = ia[gi] * dx * dx + 2.0 * ib[gi] * dx * dy + ic[gi] * dy * dy
    inside = q <= cfg.cutoff_sigma**2
    a = np.minimum(op[gi][inside] * np.exp(-0.5 * q[inside]), cfg.alpha_clamp)
    cells = py[inside] * grid.nx + px[inside]
    logs = np.bincount(cells, weights=np.log1p(-a), minlength=grid.nx * grid.ny)
    grid.values = (1.0 - np.exp(logs)).reshape(grid.ny, grid.nx)
    return grid


# --- snapshot serialization -------------------------------------------------

SNAPSHOT_FORMAT = "gaussian-map"
SNAPSHOT_VERSION = 1


def save_map(gmap: GaussianMap, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"format": SNAPSHOT_FORMAT, "version": SNAPSHOT_VERSION, "count": len(gmap)}) + "\n")
        for i in range(len(gmap)):
            src = None
            if gmap.source_frame[i] >= 0:
                src = {"frame": int(gmap.source_frame[i]), "u": int(gmap.source_uv[i, 0]), "v": int(gmap.source_uv[i, 1])}
            rec = {
                "center": gmap.centers[i].tolist(),
                "scales": gmap.scales[i].tolist(),
                "rot": gmap.quats[i].tolist(),
                "opacity": float(gmap.opacity[i]),
                "color": gmap.color[i].tolist(),
                "confidence": float(gmap.confidence[i]),
                "object_id": int(gmap.object_id[i]),
                "provenance": _PROV_NAMES[int(gmap.provenance[i])],
                "source": src,
                "last_tracked": int(gmap.last_tracked[i]),
            }
            f.write(json.dumps(rec, sort_keys=True) + "\n")
        for oid in sorted(gmap.tracks):
            entries = gmap.tracks[oid]
            rec = {
                "track": oid,
                "frames": [f for f, _ in entries],
                "poses": [[*p.t.tolist(), *p.q.tolist()] for _, p in entries],
            }
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def load_map(path: str | os.PathLike) -> GaussianMap:
    gmap = GaussianMap()
    with open(path, "r", encoding="utf-8") as f:
        header = json.loads(f.readline())
        if header.get("format") != SNAPSHOT_FORMAT or header.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported map snapshot header: {header}")
        rows = [json.loads(line) for line in f if line.strip()]
    grecs = [r for r in rows if "track" not in r]
    if grecs:
        gmap.append_arrays(
            [r["center"] for r in grecs],
            [r["scales"] for r in grecs],
            [r["rot"] for r in grecs],
            [r["opacity"] for r in grecs],
            [r["color"] for r in grecs],
            [r["confidence"] for r in grecs],
            [r["object_id"] for r in grecs],
            [_PROV_CODES[r["provenance"]] for r in grecs],
            [r["source"]["frame"] if r["source"] else -1 for r in grecs],
            [[r["source"]["u"], r["source"]["v"]] if r["source"] else [-1, -1] for r in grecs],
            [r["last_tracked"] for r in grecs],
        )
    for r in rows:
        if "track" in r:
            for frame, pose in zip(r["frames"], r["poses"]):
                gmap.set_track(int(r["track"]), int(frame), PoseSE3(np.array(pose[3:]), np.array(pose[:3])))
    return gmap
