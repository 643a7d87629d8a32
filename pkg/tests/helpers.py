"""Independent scalar reference implementations shared by unit and acceptance tests.

Everything here is deliberately naive (per-pixel loops, explicit matrices) so it
cannot share bugs with the vectorized production code.
"""

from __future__ import annotations

import math

import numpy as np

from dreamslab.geometry import PoseSE3, quat_to_rot
from dreamslab.scene import CameraIntrinsics
from dreamslab.splat import Gaussian3D, GaussianMap, RenderConfig


def map_from_gaussians(gaussians) -> GaussianMap:
    gmap = GaussianMap()
    for g in gaussians:
        gmap.add(g)
    return gmap


def composite_pixel_reference(
    gaussians,
    pose: PoseSE3,
    K: CameraIntrinsics,
    cfg: RenderConfig,
    px: int,
    py: int,
    confidence_weighted: bool = False,
):
    """Front-to-back compositing of one pixel, evaluated with scalar math."""
    inv = pose.inverse()
    items = []
    for i, g in enumerate(gaussians):
        Xc = inv.R @ g.center + inv.t
        if Xc[2] <= 0.05:
            continue
        u = K.fx * Xc[0] / Xc[2] + K.cx
        v = K.fy * Xc[1] / Xc[2] + K.cy
        Rw = quat_to_rot(g.rotation)
        Sigma = Rw @ np.diag(g.scales**2) @ Rw.T
        Sc = inv.R @ Sigma @ inv.R.T
        J = np.array(
            [
                [K.fx / Xc[2], 0.0, -K.fx * Xc[0] / Xc[2] ** 2],
                [0.0, K.fy / Xc[2], -K.fy * Xc[1] / Xc[2] ** 2],
            ]
        )
        S2 = J @ Sc @ J.T
        d = np.array([px - u, py - v])
        q = float(d @ np.linalg.solve(S2, d))
        if q > cfg.cutoff_sigma**2:
            continue
        o = g.opacity * g.confidence if confidence_weighted else g.opacity
        a = min(o * math.exp(-0.5 * q), cfg.alpha_clamp)
        items.append((Xc[2], i, a, np.asarray(g.color, dtype=np.float64)))
    items.sort(key=lambda it: (it[0], it[1]))
    rgb = np.zeros(3)
    alpha = 0.0
    dep = 0.0
    T = 1.0
    for z, _, a, c in items:
        if T < cfg.min_transmittance:
            break
        rgb += T * a * c
        alpha += T * a
        dep += T * a * z
        T *= 1.0 - a
    depth = dep / alpha if alpha > 0 else math.inf
    return rgb, alpha, depth


def render_reference(gaussians, pose, K, cfg, confidence_weighted=False):
    """Whole-image scalar render. Only usable for small images."""
    H, W = K.height, K.width
    rgb = np.zeros((H, W, 3))
    alpha = np.zeros((H, W))
    depth = np.full((H, W), np.inf)
    for py in range(H):
        for px in range(W):
            r, a, d = composite_pixel_reference(gaussians, pose, K, cfg, px, py, confidence_weighted)
            rgb[py, px] = r
            alpha[py, px] = a
            depth[py, px] = d
    return rgb, alpha, depth


def topview_reference(gaussians, bounds, cell, cfg, z_range=None):
    """Per-cell 1 - prod(1 - a_j) from the world-frame XY marginal of each splat."""
    x0, y0, x1, y1 = bounds
    nx = int(math.ceil((x1 - x0) / cell - 1e-12))
    ny = int(math.ceil((y1 - y0) / cell - 1e-12))
    vals = np.zeros((ny, nx))
    for iy in range(ny):
        for ix in range(nx):
            cx = x0 + (ix + 0.5) * cell
            cy = y0 + (iy + 0.5) * cell
            prod = 1.0
            for g in gaussians:
                if z_range is not None and not (z_range[0] <= g.center[2] <= z_range[1]):
                    continue
                Rw = quat_to_rot(g.rotation)
                Sigma = Rw @ np.diag(g.scales**2) @ Rw.T
                S2 = Sigma[:2, :2]
                d = np.array([cx - g.center[0], cy - g.center[1]])
                q = float(d @ np.linalg.solve(S2, d))
                if q > cfg.cutoff_sigma**2:
                    continue
                prod *= 1.0 - min(g.opacity * math.exp(-0.5 * q), cfg.alpha_clamp)
            vals[iy, ix] = 1.0 - prod
    return vals


def ssim_reference(a: np.ndarray, b: np.ndarray, win: int = 7, c1: float = 1e-4, c2: float = 9e-4) -> float:
    """Naive double-loop sliding-window SSIM with population statistics."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    h = win // 2
    H, W, C = a.shape
    chans = []
    for c in range(C):
        acc = []
        for i in range(h, H - h):
            for j in range(h, W - h):
                pa = a[i - h : i + h + 1, j - h : j + h + 1, c]
                pb = b[i - h : i + h + 1, j - h : j + h + 1, c]
                mua = pa.mean()
                mub = pb.mean()
                va = (pa * pa).mean() - mua * mua
                vb = (pb * pb).mean() - mub * mub
                cov = (pa * pb).mean() - mua * mub
                acc.append(((2 * mua * mub + c1) * (2 * cov + c2)) / ((mua**2 + mub**2 + c1) * (va + vb + c2)))
        chans.append(np.mean(acc))
    return float(np.mean(chans))


def dijkstra_reference(open_mask: np.ndarray, start, goal):
    """Scalar heapq Dijkstra over the 8-neighborhood, in cell units.

    start/goal are (ix, iy). Returns the cost or math.inf. Diagonal steps cost
    sqrt(2) and need only both endpoints open, matching the planner graph.
    """
    import heapq

    H, W = open_mask.shape
    sx, sy = start
    gx, gy = goal
    if not (open_mask[sy, sx] and open_mask[gy, gx]):
        return math.inf
    dist = {(sx, sy): 0.0}
    heap = [(0.0, (sx, sy))]
    while heap:
        d, (x, y) = heapq.heappop(heap)
        if (x, y) == (gx, gy):
            return d
        if d > dist.get((x, y), math.inf):
            continue
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                nx, ny = x + dx, y + dy
                if not (0 <= nx < W and 0 <= ny < H) or not open_mask[ny, nx]:
                    continue
                nd = d + (math.sqrt(2.0) if dx != 0 and dy != 0 else 1.0)
                if nd < dist.get((nx, ny), math.inf) - 1e-12:
                    dist[(nx, ny)] = nd
                    heapq.heappush(heap, (nd, (nx, ny)))
    return math.inf


def underexplored_reference(values, robot_cell, node_cells, r_under_cells):
    """BFS flood from the robot over non-occupied cells, then per-node disc counts.

    values uses the tri-state encoding (-1 unknown, 0 free, 1 occupied).
    Returns one fraction per node: unknown-and-reachable cells in the disc over
    disc cells inside the grid.
    """
    from collections import deque

    H, W = values.shape
    reach = np.zeros((H, W), dtype=bool)
    rx, ry = robot_cell
    if 0 <= rx < W and 0 <= ry < H and values[ry, rx] != 1:
        reach[ry, rx] = True
        q = deque([(rx, ry)])
        while q:
            x, y = q.popleft()
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    nx, ny = x + dx, y + dy
                    if 0 <= nx < W and 0 <= ny < H and not reach[ny, nx] and values[ny, nx] != 1:
                        reach[ny, nx] = True
                        q.append((nx, ny))
    out = []
    r2 = r_under_cells * r_under_cells
    for cx, cy in node_cells:
        total = 0
        hits = 0
        for dx in range(-int(r_under_cells), int(r_under_cells) + 1):
            for dy in range(-int(r_under_cells), int(r_under_cells) + 1):
                if dx * dx + dy * dy > r2:
                    continue
                x, y = cx + dx, cy + dy
                if not (0 <= x < W and 0 <= y < H):
                    continue
                total += 1
                if values[y, x] == -1 and reach[y, x]:
                    hits += 1
        out.append(hits / total if total else 0.0)
    return np.array(out)


def tsp_brute_force(d0: np.ndarray, D: np.ndarray):
    """Exhaustive open-path tour cost by enumerating every permutation."""
    import itertools

    n = len(d0)
    best = math.inf
    best_order = None
    for perm in itertools.permutations(range(n)):
        c = d0[perm[0]]
        for a, b in zip(perm[:-1], perm[1:]):
            c += D[a, b]
        if c < best - 1e-12:
            best = c
            best_order = list(perm)
    return best, best_order


def random_gaussians(rng, n, center_lo=(-1.0, -1.0, 2.0), center_hi=(1.0, 1.0, 6.0)):
    """Random well-conditioned splats in front of an identity camera at the origin."""
    out = []
    lo = np.asarray(center_lo)
    hi = np.asarray(center_hi)
    for _ in range(n):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        ang = rng.uniform(0, np.pi)
        q = np.array([math.cos(ang / 2), *(math.sin(ang / 2) * axis)])
        if q[0] < 0:
            q = -q
        out.append(
            Gaussian3D(
                center=rng.uniform(lo, hi),
                scales=rng.uniform(0.05, 0.4, size=3),
                rotation=q,
                opacity=rng.uniform(0.2, 0.95),
                color=rng.uniform(0, 1, size=3),
                confidence=rng.uniform(0.3, 1.0),
            )
        )
    return out
