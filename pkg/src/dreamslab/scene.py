"""Ground-truth simulated world: schema, scripted movers, ray-cast rendering.

The world is a set of axis-aligned static primitives plus rigid movers that follow
keyframed planar trajectories (position + yaw). Rendering is per-pixel ray casting:
exact, deterministic, and the sole source of ground truth for sensing oracles,
dream oracles, and metrics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import PoseSE3, quat_from_yaw

# light travel direction (mostly downward) and ambient floor; fixed so statics
# render identically at every time
LIGHT_DIR = np.array([0.25, 0.15, -1.0]) / np.linalg.norm([0.25, 0.15, -1.0])
AMBIENT = 0.3


class SchemaError(ValueError):
    """World JSON is malformed: missing key or wrong type."""


class ValidationError(ValueError):
    """World JSON parsed but violates a spec invariant."""


@dataclass
class CameraIntrinsics:
    width: int = 96
    height: int = 96
    fx: float = 48.0
    fy: float = 48.0
    cx: float = 47.5
    cy: float = 47.5

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError("camera: fx and fy must be positive")
        if not (0 <= self.cx < self.width):
            raise ValidationError("camera: cx out of image")

    @staticmethod
    def with_fov90(width: int, height: int) -> "CameraIntrinsics":
        # 90 degree horizontal FOV: tan(45) = (width/2)/fx
        return CameraIntrinsics(
            width=width,
            height=height,
            fx=width / 2.0,
            fy=height / 2.0,
            cx=(width - 1) / 2.0,
            cy=(height - 1) / 2.0,
        )


@dataclass
class Checker:
    cell: float
    a: np.ndarray
    b: np.ndarray


@dataclass
class Primitive:
    kind: str  # "box" | "sphere"
    pos: np.ndarray  # box center / sphere center (local frame for mover primitives)
    size: np.ndarray  # box full side lengths (3,) ; sphere radius stored as size[0]
    albedo: np.ndarray
    checker: Checker | None = None

    @property
    def radius(self) -> float:
        return float(self.size[0])


@dataclass
class Mover:
    object_id: int
    primitive: Primitive
    keys: list[tuple[float, float, float, float]]  # (t, x, y, yaw)
    loop: bool


@dataclass
class WorldSpec:
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    floor: float
    ceiling: float
    seed: int
    statics: list[Primitive]
    movers: list[Mover]


@dataclass
class WorldState:
    spec: WorldSpec
    time: float
    mover_poses: dict[int, PoseSE3] = field(default_factory=dict)


@dataclass
class GtFrame:
    rgb: np.ndarray  # (H, W, 3) in [0, 1]
    depth: np.ndarray  # (H, W) camera-frame z in meters, inf where no hit
    fg_mask: np.ndarray  # (H, W) uint32 object_id, 0 = background
    pose: PoseSE3


def _need(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(f"{path}: missing key '{key}'")
    return obj[key]


def _vec(value, n: int, path: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise SchemaError(f"{path}: expected a list of {n} numbers")
    try:
        return np.array([float(v) for v in value])
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: expected numbers") from exc


def _parse_checker(value, path: str) -> Checker | None:
    if value is None:
        return None
    if not isinstance(value, dict):
        raise SchemaError(f"{path}: checker must be an object or null")
    cell = float(_need(value, "cell", path))
    if cell <= 0:
        raise ValidationError(f"{path}.cell: must be positive")
    return Checker(cell, _vec(_need(value, "a", path), 3, f"{path}.a"), _vec(_need(value, "b", path), 3, f"{path}.b"))


def _parse_primitive(obj: dict, path: str) -> Primitive:
    kind = _need(obj, "kind", path)
    if kind not in ("box", "sphere"):
        raise SchemaError(f"{path}.kind: expected 'box' or 'sphere', got {kind!r}")
    pos = _vec(_need(obj, "pos", path), 3, f"{path}.pos")
    raw_size = _need(obj, "size", path)
    if kind == "box":
        size = _vec(raw_size, 3, f"{path}.size")
        if np.any(size <= 0):
            raise ValidationError(f"{path}.size: box sides must be positive")
    else:
        try:
            r = float(raw_size)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path}.size: sphere expects a scalar radius") from exc
        if r <= 0:
            raise ValidationError(f"{path}.size: radius must be positive")
        size = np.array([r, r, r])
    albedo = _vec(_need(obj, "albedo", path), 3, f"{path}.albedo")
    checker = _parse_checker(obj.get("checker"), f"{path}.checker")
    return Primitive(kind, pos, size, albedo, checker)


def world_spec_from_dict(doc: dict) -> WorldSpec:
    if not isinstance(doc, dict):
        raise SchemaError("root: expected a JSON object")
    bounds = _vec(_need(doc, "bounds", "root"), 4, "bounds")
    if not (bounds[0] < bounds[2] and bounds[1] < bounds[3]):
        raise ValidationError("bounds: min must be < max on both axes")
    floor = float(_need(doc, "floor", "root"))
    ceiling = float(_need(doc, "ceiling", "root"))
    if ceiling <= floor:
        raise ValidationError("ceiling: must be above floor")
    seed = int(_need(doc, "seed", "root"))

    statics = []
    for i, s in enumerate(_need(doc, "statics", "root")):
        path = f"statics[{i}]"
        prim = _parse_primitive(s, path)
        if prim.kind == "box":
            half = prim.size[:2] / 2.0
            lo, hi = prim.pos[:2] - half, prim.pos[:2] + half
        else:
            lo, hi = prim.pos[:2] - prim.radius, prim.pos[:2] + prim.radius
        eps = 1e-9
        if lo[0] < bounds[0] - eps or lo[1] < bounds[1] - eps or hi[0] > bounds[2] + eps or hi[1] > bounds[3] + eps:
            raise ValidationError(f"{path}: extends outside bounds")
        statics.append(prim)

    movers = []
    seen_ids: set[int] = set()
    for i, m in enumerate(_need(doc, "movers", "root")):
        path = f"movers[{i}]"
        object_id = int(_need(m, "object_id", path))
        if object_id <= 0:
            raise ValidationError(f"{path}.object_id: must be >= 1 (0 is background)")
        if object_id in seen_ids:
            raise ValidationError(f"{path}.object_id: duplicate id {object_id}")
        seen_ids.add(object_id)
        prim = _parse_primitive(m, path)
        raw_keys = _need(m, "keys", path)
        if not raw_keys:
            raise ValidationError(f"{path}.keys: at least one keyframe required")
        keys = []
        prev_t = -math.inf
        for j, k in enumerate(raw_keys):
            kp = f"{path}.keys[{j}]"
            t = float(_need(k, "t", kp))
            if t <= prev_t:
                raise ValidationError(f"{kp}.t: keyframe times must be strictly increasing")
            prev_t = t
            p = _vec(_need(k, "pos", kp), 2, f"{kp}.pos")
            keys.append((t, float(p[0]), float(p[1]), float(_need(k, "yaw", kp))))
        loop = bool(_need(m, "loop", path))
        movers.append(Mover(object_id, prim, keys, loop))

    return WorldSpec((float(bounds[0]), float(bounds[1]), float(bounds[2]), float(bounds[3])), floor, ceiling, seed, statics, movers)


def load_world(spec_text: str) -> WorldSpec:
    try:
        doc = json.loads(spec_text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"root: not valid JSON ({exc})") from exc
    return world_spec_from_dict(doc)


def _checker_to_dict(c: Checker | None):
    if c is None:
        return None
    return {"cell": c.cell, "a": list(c.a), "b": list(c.b)}


def _primitive_to_dict(p: Primitive) -> dict:
    d = {
        "kind": p.kind,
        "pos": list(p.pos),
        "size": list(p.size) if p.kind == "box" else p.radius,
        "albedo": list(p.albedo),
    }
    if p.checker is not None:
        d["checker"] = _checker_to_dict(p.checker)
    return d


def world_spec_to_dict(spec: WorldSpec) -> dict:
    return {
        "bounds": list(spec.bounds),
        "floor": spec.floor,
        "ceiling": spec.ceiling,
        "seed": spec.seed,
        "statics": [_primitive_to_dict(p) for p in spec.statics],
        "movers": [
            {
                "object_id": m.object_id,
                **_primitive_to_dict(m.primitive),
                "keys": [{"t": t, "pos": [x, y], "yaw": yaw} for (t, x, y, yaw) in m.keys],
                "loop": m.loop,
            }
            for m in spec.movers
        ],
    }


def dump_world(spec: WorldSpec) -> str:
    return json.dumps(world_spec_to_dict(spec), sort_keys=True, indent=1)


def mover_pose_at(mover: Mover, time: float) -> PoseSE3:
    keys = mover.keys
    t = time
    if mover.loop and len(keys) > 1:
        period = keys[-1][0]
        if period > 0:
            t = t % period
    if t <= keys[0][0]:
        _, x, y, yaw = keys[0]
    elif t >= keys[-1][0]:
        _, x, y, yaw = keys[-1]
    else:
        hi = 1
        while keys[hi][0] < t:
            hi += 1
        t0, x0, y0, y_0 = keys[hi - 1]
        t1, x1, y1, y_1 = keys[hi]
        s = (t - t0) / (t1 - t0)
        x = x0 + s * (x1 - x0)
        y = y0 + s * (y1 - y0)
        yaw = y_0 + s * (y_1 - y_0)
    return PoseSE3(quat_from_yaw(yaw), np.array([x, y, 0.0]))


def world_at(spec: WorldSpec, time: float) -> WorldState:
    if time < 0:
        raise ValidationError("time must be >= 0")
    poses = {m.object_id: mover_pose_at(m, time) for m in spec.movers}
    return WorldState(spec, time, poses)


# --- ray casting ---------------------------------------------------------


def pixel_rays(pose: PoseSE3, K: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """World-frame ray origins and directions for every pixel, row-major.

    Directions are scaled so the camera-frame z component is 1; the ray parameter
    t at a hit therefore equals the camera z-depth directly.
    """
    u = np.arange(K.width, dtype=np.float64)
    v = np.arange(K.height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    d_cam = np.stack([(uu - K.cx) / K.fx, (vv - K.cy) / K.fy, np.ones_like(uu)], axis=-1)
    d_world = d_cam.reshape(-1, 3) @ pose.R.T
    o_world = np.broadcast_to(pose.t, d_world.shape)
    return o_world, d_world


def _ray_box(o: np.ndarray, d: np.ndarray, center: np.ndarray, half: np.ndarray):
    """Slab-method ray/AABB entry distance; returns (t, hit_mask, axis, side)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (center - half - o) * inv
        t2 = (center + half - o) * inv
    tlo = np.minimum(t1, t2)
    thi = np.maximum(t1, t2)
    # parallel rays: slab test passes only if origin is inside that slab
    par = d == 0.0
    inside = np.abs(o - center) <= half
    tlo = np.where(par, np.where(inside, -np.inf, np.inf), tlo)
    thi = np.where(par, np.where(inside, np.inf, -np.inf), thi)
    tnear = tlo.max(axis=1)
    tfar = thi.min(axis=1)
    hit = (tnear <= tfar) & (tfar > 1e-9) & (tnear > 1e-9)
    axis = tlo.argmax(axis=1)
    side = np.where(np.take_along_axis(t1, axis[:, None], axis=1)[:, 0] == tnear, -1.0, 1.0)
    return tnear, hit, axis, side


def _ray_sphere(o: np.ndarray, d: np.ndarray, center: np.ndarray, r: float):
    oc = o - center
    a = np.einsum("ij,ij->i", d, d)
    b = np.einsum("ij,ij->i", oc, d)
    c = np.einsum("ij,ij->i", oc, oc) - r * r
    disc = b * b - a * c
    hit = disc >= 0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    t = (-b - sq) / a
    # origin inside the sphere: take the exit point
    t_exit = (-b + sq) / a
    t = np.where(t > 1e-9, t, t_exit)
    hit &= t > 1e-9
    return t, hit


def _surface_color(prim: Primitive, local_pts: np.ndarray, normals_local: np.ndarray) -> np.ndarray:
    albedo = np.broadcast_to(prim.albedo, local_pts.shape).copy()
    if prim.checker is not None:
        # nudge into the solid so points exactly on a cell boundary are stable
        probe = (local_pts - prim.pos) - 1e-7 * normals_local
        parity = np.floor(probe / prim.checker.cell).sum(axis=1).astype(np.int64) & 1
        albedo = np.where(parity[:, None] == 0, prim.checker.a, prim.checker.b)
    return albedo


def _shade(albedo: np.ndarray, normals_world: np.ndarray) -> np.ndarray:
    lam = np.maximum(0.0, -(normals_world @ LIGHT_DIR))
    return np.clip(albedo * (AMBIENT + (1.0 - AMBIENT) * lam)[:, None], 0.0, 1.0)


def render_gt(state: WorldState, pose: PoseSE3, K: CameraIntrinsics) -> GtFrame:
    o, d = pixel_rays(pose, K)
    n = o.shape[0]
    best_t = np.full(n, np.inf)
    best_prim = np.full(n, -1, dtype=np.int64)

    instances: list[tuple[Primitive, PoseSE3 | None, int]] = [(p, None, 0) for p in state.spec.statics]
    for m in state.spec.movers:
        instances.append((m.primitive, state.mover_poses[m.object_id], m.object_id))

    locals_cache: list[tuple[np.ndarray, np.ndarray]] = []
    for idx, (prim, place, _oid) in enumerate(instances):
        if place is None:
            ol, dl = o, d
        else:
            inv = place.inverse()
            ol, dl = inv.apply(o), inv.rotate(d)
        locals_cache.append((ol, dl))
        if prim.kind == "box":
            t, hit, _, _ = _ray_box(ol, dl, prim.pos, prim.size / 2.0)
        else:
            t, hit = _ray_sphere(ol, dl, prim.pos, prim.radius)
        closer = hit & (t < best_t)
        best_t = np.where(closer, t, best_t)
        best_prim = np.where(closer, idx, best_prim)

    rgb = np.zeros((n, 3))
    mask = np.zeros(n, dtype=np.uint32)
    for idx, (prim, place, oid) in enumerate(instances):
        sel = best_prim == idx
        if not sel.any():
            continue
        ol, dl = locals_cache[idx]
        pts_local = ol[sel] + best_t[sel, None] * dl[sel]
        if prim.kind == "box":
            rel = (pts_local - prim.pos) / (prim.size / 2.0)
            axis = np.abs(rel).argmax(axis=1)
            nl = np.zeros_like(pts_local)
            nl[np.arange(len(nl)), axis] = np.sign(rel[np.arange(len(rel)), axis])
        else:
            nl = pts_local - prim.pos
            nl /= np.linalg.norm(nl, axis=1, keepdims=True)
        albedo = _surface_color(prim, pts_local, nl)
        nw = nl if place is None else place.rotate(nl)
        rgb[sel] = _shade(albedo, nw)
        if oid != 0:
            mask[sel] = oid

    depth = best_t.copy()
    depth[best_prim < 0] = np.inf
    shape = (K.height, K.width)
    return GtFrame(rgb.reshape(*shape, 3), depth.reshape(shape), mask.reshape(shape), pose)


def back_project(depth: np.ndarray, K: CameraIntrinsics, pose: PoseSE3 | None = None) -> np.ndarray:
    """Pixel depths -> 3D points, camera frame (or world frame when pose given).

    Returns (H, W, 3); pixels with non-finite depth come back non-finite.
    """
    u = np.arange(K.width, dtype=np.float64)
    v = np.arange(K.height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    pts = np.stack([(uu - K.cx) / K.fx * depth, (vv - K.cy) / K.fy * depth, depth], axis=-1)
    if pose is not None:
        pts = pose.apply(pts.reshape(-1, 3)).reshape(pts.shape)
    return pts
