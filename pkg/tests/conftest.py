"""Shared world-building helpers for the test suites."""

from __future__ import annotations

import json

import numpy as np
import pytest

from dreamslab.scene import load_world


def box(pos, size, albedo=(0.6, 0.6, 0.6), checker_cell=0.25, plain=False):
    d = {"kind": "box", "pos": list(pos), "size": list(size), "albedo": list(albedo)}
    if not plain:
        d["checker"] = {"cell": checker_cell, "a": [0.25, 0.25, 0.3], "b": [0.75, 0.7, 0.65]}
    return d


def sphere(pos, r, albedo=(0.8, 0.3, 0.3), plain=True):
    d = {"kind": "sphere", "pos": list(pos), "size": r, "albedo": list(albedo)}
    if not plain:
        d["checker"] = {"cell": 0.25, "a": [0.2, 0.2, 0.2], "b": [0.8, 0.8, 0.8]}
    return d


def room_doc(size_x=4.0, size_y=4.0, wall=0.1, ceiling=2.5, statics_extra=None, movers=None, seed=7):
    """One rectangular room centered at the origin: floor slab + four walls + ceiling."""
    hx, hy = size_x / 2.0, size_y / 2.0
    doc = {
        "bounds": [-hx, -hy, hx, hy],
        "floor": 0.0,
        "ceiling": ceiling,
        "seed": seed,
        "statics": [
            box([0, 0, -0.05], [size_x, size_y, 0.1], albedo=(0.55, 0.55, 0.5)),
            box([0, 0, ceiling + 0.05], [size_x, size_y, 0.1], albedo=(0.9, 0.9, 0.9), plain=True),
            box([0, hy - wall / 2, ceiling / 2], [size_x, wall, ceiling]),
            box([0, -hy + wall / 2, ceiling / 2], [size_x, wall, ceiling]),
            box([hx - wall / 2, 0, ceiling / 2], [wall, size_y - 2 * wall, ceiling]),
            box([-hx + wall / 2, 0, ceiling / 2], [wall, size_y - 2 * wall, ceiling]),
        ]
        + (statics_extra or []),
        "movers": movers or [],
    }
    return doc


def mover_doc(keys, object_id=1, size=(0.4, 0.4, 0.8)):
    """A plain box mover; keys are (t, x, y, yaw) waypoints."""
    d = box([0.0, 0.0, size[2] / 2.0], list(size), albedo=(0.8, 0.3, 0.2), plain=True)
    d["object_id"] = object_id
    d["keys"] = [{"t": t, "pos": [x, y], "yaw": yaw} for t, x, y, yaw in keys]
    d["loop"] = False
    return d


@pytest.fixture
def room_spec():
    return load_world(json.dumps(room_doc()))


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def integrate_views(spec, views, width=64, sensor=None, t=0.0):
    """Grow a map from noise-free static views taken at ground-truth poses.

    views is an iterable of (x, y, yaw); each becomes one integrated frame.
    """
    from dreamslab.geometry import camera_pose
    from dreamslab.mapper import FrameOracle, SensorModel, integrate_frame, predict_frame_gaussians
    from dreamslab.scene import CameraIntrinsics, render_gt, world_at
    from dreamslab.splat import GaussianMap

    K = CameraIntrinsics.with_fov90(width, width)
    sensor = sensor or SensorModel(sigma_depth=0.0, p_invalid=0.0, stride=1)
    gmap = GaussianMap()
    for frame, (x, y, yaw) in enumerate(views):
        pose = camera_pose(x, y, 1.2, yaw)
        gt = render_gt(world_at(spec, t), pose, K)
        orc = FrameOracle(spec, t, t, pose, pose, gt_t=gt, gt_next=gt)
        pred = predict_frame_gaussians(gt.rgb, gt.rgb, orc, K, sensor, frame)
        integrate_frame(gmap, pred, pose, frame, K)
    return gmap, K


def ring_views(positions=((-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0))):
    """Four full turns of views; staggered yaws so view seams never align."""
    return [
        (x, y, 0.4 * k + j * np.pi / 2)
        for k, (x, y) in enumerate(positions)
        for j in range(4)
    ]
