"""Picking the partially observed views around a waypoint.

Four cardinal yaws are rendered from the map at camera height; the fraction of
pixels the background splats cover grades each view. Views that are mostly
empty have nothing to anchor a guess on, views that are mostly covered have
nothing left to guess, so only the middle band is worth dreaming.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import PoseSE3, camera_pose
from ..scene import CameraIntrinsics
from ..splat import GaussianMap, RenderConfig, rasterize
from .config import PlannerConfig

YAWS = (0.0, np.pi / 2, np.pi, 3 * np.pi / 2)


@dataclass
class ViewScores:
    poses: list[PoseSE3]
    coverage: np.ndarray  # (4,) fraction of covered pixels per yaw
    selected: list[int]  # indices into poses worth dreaming


def coverage_fraction(alpha: np.ndarray, tau_opacity: float) -> float:
    """Fraction of pixels whose accumulated opacity clears the threshold."""
    alpha = np.asarray(alpha)
    return float((alpha > tau_opacity).sum()) / alpha.size


def select_views(coverage, tau_low: float, tau_high: float) -> list[int]:
    """Indices whose coverage sits in the closed dream-worthy band."""
    return [i for i, g in enumerate(coverage) if tau_low <= g <= tau_high]


def waypoint_view_poses(xy, cfg: PlannerConfig | None = None) -> list[PoseSE3]:
    cfg = cfg or PlannerConfig()
    return [camera_pose(float(xy[0]), float(xy[1]), cfg.camera_height, yaw) for yaw in YAWS]


def score_waypoint_views(
    gmap: GaussianMap,
    xy,
    K: CameraIntrinsics,
    cfg: PlannerConfig | None = None,
    frame: int | None = None,
    render_cfg: RenderConfig | None = None,
) -> ViewScores:
    cfg = cfg or PlannerConfig()
    poses = waypoint_view_poses(xy, cfg)
    cov = np.array([
        coverage_fraction(
            rasterize(gmap, pose, K, render_cfg, subset="background", frame=frame).alpha,
            cfg.tau_opacity,
        )
        for pose in poses
    ])
    return ViewScores(poses, cov, select_views(cov, cfg.tau_low, cfg.tau_high))
