"""Shared knobs for free-space extraction and exploration planning."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class PlannerConfig:
    # occupancy grid
    cell: float = 0.05
    tau_opacity: float = 0.5
    floor_slab: tuple = (-0.3, 0.1)
    obstacle_slab: tuple = (0.1, 1.6)
    floor_fill: float = 0.1
    pad: float = 0.5

    # topology
    d_wp: float = 1.0
    min_clearance: float = 0.2

    # sub-regions and touring
    r_sub: float = 4.0
    exact_tsp_cap: int = 12

    # view scoring and dreaming
    tau_low: float = 0.2
    tau_high: float = 0.5
    camera_height: float = 1.2
    dream_view_cap: int = 8

    # local waypoint choice
    r_under: float = 1.5
    done_threshold: float = 0.02
    eps_distance: float = 0.5

    robot_radius: float = 0.2

    def __post_init__(self):
        if not (0.0 < self.tau_opacity < 1.0):
            raise ValueError("tau_opacity must be in (0, 1)")
        if not (0.0 <= self.tau_low <= self.tau_high <= 1.0):
            raise ValueError("view thresholds must satisfy 0 <= tau_low <= tau_high <= 1")
        if self.cell <= 0:
            raise ValueError("cell size must be positive")
        if self.d_wp <= 0 or self.r_sub <= 0 or self.r_under <= 0:
            raise ValueError("planner radii must be positive")
