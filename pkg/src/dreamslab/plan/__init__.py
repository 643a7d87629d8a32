"""Exploration planning: free space, waypoint topology, touring, dreaming."""

from .config import PlannerConfig
from .dreaming import DreamStats, dream_structures, dreamed_count, observed_count, retire_dreamed, retire_replaced
from .explore import (
    ExplorationState,
    ExploreConfig,
    StuckDetection,
    init_exploration,
    run_exploration,
    select_local_waypoint,
    step_exploration,
    underexplored_scores,
    reachable_unknown,
)
from .freespace import FREE, OCCUPIED, UNKNOWN, FreeSpaceMap, extract_free_space, map_bounds
from .pathing import NoPath, blocked_mask, path_blocked_at, path_length, plan_path
from .regions import SubRegion, cluster_subregions, mark_dreamed_regions
from .topo import NoFreeSpace, TopoGraph, TopoNode, build_topo_graph
from .tsp import held_karp_open, nn_two_opt, order_subregions_tsp, path_cost
from .views import ViewScores, coverage_fraction, score_waypoint_views, select_views, waypoint_view_poses

__all__ = [
    "PlannerConfig",
    "DreamStats",
    "dream_structures",
    "dreamed_count",
    "observed_count",
    "retire_dreamed",
    "retire_replaced",
    "ExplorationState",
    "ExploreConfig",
    "StuckDetection",
    "init_exploration",
    "run_exploration",
    "select_local_waypoint",
    "step_exploration",
    "underexplored_scores",
    "reachable_unknown",
    "FREE",
    "OCCUPIED",
    "UNKNOWN",
    "FreeSpaceMap",
    "extract_free_space",
    "map_bounds",
    "NoPath",
    "blocked_mask",
    "path_blocked_at",
    "path_length",
    "plan_path",
    "SubRegion",
    "cluster_subregions",
    "mark_dreamed_regions",
    "NoFreeSpace",
    "TopoGraph",
    "TopoNode",
    "build_topo_graph",
    "held_karp_open",
    "nn_two_opt",
    "order_subregions_tsp",
    "path_cost",
    "ViewScores",
    "coverage_fraction",
    "score_waypoint_views",
    "select_views",
    "waypoint_view_poses",
]
