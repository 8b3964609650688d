"""Offline visibility-aware trajectory planning for aerial target tracking.

Two planners over the same time-indexed voxel graph — a beam-pruned layered
relaxation and a priority-queue baseline — plus scenario generation, 5-ray
visibility replay, and a benchmark harness.
"""

from .geometry import Bvh, ObstacleBox, Vec3, build_bvh
from .objective import PlannerConfig
from .scenario import GridSpec, Scenario, TargetTrajectory, VoxelIndex
from .layered import InfeasibleStartError, PlanResult
from .replay import DeltaReport, EvalReport, compare, replay

__all__ = [
    "Bvh", "ObstacleBox", "Vec3", "build_bvh",
    "PlannerConfig",
    "GridSpec", "Scenario", "TargetTrajectory", "VoxelIndex",
    "InfeasibleStartError", "PlanResult",
    "DeltaReport", "EvalReport", "compare", "replay",
]
