"""Feasibility tests, desired-viewpoint construction, the five-term transition
cost, and the configurable multi-ray visibility evaluator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import NamedTuple

import numpy as np

from .geometry import Bvh, Vec3
from .scenario import TargetTrajectory

# Ray offsets sampling the target's body: central axis plus four offsets
# approximating a human-sized region (metres, relative to the target point).
RAY_OFFSETS_5 = (
    (0.0, 0.0, 0.0),
    (0.0, 0.0, 0.8),
    (0.0, 0.0, -0.6),
    (0.3, 0.0, 0.0),
    (-0.3, 0.0, 0.0),
)

STRUCTURE_LAYERED_DAG = "layered_dag"
STRUCTURE_PRIORITY_QUEUE = "priority_queue"


def ray_offsets(count: int) -> np.ndarray:
    """The 1-, 3-, or 5-ray offset set (prefixes of the 5-ray default)."""
    if count not in (1, 3, 5):
        raise ValueError(f"ray count must be 1, 3, or 5, got {count}")
    return np.array(RAY_OFFSETS_5[:count], dtype=np.float64)


@dataclass(frozen=True)
class PlannerConfig:
    """Weights, discretization, beam width, ray-set choice, and toggles.

    Defaults are the production values; beam_width may be ``math.inf`` for an
    unpruned layered search.
    """

    w_path: float = 1.0
    w_trk: float = 2.0
    w_vis: float = 18.0
    w_safe: float = 8.0
    w_sm: float = 0.15
    dt: float = 0.5
    dxy: float = 4.0
    dz: float = 4.0
    d_behind: float = 20.0
    z_ref: float = 22.0
    d_influence: float = 5.0
    d_safe: float = 1.5
    d_cam_min: float = 3.0
    d_cam_max: float = 50.0
    v_max: float = 10.0
    v_min_visibility: float = 0.0  # optional hard visibility threshold, disabled by default
    z_min: float = 2.0
    z_max: float = 60.0
    corridor_half_width: float = 45.0
    heading_eps: float = 0.05  # m/s below which the target counts as stationary
    beam_width: float = 2048
    ray_count: int = 5
    use_cache: bool = True
    structure: str = STRUCTURE_LAYERED_DAG
    expansion_cap: int = 5_000_000
    post_smooth: bool = False

    def __post_init__(self):
        for name in ("w_path", "w_trk", "w_vis", "w_safe", "w_sm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not (self.dt > 0 and self.dxy > 0 and self.dz > 0 and self.v_max > 0):
            raise ValueError("dt, dxy, dz, v_max must be positive")
        if not self.d_cam_min < self.d_cam_max:
            raise ValueError("d_cam_min must be below d_cam_max")
        if not 0.0 <= self.v_min_visibility <= 1.0:
            raise ValueError("v_min_visibility must lie in [0, 1]")
        if self.structure not in (STRUCTURE_LAYERED_DAG, STRUCTURE_PRIORITY_QUEUE):
            raise ValueError(f"unknown structure {self.structure!r}")
        if not (self.beam_width == math.inf or (self.beam_width == int(self.beam_width)
                                                and self.beam_width >= 1)):
            raise ValueError("beam_width must be a positive integer or inf")
        if self.ray_count not in (1, 3, 5):
            raise ValueError("ray_count must be 1, 3, or 5")

    def with_overrides(self, overrides: dict) -> "PlannerConfig":
        if not overrides:
            return self
        known = {f.name for f in fields(self)}
        bad = set(overrides) - known
        if bad:
            raise ValueError(f"unknown config overrides: {sorted(bad)}")
        ov = dict(overrides)
        if ov.get("beam_width") in ("inf", None) and "beam_width" in ov:
            ov["beam_width"] = math.inf
        return replace(self, **ov)


class DesiredViewpoint(NamedTuple):
    q: Vec3
    u_hat: Vec3


def target_heading(target: TargetTrajectory, t: int, eps: float = 0.05) -> Vec3:
    """Unit target velocity at layer t, falling back to the most recent moving
    heading, then to world +x for a target that never moves."""
    if not 0 <= t <= target.horizon:
        raise ValueError(f"layer {t} outside horizon {target.horizon}")
    wps = target.waypoints
    dt = target.dt
    for k in range(max(t, 1), 0, -1):
        vx = (wps[k].x - wps[k - 1].x) / dt
        vy = (wps[k].y - wps[k - 1].y) / dt
        vz = (wps[k].z - wps[k - 1].z) / dt
        mag = math.sqrt(vx * vx + vy * vy + vz * vz)
        if mag >= eps:
            return Vec3(vx / mag, vy / mag, vz / mag)
    return Vec3(1.0, 0.0, 0.0)


def desired_viewpoint(p_t: Vec3, heading: Vec3, cfg: PlannerConfig) -> Vec3:
    """The ideal tracker pose: d_behind metres behind the heading, at the
    reference altitude."""
    return Vec3(p_t.x - cfg.d_behind * heading.x,
                p_t.y - cfg.d_behind * heading.y,
                p_t.z - cfg.d_behind * heading.z + (cfg.z_ref - p_t.z))


def desired_viewpoints(target: TargetTrajectory, cfg: PlannerConfig) -> np.ndarray:
    """q_t for every layer, as a (T+1, 3) array."""
    out = np.empty((target.horizon + 1, 3), dtype=np.float64)
    for t in range(target.horizon + 1):
        h = target_heading(target, t, cfg.heading_eps)
        q = desired_viewpoint(target.waypoints[t], h, cfg)
        out[t] = (q.x, q.y, q.z)
    return out


def is_feasible_state(s: Vec3, p_t: Vec3, bvh: Bvh, cfg: PlannerConfig) -> bool:
    """Altitude bounds, camera range, and safety clearance (on the inflated index)."""
    if not cfg.z_min <= s.z <= cfg.z_max:
        return False
    dx, dy, dz = s.x - p_t.x, s.y - p_t.y, s.z - p_t.z
    r = math.sqrt(dx * dx + dy * dy + dz * dz)
    if not cfg.d_cam_min <= r <= cfg.d_cam_max:
        return False
    return bvh.distance(s) >= cfg.d_safe


def is_admissible_edge(a: Vec3, b: Vec3, cfg: PlannerConfig) -> bool:
    """Step-length bound only; endpoint collision is checked by the state test."""
    return (b - a).norm() <= cfg.v_max * cfg.dt


def visibility(s: Vec3, p_t: Vec3, bvh: Bvh, rays: np.ndarray) -> float:
    """Fraction of unobstructed sight rays from s to the target sample points."""
    clear = 0
    for ox, oy, oz in rays:
        if not bvh.segment_occluded(s, Vec3(p_t.x + ox, p_t.y + oy, p_t.z + oz)):
            clear += 1
    return clear / len(rays)


class CostBreakdown(NamedTuple):
    total: float
    path: float
    track: float
    vis: float
    safe: float
    smooth: float


def transition_cost(a: Vec3, b: Vec3, p_t: Vec3, q_t: Vec3, v_b: float,
                    d_b: float, cfg: PlannerConfig) -> CostBreakdown:
    """Five-term transition cost from a to b at target waypoint p_t.

    Terms: step length, deviation from the desired viewpoint q_t, occlusion
    penalty, quadratic obstacle-proximity penalty active below the influence
    distance, and vertical smoothness.  v_b and d_b are the candidate state's
    visibility and obstacle clearance.
    """
    if d_b < 0:
        raise ValueError("obstacle distance must be non-negative")
    if not 0.0 <= v_b <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    sx, sy, sz = b.x - a.x, b.y - a.y, b.z - a.z
    path = cfg.w_path * math.sqrt(sx * sx + sy * sy + sz * sz)
    tx, ty, tz = b.x - q_t.x, b.y - q_t.y, b.z - q_t.z
    track = cfg.w_trk * (math.sqrt(tx * tx + ty * ty + tz * tz) / max(cfg.d_behind, 1.0))
    vis = cfg.w_vis * (1.0 - v_b)
    prox = max(0.0, cfg.d_influence - d_b) / cfg.d_influence
    safe = cfg.w_safe * (prox * prox)
    smooth = cfg.w_sm * abs(b.z - a.z)
    return CostBreakdown(path + track + vis + safe + smooth, path, track, vis, safe, smooth)
