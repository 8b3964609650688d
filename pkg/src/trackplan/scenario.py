"""Scenario schema, voxel grid, and search-corridor construction.

A scenario bundles one planning problem: target trajectory, obstacle set,
start state, and optional parameter overrides.  Scenario JSON (stable field
order, UTF-8) is the single interchange format:

    {
      "id": str, "seed": u64, "dt": f64,
      "target": [[x, y, z], ...],
      "start": [x, y, z],
      "obstacles": [{"center": [...], "half_extents": [...], "yaw": f64, "class": str}],
      "params": {optional planner-config overrides}
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .geometry import ObstacleBox, Vec3


class VoxelIndex(NamedTuple):
    """Integer voxel coordinates; tuple ordering doubles as the lexicographic tie-break."""

    ix: int
    iy: int
    iz: int


@dataclass(frozen=True)
class GridSpec:
    """Uniform voxel grid; z clamped to [z_min, z_max] on snapping."""

    origin: Vec3 = Vec3(0.0, 0.0, 0.0)
    dxy: float = 4.0
    dz: float = 4.0
    z_min: float = 2.0
    z_max: float = 60.0

    def __post_init__(self):
        if self.dxy <= 0 or self.dz <= 0:
            raise ValueError("grid resolutions must be positive")
        if self.z_min >= self.z_max:
            raise ValueError("z_min must be below z_max")

    def center(self, v: VoxelIndex) -> Vec3:
        return Vec3(self.origin.x + v.ix * self.dxy,
                    self.origin.y + v.iy * self.dxy,
                    self.origin.z + v.iz * self.dz)

    def centers(self, vox: np.ndarray) -> np.ndarray:
        """Voxel centers for an (M, 3) index array."""
        out = np.empty(vox.shape, dtype=np.float64)
        out[:, 0] = self.origin.x + vox[:, 0] * self.dxy
        out[:, 1] = self.origin.y + vox[:, 1] * self.dxy
        out[:, 2] = self.origin.z + vox[:, 2] * self.dz
        return out


def _round_half_down(v: float) -> int:
    # nearest integer, half-ties toward -inf
    return math.ceil(v - 0.5)


def snap_to_voxel(p: Vec3, grid: GridSpec) -> VoxelIndex:
    """Nearest voxel center; half-way ties break toward -inf on each axis.

    z is clamped into [z_min, z_max] before snapping.
    """
    z = min(max(p.z, grid.z_min), grid.z_max)
    return VoxelIndex(
        _round_half_down((p.x - grid.origin.x) / grid.dxy),
        _round_half_down((p.y - grid.origin.y) / grid.dxy),
        _round_half_down((z - grid.origin.z) / grid.dz),
    )


@dataclass(frozen=True)
class TargetTrajectory:
    """Target waypoints p_0..p_T at uniform time step dt."""

    waypoints: tuple[Vec3, ...]
    dt: float

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ValueError("target trajectory needs at least 2 waypoints")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def horizon(self) -> int:
        return len(self.waypoints) - 1

    def as_array(self) -> np.ndarray:
        return np.array([[w.x, w.y, w.z] for w in self.waypoints], dtype=np.float64)


def _point_segment_dist_xy(px, py, ax, ay, bx, by):
    """Horizontal distance from points (px, py arrays) to segment a-b."""
    vx, vy = bx - ax, by - ay
    cc = vx * vx + vy * vy
    if cc <= 0.0:
        dx, dy = px - ax, py - ay
        return np.sqrt(dx * dx + dy * dy)
    t = np.clip(((px - ax) * vx + (py - ay) * vy) / cc, 0.0, 1.0)
    dx = px - (ax + t * vx)
    dy = py - (ay + t * vy)
    return np.sqrt(dx * dx + dy * dy)


def polyline_distance_xy(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Horizontal distance from (M, 2) points to a polyline given as (K, 2)."""
    px, py = points[:, 0], points[:, 1]
    if poly.shape[0] == 1:
        dx, dy = px - poly[0, 0], py - poly[0, 1]
        return np.sqrt(dx * dx + dy * dy)
    best = np.full(points.shape[0], np.inf)
    for k in range(poly.shape[0] - 1):
        d = _point_segment_dist_xy(px, py, poly[k, 0], poly[k, 1], poly[k + 1, 0], poly[k + 1, 1])
        np.minimum(best, d, out=best)
    return best


def _box_distance_xy(points: np.ndarray, box: ObstacleBox) -> np.ndarray:
    """Horizontal distance from (M, 2) points to the box footprint."""
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    dx = points[:, 0] - box.center.x
    dy = points[:, 1] - box.center.y
    lx = c * dx + s * dy
    ly = c * dy - s * dx
    ex = np.maximum(np.abs(lx) - box.half_extents.x, 0.0)
    ey = np.maximum(np.abs(ly) - box.half_extents.y, 0.0)
    return np.sqrt(ex * ex + ey * ey)


class Corridor:
    """Admissible-voxel predicate: a lateral band around the target path plus
    obstacle buffer zones.

    A voxel is admissible when its z lies in the grid bounds and its center is
    horizontally within ``half_width`` of the target polyline, or within the
    influence distance of an obstacle whose footprint intersects the band.
    Horizontal admission is memoized per (ix, iy) column.
    """

    def __init__(self, target: TargetTrajectory, obstacles: list[ObstacleBox],
                 grid: GridSpec, half_width: float, influence_dist: float = 5.0):
        if half_width <= 0:
            raise ValueError("half_width must be positive")
        self.grid = grid
        self.half_width = float(half_width)
        self.influence_dist = float(influence_dist)
        self._poly = target.as_array()[:, :2]
        # obstacles whose footprint can intersect the band (conservative:
        # center within half_width + footprint circumradius)
        keep = []
        for b in obstacles:
            r = math.hypot(b.half_extents.x, b.half_extents.y)
            d = polyline_distance_xy(np.array([[b.center.x, b.center.y]]), self._poly)[0]
            if d <= half_width + r:
                keep.append(b)
        self._buffer_boxes = keep
        self._xy_memo: dict[tuple[int, int], bool] = {}
        # dense (ix, iy) admission memo for the batch path: -1 unknown, else 0/1
        self._xy_arr: np.ndarray | None = None
        self._xy_lo: np.ndarray | None = None

    def _admit_xy(self, points: np.ndarray) -> np.ndarray:
        ok = polyline_distance_xy(points, self._poly) <= self.half_width
        if self._buffer_boxes:
            pend = ~ok
            if pend.any():
                sub = points[pend]
                near = np.zeros(sub.shape[0], dtype=bool)
                for b in self._buffer_boxes:
                    near |= _box_distance_xy(sub, b) <= self.influence_dist
                ok[pend] = near
        return ok

    def contains(self, v: VoxelIndex) -> bool:
        c = self.grid.center(v)
        if not (self.grid.z_min <= c.z <= self.grid.z_max):
            return False
        key = (v.ix, v.iy)
        hit = self._xy_memo.get(key)
        if hit is None:
            hit = bool(self._admit_xy(np.array([[c.x, c.y]]))[0])
            self._xy_memo[key] = hit
        return hit

    def _ensure_xy_bounds(self, ij: np.ndarray) -> None:
        pad = 4
        lo = ij.min(axis=0) - pad
        hi = ij.max(axis=0) + pad
        if self._xy_arr is None:
            self._xy_lo = lo
            self._xy_arr = np.full(hi - lo + 1, -1, dtype=np.int8)
            return
        cur_hi = self._xy_lo + np.array(self._xy_arr.shape) - 1
        if (lo >= self._xy_lo).all() and (hi <= cur_hi).all():
            return
        new_lo = np.minimum(lo, self._xy_lo)
        new_hi = np.maximum(hi, cur_hi)
        arr = np.full(new_hi - new_lo + 1, -1, dtype=np.int8)
        off = self._xy_lo - new_lo
        arr[off[0]:off[0] + self._xy_arr.shape[0],
            off[1]:off[1] + self._xy_arr.shape[1]] = self._xy_arr
        self._xy_arr, self._xy_lo = arr, new_lo

    def contains_batch(self, vox: np.ndarray) -> np.ndarray:
        """Admission flags for an (M, 3) voxel-index array."""
        centers = self.grid.centers(vox)
        ok = (centers[:, 2] >= self.grid.z_min) & (centers[:, 2] <= self.grid.z_max)
        ij = vox[:, :2]
        self._ensure_xy_bounds(ij)
        i = ij[:, 0] - self._xy_lo[0]
        j = ij[:, 1] - self._xy_lo[1]
        vals = self._xy_arr[i, j]
        missing = vals < 0
        if missing.any():
            # dedup the missing columns before the polyline/footprint tests
            mi, mj = i[missing], j[missing]
            packed = mi * np.int64(self._xy_arr.shape[1]) + mj
            upacked, ufirst = np.unique(packed, return_index=True)
            rows = np.nonzero(missing)[0][ufirst]
            flags = self._admit_xy(centers[rows, :2])
            self._xy_arr[mi[ufirst], mj[ufirst]] = flags.astype(np.int8)
            vals = self._xy_arr[i, j]
        return ok & (vals == 1)


def build_corridor(target: TargetTrajectory, obstacles: list[ObstacleBox],
                   grid: GridSpec, half_width: float,
                   influence_dist: float = 5.0) -> Corridor:
    return Corridor(target, obstacles, grid, half_width, influence_dist)


@dataclass
class Scenario:
    """One planning problem plus its tunable-parameter overrides."""

    id: str
    seed: int
    target: TargetTrajectory
    obstacles: list[ObstacleBox]
    start: Vec3
    params: dict = field(default_factory=dict)

    def to_json(self) -> str:
        obj = {
            "id": self.id,
            "seed": self.seed,
            "dt": self.target.dt,
            "target": [[w.x, w.y, w.z] for w in self.target.waypoints],
            "start": [self.start.x, self.start.y, self.start.z],
            "obstacles": [
                {
                    "center": [b.center.x, b.center.y, b.center.z],
                    "half_extents": [b.half_extents.x, b.half_extents.y, b.half_extents.z],
                    "yaw": b.yaw,
                    "class": b.class_label,
                }
                for b in self.obstacles
            ],
            "params": self.params,
        }
        return json.dumps(obj, ensure_ascii=False)

    @staticmethod
    def from_json(text: str) -> "Scenario":
        obj = json.loads(text)
        try:
            target = TargetTrajectory(
                waypoints=tuple(Vec3(*w) for w in obj["target"]), dt=float(obj["dt"]))
            obstacles = [
                ObstacleBox(center=Vec3(*o["center"]),
                            half_extents=Vec3(*o["half_extents"]),
                            yaw=float(o["yaw"]),
                            class_label=o.get("class", ""))
                for o in obj["obstacles"]
            ]
            return Scenario(
                id=str(obj["id"]), seed=int(obj["seed"]), target=target,
                obstacles=obstacles, start=Vec3(*obj["start"]),
                params=dict(obj.get("params", {})),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed scenario JSON: {exc}") from exc
