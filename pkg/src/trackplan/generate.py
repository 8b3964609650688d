"""Seeded synthetic scenario generator.

Eight world profiles stand in for real maps: four generic ones (open,
urban-sparse, urban-dense, canyon), a vegetation-like profile whose solid
canopy slab forces zero visibility everywhere feasible, and three constructed
benchmark profiles (pocket-maze, occlusion-pocket, oracle-small) used by the
harness experiments.  Everything is driven by a SplitMix64 stream so equal
seeds give byte-identical scenario JSON on any platform.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import ObstacleBox, Vec3, build_bvh
from .objective import PlannerConfig
from .scenario import (Corridor, Scenario, TargetTrajectory, VoxelIndex,
                       polyline_distance_xy, snap_to_voxel)
from .layered import grid_from_config

TARGET_SPEED = 1.4
DEFAULT_LENGTH_RANGE = (150.0, 400.0)

PROFILES = (
    "open",
    "urban-sparse",
    "urban-dense",
    "canyon",
    "vegetation-like",
    "pocket-maze",
    "occlusion-pocket",
    "oracle-small",
)

# per-profile PlannerConfig overrides baked into the scenario JSON
_PROFILE_PARAMS: dict[str, dict] = {
    "vegetation-like": {"expansion_cap": 20_000_000},
    # wide corridor/camera envelope plus a heavy visibility weight: under the
    # severe canopy the visibility term is flat, so it cannot steer the
    # search, but it dominates the accumulated cost and keeps the queue
    # planner's exploration slack wide until the final layers
    "pocket-maze": {"d_cam_max": 80.0, "corridor_half_width": 60.0,
                    "w_vis": 100.0},
    "occlusion-pocket": {"corridor_half_width": 30.0},
    "oracle-small": {"d_cam_max": 11.0, "corridor_half_width": 12.0},
}

_GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


class SplitMix64:
    """Tiny splittable 64-bit PRNG (SplitMix64); fixed across platforms."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randrange(self, n: int) -> int:
        return self.next_u64() % n

    def spawn(self) -> "SplitMix64":
        return SplitMix64(self.next_u64())


def _resample_polyline(pts: list[tuple[float, float]], spacing: float,
                       total: float) -> np.ndarray:
    """Sample (x, y) points every `spacing` metres of arclength up to `total`."""
    arr = np.asarray(pts, dtype=np.float64)
    seg = np.sqrt(((arr[1:] - arr[:-1]) ** 2).sum(axis=1))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    n = int(total / spacing)
    s = np.arange(n + 1, dtype=np.float64) * spacing
    x = np.interp(s, cum, arr[:, 0])
    y = np.interp(s, cum, arr[:, 1])
    return np.stack([x, y], axis=1)


def _make_target(rng: SplitMix64, length: float, shape: str,
                 dt: float = 0.5) -> TargetTrajectory:
    """Piecewise-linear ground path resampled at the constant walking speed.

    Shapes: ``straight``, ``wander`` (random heading changes), and
    ``sharp-turn`` (one early hard turn, used to force a long tracker
    approach arc).
    """
    spacing = TARGET_SPEED * dt
    if shape == "straight":
        pts = [(0.0, 0.0), (length + spacing, 0.0)]
    elif shape == "sharp-turn":
        # hard turns near both ends: the tracker must swing a wide arc early
        # and again late, which keeps the optimal cost well above the
        # per-layer floor for the whole horizon
        t1 = rng.uniform(3.5, 5.5)
        t2 = length - rng.uniform(3.0, 4.5)
        th1 = rng.uniform(1.7, 2.2) * (1 if rng.random() < 0.5 else -1)
        # same-sign second turn: the target doubles back, so the tracker has
        # to swing a second wide arc near the end of the horizon
        th2 = th1 * rng.uniform(0.9, 1.1)
        mid = t2 - t1
        p1 = (t1, 0.0)
        p2 = (t1 + mid * math.cos(th1), mid * math.sin(th1))
        h2 = th1 + th2
        reach = length
        p3 = (p2[0] + reach * math.cos(h2), p2[1] + reach * math.sin(h2))
        pts = [(0.0, 0.0), p1, p2, p3]
    else:
        pts = [(0.0, 0.0)]
        heading = 0.0
        walked = 0.0
        while walked < length + spacing:
            seg = rng.uniform(25.0, 60.0)
            x, y = pts[-1]
            pts.append((x + seg * math.cos(heading), y + seg * math.sin(heading)))
            walked += seg
            heading += rng.uniform(-0.9, 0.9)
    xy = _resample_polyline(pts, spacing, length)
    wps = tuple(Vec3(float(px), float(py), 0.0) for px, py in xy)
    return TargetTrajectory(waypoints=wps, dt=dt)


def _ground_box(rng: SplitMix64, x: float, y: float, hx: float, hy: float,
                height: float, label: str) -> ObstacleBox:
    return ObstacleBox(center=Vec3(x, y, height / 2.0),
                       half_extents=Vec3(hx, hy, height / 2.0),
                       yaw=rng.uniform(-math.pi / 2, math.pi / 2),
                       class_label=label)


def _scatter_boxes(rng: SplitMix64, target: TargetTrajectory, n: int,
                   lat_range: tuple[float, float],
                   hx_range: tuple[float, float],
                   height_range: tuple[float, float],
                   label: str, min_path_dist: float = 2.0) -> list[ObstacleBox]:
    """Boxes scattered along the path, rejected until clear of it."""
    path = target.as_array()[:, :2]
    total = TARGET_SPEED * target.dt * target.horizon
    out: list[ObstacleBox] = []
    while len(out) < n:
        s = rng.uniform(-20.0, total + 20.0)
        idx = min(int(s / (TARGET_SPEED * target.dt)), target.horizon - 1)
        idx = max(idx, 0)
        a, b = path[idx], path[idx + 1]
        d = b - a
        nrm = math.hypot(d[0], d[1])
        ux, uy = d[0] / nrm, d[1] / nrm
        lat = rng.uniform(*lat_range) * (1 if rng.random() < 0.5 else -1)
        cx = a[0] + ux * rng.uniform(0, 30.0) - uy * lat
        cy = a[1] + uy * rng.uniform(0, 30.0) + ux * lat
        hx = rng.uniform(*hx_range)
        hy = rng.uniform(*hx_range)
        h = rng.uniform(*height_range)
        box = _ground_box(rng, cx, cy, hx, hy, h, label)
        circum = math.hypot(hx, hy)
        dd = polyline_distance_xy(np.array([[cx, cy]]), path)[0]
        if dd - circum >= min_path_dist:
            out.append(box)
    return out


def _canopy_slab(target: TargetTrajectory, margin: float, z_lo: float,
                 z_hi: float) -> ObstacleBox:
    """Axis-aligned slab covering the whole path footprint plus a margin."""
    arr = target.as_array()
    lo = arr.min(axis=0) - margin
    hi = arr.max(axis=0) + margin
    cx, cy = (lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0
    return ObstacleBox(center=Vec3(cx, cy, (z_lo + z_hi) / 2.0),
                       half_extents=Vec3((hi[0] - lo[0]) / 2.0,
                                         (hi[1] - lo[1]) / 2.0,
                                         (z_hi - z_lo) / 2.0),
                       yaw=0.0, class_label="canopy")


def _canopy_tiles(target: TargetTrajectory, margin: float, z_lo: float,
                  z_hi: float, nx: int, ny: int) -> list[ObstacleBox]:
    """The canopy slab split into an nx-by-ny grid of abutting tiles.

    The tiles partition the slab footprint exactly (shared faces, no gaps),
    so occlusion and clearance match the single slab; the scene just carries
    a realistic box count.
    """
    arr = target.as_array()
    lo = arr.min(axis=0) - margin
    hi = arr.max(axis=0) + margin
    xs = np.linspace(lo[0], hi[0], nx + 1)
    ys = np.linspace(lo[1], hi[1], ny + 1)
    cz, hz = (z_lo + z_hi) / 2.0, (z_hi - z_lo) / 2.0
    tiles = []
    for i in range(nx):
        for j in range(ny):
            tiles.append(ObstacleBox(
                center=Vec3((xs[i] + xs[i + 1]) / 2.0,
                            (ys[j] + ys[j + 1]) / 2.0, cz),
                half_extents=Vec3((xs[i + 1] - xs[i]) / 2.0,
                                  (ys[j + 1] - ys[j]) / 2.0, hz),
                yaw=0.0, class_label="canopy"))
    return tiles


def _obstacles_for(profile: str, rng: SplitMix64, target: TargetTrajectory,
                   severe: bool) -> list[ObstacleBox]:
    """Profile-specific obstacle field."""
    if profile == "open":
        return []

    if profile == "urban-sparse":
        return _scatter_boxes(rng, target, 8, (8.0, 38.0), (2.0, 6.0),
                              (6.0, 19.0), "building")
    if profile == "urban-dense":
        return _scatter_boxes(rng, target, 18, (6.0, 40.0), (2.0, 7.0),
                              (6.0, 19.0), "building")

    if profile == "canyon":
        # two segmented walls flanking the (straight) path
        total = TARGET_SPEED * target.dt * target.horizon
        boxes = []
        x = -10.0
        while x < total + 10.0:
            seg = rng.uniform(18.0, 30.0)
            for side in (-12.0, 12.0):
                boxes.append(ObstacleBox(
                    center=Vec3(x + seg / 2.0, side, 12.0),
                    half_extents=Vec3(seg / 2.0, 1.5, 12.0),
                    yaw=0.0, class_label="wall"))
            x += seg + rng.uniform(4.0, 8.0)
        return boxes

    if profile == "vegetation-like":
        # solid canopy over the whole corridor, plus tall thin trunks below:
        # every feasible state is above the canopy and fully occluded
        boxes = [_canopy_slab(target, 60.0, 3.0, 12.5)]
        boxes += _scatter_boxes(rng, target, 40, (2.0, 45.0), (0.15, 0.4),
                                (10.0, 13.0), "trunk", min_path_dist=1.6)
        return boxes

    if profile == "pocket-maze":
        if severe:
            # canopy plateau: uniform zero visibility starves the queue
            # planner of any cost gradient toward the final layer
            boxes = _canopy_tiles(target, 75.0, 3.0, 12.5, 6, 6)
            boxes += _scatter_boxes(rng, target, 15, (4.0, 40.0), (0.25, 0.6),
                                    (30.0, 42.0), "pillar", min_path_dist=1.6)
        else:
            boxes = _scatter_boxes(rng, target, 24, (8.0, 35.0), (1.5, 4.5),
                                   (6.0, 16.0), "building")
        return boxes

    if profile == "occlusion-pocket":
        # thin strip hovering just above the target: from close-in states the
        # central sight ray clears its edge while the raised head ray does
        # not, so a 1-ray proxy overestimates visibility exactly where the
        # tracking cost is lowest
        half_w = rng.uniform(2.6, 3.4)
        arr = target.as_array()
        lo_x, hi_x = arr[:, 0].min() - 30.0, arr[:, 0].max() + 30.0
        strip = ObstacleBox(center=Vec3((lo_x + hi_x) / 2.0, 0.0, 1.8),
                            half_extents=Vec3((hi_x - lo_x) / 2.0, half_w, 0.2),
                            yaw=0.0, class_label="awning")
        return [strip]

    if profile == "oracle-small":
        return _scatter_boxes(rng, target, 2, (3.0, 7.0), (1.0, 2.5),
                              (4.0, 9.0), "block", min_path_dist=1.6)

    raise ValueError(f"unknown profile {profile!r}")


_STRAIGHT_PROFILES = {"canyon", "pocket-maze", "occlusion-pocket", "oracle-small"}


def _nominal_start(target: TargetTrajectory, z_ref: float,
                   d_behind: float) -> Vec3:
    p0, p1 = target.waypoints[0], target.waypoints[1]
    d = p1 - p0
    n = d.norm()
    ux, uy = (d.x / n, d.y / n) if n > 0 else (1.0, 0.0)
    return Vec3(p0.x - d_behind * ux, p0.y - d_behind * uy, z_ref)


def _feasible_start(scenario_obstacles: list[ObstacleBox],
                    target: TargetTrajectory, cfg: PlannerConfig) -> Vec3:
    """Nominal start, displaced to the nearest feasible voxel center.

    Searches voxel offsets out to a 10-voxel radius ordered by metric
    distance; raises if nothing in that ball is feasible.
    """
    from .objective import is_feasible_state

    grid = grid_from_config(cfg)
    bvh = build_bvh(scenario_obstacles, inflation=cfg.d_safe)
    corridor = Corridor(target, scenario_obstacles, grid,
                        cfg.corridor_half_width, cfg.d_influence)
    nominal = _nominal_start(target, cfg.z_ref, cfg.d_behind)
    v0 = snap_to_voxel(nominal, grid)
    p0 = target.waypoints[0]

    cands = []
    for dx in range(-10, 11):
        for dy in range(-10, 11):
            for dz in range(-10, 11):
                v = VoxelIndex(v0.ix + dx, v0.iy + dy, v0.iz + dz)
                c = grid.center(v)
                d2 = ((c.x - nominal.x) ** 2 + (c.y - nominal.y) ** 2
                      + (c.z - nominal.z) ** 2)
                cands.append((d2, v.ix, v.iy, v.iz))
    cands.sort()
    for _, ix, iy, iz in cands:
        v = VoxelIndex(ix, iy, iz)
        c = grid.center(v)
        if is_feasible_state(c, p0, bvh, cfg) and corridor.contains(v):
            return c
    raise ValueError("no feasible start within 10 voxels of the nominal start")


def generate_scenario(profile: str, cohort_seed: int, index: int,
                      rng: SplitMix64,
                      length_range: tuple[float, float] = DEFAULT_LENGTH_RANGE,
                      param_overrides: dict | None = None) -> Scenario:
    length = rng.uniform(*length_range)
    severe = profile == "pocket-maze" and rng.random() < 0.25
    shape = "straight" if profile in _STRAIGHT_PROFILES else "wander"
    if severe:
        shape = "sharp-turn"
    elif profile == "pocket-maze":
        # mild pocket scenarios are short encounters; the long pursuits are
        # reserved for the severe canopy worlds
        length *= 0.5
    target = _make_target(rng, length, shape)
    obstacles = _obstacles_for(profile, rng, target, severe)
    params = dict(_PROFILE_PARAMS.get(profile, {}))
    if param_overrides:
        params.update(param_overrides)
    cfg = PlannerConfig().with_overrides(params)
    start = _feasible_start(obstacles, target, cfg)
    return Scenario(id=f"{profile}-{cohort_seed:016x}-{index:04d}",
                    seed=cohort_seed, target=target, obstacles=obstacles,
                    start=start, params=params)


def generate_synthetic_cohort(seed: int, n_scenarios: int, profile: str,
                              length_range: tuple[float, float] = DEFAULT_LENGTH_RANGE,
                              param_overrides: dict | None = None) -> list[Scenario]:
    """Deterministic scenario list for one profile.

    Each scenario consumes its own spawned PRNG stream, so prefixes are
    stable: the first k scenarios are identical for any n ≥ k.
    """
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")
    root = SplitMix64(seed)
    out = []
    for i in range(n_scenarios):
        out.append(generate_scenario(profile, seed, i, root.spawn(),
                                     length_range, param_overrides))
    return out
