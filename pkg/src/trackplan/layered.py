"""Layered-DAG beam search.

The spatio-temporal graph is a DAG indexed by time layer, so the planner runs
a layer-synchronous relaxation: every frontier state expands its pre-filtered
voxel neighborhood, candidates pass the feasibility gate, obstacle distance
comes from a cross-time cache (static world, so the nearest obstacle is
independent of the layer), visibility comes from the configured ray subset,
and each layer is truncated to the top-B states by accumulated cost.

Per-layer work is batched with numpy; results are deterministic, and the
distance cache is a pure memoization (toggling it changes only the runtime).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import Bvh, Vec3
from .objective import PlannerConfig, desired_viewpoints, ray_offsets
from .scenario import Corridor, GridSpec, Scenario, VoxelIndex, snap_to_voxel

_PACK_BIAS = 1 << 20
_PACK_SHIFT = 21


class InfeasibleStartError(ValueError):
    """The snapped start state violates the feasibility constraints at t=0."""


@dataclass
class PlanResult:
    """Planner output: trajectory (length T+1 on success, 1 on fallback) plus
    convergence flag, expansion count, and per-layer diagnostics."""

    trajectory: list[Vec3]
    converged: bool
    expansions: int
    runtime: float
    total_cost: float
    per_layer_frontier_sizes: list[int] = field(default_factory=list)

    @property
    def is_fallback(self) -> bool:
        return not self.converged


def neighbor_offsets(cfg: PlannerConfig) -> list[VoxelIndex]:
    """Voxel-step offsets admissible under the per-step speed bound.

    The 27-cell neighborhood is pre-filtered by step length; moves changing
    all three axes at once are excluded (steps combine at most one vertical
    with one horizontal axis change).  With the default resolution and speed
    this reduces to the six face moves plus the stay action.  Order is fixed
    (lexicographic) so expansion counts are reproducible.
    """
    limit = cfg.v_max * cfg.dt
    out = []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                if dx != 0 and dy != 0 and dz != 0:
                    continue
                step = math.sqrt((dx * cfg.dxy) ** 2 + (dy * cfg.dxy) ** 2
                                 + (dz * cfg.dz) ** 2)
                if step <= limit:
                    out.append(VoxelIndex(dx, dy, dz))
    return out


def grid_from_config(cfg: PlannerConfig) -> GridSpec:
    return GridSpec(origin=Vec3(0.0, 0.0, 0.0), dxy=cfg.dxy, dz=cfg.dz,
                    z_min=cfg.z_min, z_max=cfg.z_max)


class DistanceCache:
    """Cross-time obstacle-distance memo keyed by spatial voxel only.

    Backed by a dense array over the bounding box of the voxels seen so far
    (NaN marks unknown entries), so lookups stay vectorized; the array grows
    geometrically when a batch falls outside the current bounds.
    """

    _PAD = 4  # voxels of slack added around new bounds on (re)allocation

    def __init__(self, bvh: Bvh, grid: GridSpec,
                 bounds: tuple[np.ndarray, np.ndarray] | None = None):
        self._bvh = bvh
        self._grid = grid
        self._arr: np.ndarray | None = None
        self._lo: np.ndarray | None = None
        self._count = 0
        if bounds is not None:
            lo, hi = bounds
            self._lo = np.asarray(lo, dtype=np.int64)
            self._arr = np.full(np.asarray(hi, dtype=np.int64) - self._lo + 1,
                                np.nan)

    def __len__(self) -> int:
        return self._count

    def _ensure_bounds(self, vox: np.ndarray) -> None:
        lo = vox.min(axis=0) - self._PAD
        hi = vox.max(axis=0) + self._PAD
        if self._arr is None:
            self._lo = lo
            self._arr = np.full(hi - lo + 1, np.nan)
            return
        cur_hi = self._lo + np.array(self._arr.shape) - 1
        if (lo >= self._lo).all() and (hi <= cur_hi).all():
            return
        new_lo = np.minimum(lo, self._lo)
        new_hi = np.maximum(hi, cur_hi)
        arr = np.full(new_hi - new_lo + 1, np.nan)
        off = self._lo - new_lo
        sl = tuple(slice(off[i], off[i] + self._arr.shape[i]) for i in range(3))
        arr[sl] = self._arr
        self._arr, self._lo = arr, new_lo

    def lookup_batch(self, vox: np.ndarray, centers: np.ndarray) -> np.ndarray:
        """Distances for an (M, 3) voxel array; missing entries are computed and stored."""
        self._ensure_bounds(vox)
        idx = vox - self._lo
        i, j, k = idx[:, 0], idx[:, 1], idx[:, 2]
        out = self._arr[i, j, k]
        missing = np.isnan(out)
        if missing.any():
            vals = self._bvh.batch_distance(centers[missing])
            out[missing] = vals
            self._arr[i[missing], j[missing], k[missing]] = vals
            self._count += int(missing.sum())
        return out


def _first_occurrence(inverse: np.ndarray, n_unique: int) -> np.ndarray:
    """Row index of the first occurrence of each unique group."""
    first = np.full(n_unique, inverse.shape[0], dtype=np.int64)
    np.minimum.at(first, inverse, np.arange(inverse.shape[0], dtype=np.int64))
    return first


def pack_voxels(vox: np.ndarray) -> np.ndarray:
    """Pack an (M, 3) voxel-index array into sortable int64 keys."""
    k = (vox[:, 0] + _PACK_BIAS).astype(np.int64)
    k = (k << _PACK_SHIFT) | (vox[:, 1] + _PACK_BIAS)
    k = (k << _PACK_SHIFT) | (vox[:, 2] + _PACK_BIAS)
    return k


def check_start(scenario: Scenario, bvh: Bvh, cfg: PlannerConfig,
                grid: GridSpec, corridor: Corridor) -> VoxelIndex:
    """Snap the start and verify feasibility at t=0, or raise."""
    v0 = snap_to_voxel(scenario.start, grid)
    c = grid.center(v0)
    p0 = scenario.target.waypoints[0]
    dx, dy, dz = c.x - p0.x, c.y - p0.y, c.z - p0.z
    r = math.sqrt(dx * dx + dy * dy + dz * dz)
    ok = (cfg.z_min <= c.z <= cfg.z_max
          and cfg.d_cam_min <= r <= cfg.d_cam_max
          and bvh.distance(c) >= cfg.d_safe
          and corridor.contains(v0))
    if not ok:
        raise InfeasibleStartError(
            f"start state {c} infeasible at t=0 for scenario {scenario.id!r}")
    return v0


def _batch_visibility(bvh: Bvh, centers: np.ndarray, p_t: np.ndarray,
                      offsets: np.ndarray) -> np.ndarray:
    """Visibility fraction per state center toward p_t + each ray offset."""
    m, r = centers.shape[0], offsets.shape[0]
    a = np.repeat(centers, r, axis=0)
    b = np.tile(p_t + offsets, (m, 1))
    occ = bvh.batch_segment_occluded(a, b)
    clear = (~occ).reshape(m, r).sum(axis=1)
    return clear / r


def _batch_cost(a: np.ndarray, b: np.ndarray, q_t: np.ndarray, v_b: np.ndarray,
                d_b: np.ndarray, cfg: PlannerConfig) -> np.ndarray:
    """Vectorized transition cost; mirrors objective.transition_cost exactly."""
    sx = b[:, 0] - a[:, 0]
    sy = b[:, 1] - a[:, 1]
    sz = b[:, 2] - a[:, 2]
    path = cfg.w_path * np.sqrt(sx * sx + sy * sy + sz * sz)
    tx = b[:, 0] - q_t[0]
    ty = b[:, 1] - q_t[1]
    tz = b[:, 2] - q_t[2]
    track = cfg.w_trk * (np.sqrt(tx * tx + ty * ty + tz * tz) / max(cfg.d_behind, 1.0))
    vis = cfg.w_vis * (1.0 - v_b)
    prox = np.maximum(0.0, cfg.d_influence - d_b) / cfg.d_influence
    safe = cfg.w_safe * (prox * prox)
    smooth = cfg.w_sm * np.abs(sz)
    return path + track + vis + safe + smooth


def plan(scenario: Scenario, bvh: Bvh, cfg: PlannerConfig) -> PlanResult:
    """Run the layered beam search on one scenario.

    Returns the backtracked minimum-cost trajectory from the last layer, or a
    1-point fallback (converged=False) if a layer empties or the expansion
    budget would be exceeded.
    """
    t_start = time.perf_counter()
    grid = grid_from_config(cfg)
    corridor = Corridor(scenario.target, scenario.obstacles, grid,
                        cfg.corridor_half_width, cfg.d_influence)
    v0 = check_start(scenario, bvh, cfg, grid, corridor)
    target = scenario.target.as_array()
    horizon = scenario.target.horizon
    viewpoints = desired_viewpoints(scenario.target, cfg)
    offsets_list = neighbor_offsets(cfg)
    deltas = np.array(offsets_list, dtype=np.int64)
    rays = ray_offsets(cfg.ray_count)
    cache = None
    if cfg.use_cache:
        # every cached query has already passed the camera-range and
        # altitude gates, so the memo can be sized once up front instead of
        # growing as the frontier drifts
        og = np.array([grid.origin.x, grid.origin.y, grid.origin.z])
        step = np.array([grid.dxy, grid.dxy, grid.dz])
        slack = np.array([cfg.d_cam_max, cfg.d_cam_max, 0.0])
        w_lo = target.min(axis=0) - slack
        w_hi = target.max(axis=0) + slack
        w_lo[2], w_hi[2] = min(w_lo[2], cfg.z_min), max(w_hi[2], cfg.z_max)
        lo = np.floor((w_lo - og) / step).astype(np.int64) - 1
        hi = np.ceil((w_hi - og) / step).astype(np.int64) + 1
        cache = DistanceCache(bvh, grid, bounds=(lo, hi))
    beam = cfg.beam_width
    cap = cfg.expansion_cap

    start_center = grid.center(v0)

    def fallback(expansions: int, sizes: list[int]) -> PlanResult:
        return PlanResult(trajectory=[start_center], converged=False,
                          expansions=expansions, runtime=time.perf_counter() - t_start,
                          total_cost=math.inf, per_layer_frontier_sizes=sizes)

    front_vox = np.array([v0], dtype=np.int64)
    front_g = np.zeros(1, dtype=np.float64)
    layers: list[tuple[np.ndarray, np.ndarray]] = []  # (vox, parent_row) per layer
    sizes: list[int] = []
    expansions = 0

    for t in range(1, horizon + 1):
        k = front_vox.shape[0]
        n_off = deltas.shape[0]
        cand_vox = (front_vox[:, None, :] + deltas[None, :, :]).reshape(-1, 3)
        parent_row = np.repeat(np.arange(k, dtype=np.int64), n_off)
        centers = grid.centers(cand_vox)
        p_t = target[t]

        # feasibility gate: altitude + camera range + corridor + clearance
        mask = (centers[:, 2] >= cfg.z_min) & (centers[:, 2] <= cfg.z_max)
        dxc = centers[:, 0] - p_t[0]
        dyc = centers[:, 1] - p_t[1]
        dzc = centers[:, 2] - p_t[2]
        r = np.sqrt(dxc * dxc + dyc * dyc + dzc * dzc)
        mask &= (r >= cfg.d_cam_min) & (r <= cfg.d_cam_max)
        mask &= corridor.contains_batch(cand_vox)

        rows = np.nonzero(mask)[0]
        if rows.size:
            sub_centers = centers[rows]
            if cache is not None:
                # memoized across layers and shared among all edges into the
                # same voxel: dedupe to unique voxels first so the memo is
                # touched once per voxel, then fan the values back out
                sub_rows_vox = cand_vox[rows]
                dkeys, dinv = np.unique(pack_voxels(sub_rows_vox),
                                        return_inverse=True)
                dfirst = _first_occurrence(dinv, dkeys.shape[0])
                dist = cache.lookup_batch(sub_rows_vox[dfirst],
                                          sub_centers[dfirst])[dinv]
            else:
                # no memoization: every candidate edge pays a fresh query,
                # mirroring the uncached queue planner
                dist = bvh.batch_distance(sub_centers)
            clear = dist >= cfg.d_safe
            rows = rows[clear]
        if rows.size == 0:
            return fallback(expansions, sizes)

        if expansions + rows.size > cap:
            return fallback(cap, sizes)
        expansions += int(rows.size)

        sub_vox = cand_vox[rows]
        sub_centers = centers[rows]
        sub_parent = parent_row[rows]
        sub_dist = dist[clear]
        keys = pack_voxels(sub_vox)
        ukeys, uinv = np.unique(keys, return_inverse=True)
        # visibility per unique voxel (shared across all parents reaching it)
        first = _first_occurrence(uinv, ukeys.shape[0])
        uvis = _batch_visibility(bvh, sub_centers[first], p_t, rays)
        vis = uvis[uinv]

        if cfg.v_min_visibility > 0.0:
            keep = vis >= cfg.v_min_visibility
            if not keep.any():
                return fallback(expansions, sizes)
            sub_vox, sub_centers = sub_vox[keep], sub_centers[keep]
            sub_parent, sub_dist, vis = sub_parent[keep], sub_dist[keep], vis[keep]
            keys = keys[keep]

        g_new = front_g[sub_parent] + _batch_cost(
            grid.centers(front_vox[sub_parent]), sub_centers,
            viewpoints[t], vis, sub_dist, cfg)

        # relax: min g per voxel, ties to the earliest candidate in generation
        # order (frontier is kept in ascending tie-break order)
        sel = np.lexsort((np.arange(len(keys)), g_new, keys))
        kk = keys[sel]
        firsts = np.ones(len(kk), dtype=bool)
        firsts[1:] = kk[1:] != kk[:-1]
        win = sel[firsts]

        new_vox = sub_vox[win]
        new_g = g_new[win]
        new_parent = sub_parent[win]

        # top-B prune with the fixed tie-break (g, then voxel lexicographic)
        order = np.lexsort((new_vox[:, 2], new_vox[:, 1], new_vox[:, 0], new_g))
        if beam != math.inf and order.shape[0] > int(beam):
            order = order[: int(beam)]
        front_vox = new_vox[order]
        front_g = new_g[order]
        layers.append((front_vox, new_parent[order]))
        sizes.append(int(front_vox.shape[0]))

    # backtrack from the tie-break minimum of the last layer
    best = 0
    total_cost = float(front_g[0])
    idx_path = [best]
    row = best
    for t in range(len(layers) - 1, 0, -1):
        row = int(layers[t][1][row])
        idx_path.append(row)
    idx_path.reverse()

    traj = [start_center]
    for t, row in enumerate(idx_path):
        vox = layers[t][0][row]
        traj.append(grid.center(VoxelIndex(int(vox[0]), int(vox[1]), int(vox[2]))))

    if cfg.post_smooth:
        traj = shortcut_smooth(traj, scenario, bvh, cfg, grid, corridor)

    return PlanResult(trajectory=traj, converged=True, expansions=expansions,
                      runtime=time.perf_counter() - t_start, total_cost=total_cost,
                      per_layer_frontier_sizes=sizes)


def shortcut_smooth(traj: list[Vec3], scenario: Scenario, bvh: Bvh,
                    cfg: PlannerConfig, grid: GridSpec,
                    corridor: Corridor) -> list[Vec3]:
    """Optional greedy shortcut pass (off by default).

    Interior states are pulled toward the midpoint of their neighbors when the
    snapped midpoint voxel keeps state feasibility, edge admissibility, and
    strictly shortens the local path.  Replay metrics bypass this pass.
    """
    from .objective import is_admissible_edge, is_feasible_state

    out = list(traj)
    limit = len(out) - 1
    for _ in range(10):
        changed = False
        for t in range(1, limit):
            a, b, c = out[t - 1], out[t], out[t + 1]
            mid = Vec3(0.5 * (a.x + c.x), 0.5 * (a.y + c.y), 0.5 * (a.z + c.z))
            v = snap_to_voxel(mid, grid)
            cand = grid.center(v)
            if (cand.x, cand.y, cand.z) == (b.x, b.y, b.z):
                continue
            p_t = scenario.target.waypoints[t]
            if not (corridor.contains(v)
                    and is_feasible_state(cand, p_t, bvh, cfg)
                    and is_admissible_edge(a, cand, cfg)
                    and is_admissible_edge(cand, c, cfg)):
                continue
            if (cand - a).norm() + (c - cand).norm() < (b - a).norm() + (c - b).norm() - 1e-12:
                out[t] = cand
                changed = True
        if not changed:
            break
    return out
