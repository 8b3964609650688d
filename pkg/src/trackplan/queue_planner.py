"""Priority-queue planner over the same layered graph.

A best-first search with a zero heuristic (plain Dijkstra) on the
time-indexed voxel graph.  The frontier is a binary heap ordered by
accumulated cost with a deterministic tie-break (deeper layers first, then
voxel index lexicographically); the first state popped at the final layer is
the answer.  Feasibility checks, visibility, and transition costs are the
scalar counterparts of the layered planner's batched ones, so with an
unbounded beam the two structures return identical trajectories and costs.
"""

from __future__ import annotations

import heapq
import math
import time

import numpy as np

from .geometry import Bvh
from .objective import PlannerConfig, desired_viewpoints, ray_offsets
from .scenario import Corridor, Scenario, VoxelIndex
from .layered import (InfeasibleStartError, PlanResult, check_start,
                      grid_from_config, neighbor_offsets)

__all__ = ["plan", "InfeasibleStartError"]


def plan(scenario: Scenario, bvh: Bvh, cfg: PlannerConfig) -> PlanResult:
    """Run the queue-based search on one scenario.

    Returns a full trajectory on success, or a 1-point fallback with
    converged=False when the expansion budget would be exceeded or the final
    layer is unreachable.
    """
    t_start = time.perf_counter()
    grid = grid_from_config(cfg)
    corridor = Corridor(scenario.target, scenario.obstacles, grid,
                        cfg.corridor_half_width, cfg.d_influence)
    v0 = check_start(scenario, bvh, cfg, grid, corridor)
    target = scenario.target.waypoints
    horizon = scenario.target.horizon
    viewpoints = desired_viewpoints(scenario.target, cfg)
    offsets = neighbor_offsets(cfg)
    rays = ray_offsets(cfg.ray_count)
    cap = cfg.expansion_cap

    start_center = grid.center(v0)

    def fallback(expansions: int) -> PlanResult:
        return PlanResult(trajectory=[start_center], converged=False,
                          expansions=expansions,
                          runtime=time.perf_counter() - t_start,
                          total_cost=math.inf)

    # with the cross-time cache on, clearance is computed once per voxel and
    # reused across layers and re-reached edges; without it every candidate
    # edge pays a fresh distance query.  Visibility depends on the target
    # position, so it is always keyed by (voxel, layer).  Corridor admission
    # is a pure per-column predicate, memoized locally to keep the hot loop
    # on plain tuple keys.
    dist_memo: dict[tuple[int, int, int], float] = {}
    vis_memo: dict[tuple[int, int, int, int], float] = {}
    corr_memo: dict[tuple[int, int], bool] = {}
    use_cache = cfg.use_cache

    # hot-loop constants; the loop below inlines the voxel-center arithmetic,
    # the sight-ray fraction, and transition_cost term by term, keeping every
    # expression identical so both planners produce bit-identical totals
    ogx, ogy, ogz = grid.origin.x, grid.origin.y, grid.origin.z
    dxy, dzg = grid.dxy, grid.dz
    z_min, z_max = cfg.z_min, cfg.z_max
    d_cam_min, d_cam_max = cfg.d_cam_min, cfg.d_cam_max
    d_safe, d_infl = cfg.d_safe, cfg.d_influence
    w_path, w_trk, w_vis, w_safe, w_sm = (cfg.w_path, cfg.w_trk, cfg.w_vis,
                                          cfg.w_safe, cfg.w_sm)
    behind = max(cfg.d_behind, 1.0)
    v_min = cfg.v_min_visibility
    n_rays = len(rays)
    ray_list = [(float(o[0]), float(o[1]), float(o[2])) for o in rays]
    sqrt = math.sqrt
    distance_xyz = bvh.distance_xyz
    distance_multi = bvh.distance_multi_xyz
    clear_rays = bvh.clear_ray_count
    in_corridor = corridor.contains
    # neighbor offsets as index arrays: per popped node, all neighbor
    # positions (and, without the cache, all neighbor clearances) come from
    # one vectorized sweep instead of per-edge scalar queries.  The
    # element-wise expressions are the same, so values are unchanged.
    off_ix = np.array([o.ix for o in offsets], dtype=np.int64)
    off_iy = np.array([o.iy for o in offsets], dtype=np.int64)
    off_iz = np.array([o.iz for o in offsets], dtype=np.int64)
    n_off = len(offsets)

    start_key = (v0.ix, v0.iy, v0.iz, 0)
    best_g: dict[tuple[int, int, int, int], float] = {start_key: 0.0}
    came_from: dict[tuple[int, int, int, int], tuple[int, int, int, int]] = {}
    closed: set[tuple[int, int, int, int]] = set()
    heap: list[tuple[float, int, int, int, int]] = [(0.0, -0, v0.ix, v0.iy, v0.iz)]
    expansions = 0
    goal: tuple[int, int, int, int] | None = None
    goal_g = math.inf

    heappop, heappush = heapq.heappop, heapq.heappush
    memo_get = vis_memo.get
    dist_get = dist_memo.get
    corr_get = corr_memo.get
    bg_get = best_g.get

    while heap:
        g, neg_t, ix, iy, iz = heappop(heap)
        t = -neg_t
        key = (ix, iy, iz, t)
        if key in closed:
            continue
        closed.add(key)
        if t == horizon:
            goal, goal_g = key, g
            break
        ax = ogx + ix * dxy
        ay = ogy + iy * dxy
        az = ogz + iz * dzg
        p_t = target[t + 1]
        px, py, pz = p_t.x, p_t.y, p_t.z
        q_t = viewpoints[t + 1]
        qx, qy, qz = float(q_t[0]), float(q_t[1]), float(q_t[2])
        t1 = t + 1
        nix_a = ix + off_ix
        niy_a = iy + off_iy
        niz_a = iz + off_iz
        bx_a = ogx + nix_a * dxy
        by_a = ogy + niy_a * dxy
        bz_a = ogz + niz_a * dzg
        nix_l, niy_l, niz_l = nix_a.tolist(), niy_a.tolist(), niz_a.tolist()
        bxs, bys, bzs = bx_a.tolist(), by_a.tolist(), bz_a.tolist()
        if not use_cache:
            d_all = distance_multi(bx_a, by_a, bz_a).tolist()
        for j in range(n_off):
            bz = bzs[j]
            if not (z_min <= bz <= z_max):
                continue
            nix, niy, niz = nix_l[j], niy_l[j], niz_l[j]
            bx = bxs[j]
            by = bys[j]
            dx, dy, dz = bx - px, by - py, bz - pz
            r = sqrt(dx * dx + dy * dy + dz * dz)
            if r < d_cam_min or r > d_cam_max:
                continue
            kxy = (nix, niy)
            adm = corr_get(kxy)
            if adm is None:
                adm = in_corridor(VoxelIndex(nix, niy, niz))
                corr_memo[kxy] = adm
            if not adm:
                continue
            if use_cache:
                kv = (nix, niy, niz)
                d_b = dist_get(kv)
                if d_b is None:
                    d_b = distance_xyz(bx, by, bz)
                    dist_memo[kv] = d_b
            else:
                d_b = d_all[j]
            if d_b < d_safe:
                continue
            if expansions + 1 > cap:
                return fallback(cap)
            expansions += 1
            nkey = (nix, niy, niz, t1)
            if nkey in closed:
                continue
            v_b = memo_get(nkey)
            if v_b is None:
                ends = [(px + ox, py + oy, pz + oz) for ox, oy, oz in ray_list]
                v_b = clear_rays(bx, by, bz, ends) / n_rays
                vis_memo[nkey] = v_b
            if v_min > 0.0 and v_b < v_min:
                continue
            sx, sy, sz = bx - ax, by - ay, bz - az
            path = w_path * sqrt(sx * sx + sy * sy + sz * sz)
            tx, ty, tz = bx - qx, by - qy, bz - qz
            track = w_trk * (sqrt(tx * tx + ty * ty + tz * tz) / behind)
            vis = w_vis * (1.0 - v_b)
            prox = max(0.0, d_infl - d_b) / d_infl
            safe = w_safe * (prox * prox)
            smooth = w_sm * abs(bz - az)
            ng = g + (path + track + vis + safe + smooth)
            old = best_g.get(nkey)
            if old is None or ng < old:
                best_g[nkey] = ng
                came_from[nkey] = key
                heapq.heappush(heap, (ng, -t1, nix, niy, niz))

    if goal is None:
        return fallback(expansions)

    chain: list[VoxelIndex] = []
    node: tuple[int, int, int, int] | None = goal
    while node is not None:
        chain.append(VoxelIndex(node[0], node[1], node[2]))
        node = came_from.get(node)
    chain.reverse()
    traj = [grid.center(v) for v in chain]
    return PlanResult(trajectory=traj, converged=True, expansions=expansions,
                      runtime=time.perf_counter() - t_start, total_cost=goal_g)
