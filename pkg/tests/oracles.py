"""Independent reference implementations used to check the planners.

Everything here is deliberately written from the problem statement rather
than by calling into the package: plain loops, no spatial index, no beam, no
memoization.  These oracles are slow but obviously correct, which is what the
differential tests need.
"""

from __future__ import annotations

import math

from trackplan.geometry import ObstacleBox, Vec3
from trackplan.objective import PlannerConfig
from trackplan.scenario import Scenario


# -- geometry oracles --------------------------------------------------------

def box_distance(px: float, py: float, pz: float, box: ObstacleBox,
                 inflation: float = 0.0) -> float:
    """Euclidean distance from a point to one inflated oriented box."""
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    dx = px - box.center.x
    dy = py - box.center.y
    dz = pz - box.center.z
    # world -> box frame (rotate by -yaw about z)
    lx = c * dx + s * dy
    ly = c * dy - s * dx
    hx = box.half_extents.x + inflation
    hy = box.half_extents.y + inflation
    hz = box.half_extents.z + inflation
    ex = max(abs(lx) - hx, 0.0)
    ey = max(abs(ly) - hy, 0.0)
    ez = max(abs(dz) - hz, 0.0)
    return math.sqrt(ex * ex + ey * ey + ez * ez)


def brute_distance(p: Vec3, boxes: list[ObstacleBox],
                   inflation: float = 0.0) -> float:
    """Minimum distance over all boxes; inf for an empty world."""
    return min((box_distance(p.x, p.y, p.z, b, inflation) for b in boxes),
               default=math.inf)


def segment_hits_box(a: Vec3, b: Vec3, box: ObstacleBox) -> bool:
    """Closed-interval slab test for one segment against one oriented box."""
    c, s = math.cos(box.yaw), math.sin(box.yaw)

    def to_frame(p: Vec3) -> tuple[float, float, float]:
        dx, dy, dz = p.x - box.center.x, p.y - box.center.y, p.z - box.center.z
        return (c * dx + s * dy, c * dy - s * dx, dz)

    o = to_frame(a)
    e = to_frame(b)
    h = (box.half_extents.x, box.half_extents.y, box.half_extents.z)
    t_lo, t_hi = 0.0, 1.0
    for i in range(3):
        d = e[i] - o[i]
        if abs(d) < 1e-12:
            if abs(o[i]) > h[i]:
                return False
            continue
        t1 = (-h[i] - o[i]) / d
        t2 = (h[i] - o[i]) / d
        if t1 > t2:
            t1, t2 = t2, t1
        t_lo = max(t_lo, t1)
        t_hi = min(t_hi, t2)
        if t_lo > t_hi:
            return False
    return True


def brute_occluded(a: Vec3, b: Vec3, boxes: list[ObstacleBox]) -> bool:
    return any(segment_hits_box(a, b, box) for box in boxes)


# -- planning oracle ---------------------------------------------------------

_RAYS_5 = ((0.0, 0.0, 0.0), (0.0, 0.0, 0.8), (0.0, 0.0, -0.6),
           (0.3, 0.0, 0.0), (-0.3, 0.0, 0.0))


def _oracle_visibility(p: Vec3, target: Vec3, boxes: list[ObstacleBox],
                       n_rays: int) -> float:
    clear = 0
    for ox, oy, oz in _RAYS_5[:n_rays]:
        end = Vec3(target.x + ox, target.y + oy, target.z + oz)
        if not brute_occluded(p, end, boxes):
            clear += 1
    return clear / n_rays


def _oracle_heading(waypoints, t: int, eps: float) -> tuple[float, float]:
    """Unit xy heading at layer t: latest moving step at or before t, else +x."""
    for k in range(min(t, len(waypoints) - 2), -1, -1):
        dx = waypoints[k + 1].x - waypoints[k].x
        dy = waypoints[k + 1].y - waypoints[k].y
        n = math.hypot(dx, dy)
        if n > eps:
            return dx / n, dy / n
    return 1.0, 0.0


def _point_polyline_dist_xy(px: float, py: float, poly) -> float:
    best = math.inf
    for k in range(len(poly) - 1):
        ax, ay = poly[k]
        bx, by = poly[k + 1]
        vx, vy = bx - ax, by - ay
        L2 = vx * vx + vy * vy
        if L2 == 0.0:
            t = 0.0
        else:
            t = max(0.0, min(1.0, ((px - ax) * vx + (py - ay) * vy) / L2))
        cx, cy = ax + t * vx, ay + t * vy
        best = min(best, math.hypot(px - cx, py - cy))
    if len(poly) == 1:
        best = math.hypot(px - poly[0][0], py - poly[0][1])
    return best


def oracle_plan(scenario: Scenario, cfg: PlannerConfig,
                n_rays: int = 5) -> tuple[float, list[tuple[int, int, int]]]:
    """Exhaustive layer-by-layer dynamic program over the full search graph.

    Returns (optimal total cost, voxel path).  Intended for short horizons
    only; every reachable state on every layer is relaxed with no pruning.
    """
    wps = scenario.target.waypoints
    horizon = scenario.target.horizon
    boxes = scenario.obstacles
    poly = [(p.x, p.y) for p in wps]
    dxy, dz = cfg.dxy, cfg.dz
    step = cfg.v_max * cfg.dt

    buffer_boxes = [b for b in boxes
                    if _point_polyline_dist_xy(b.center.x, b.center.y, poly)
                    <= cfg.corridor_half_width
                    + math.hypot(b.half_extents.x, b.half_extents.y)]

    offsets = []
    for ox in (-1, 0, 1):
        for oy in (-1, 0, 1):
            for oz in (-1, 0, 1):
                if ox and oy and oz:
                    continue  # no simultaneous three-axis moves
                if math.sqrt((ox * dxy) ** 2 + (oy * dxy) ** 2
                             + (oz * dz) ** 2) <= step:
                    offsets.append((ox, oy, oz))

    def center(v):
        return (v[0] * dxy, v[1] * dxy, v[2] * dz)

    def corridor_ok(x: float, y: float) -> bool:
        if _point_polyline_dist_xy(x, y, poly) <= cfg.corridor_half_width:
            return True
        for b in buffer_boxes:
            c, s = math.cos(b.yaw), math.sin(b.yaw)
            ddx, ddy = x - b.center.x, y - b.center.y
            lx = c * ddx + s * ddy
            ly = c * ddy - s * ddx
            ex = max(abs(lx) - b.half_extents.x, 0.0)
            ey = max(abs(ly) - b.half_extents.y, 0.0)
            if math.hypot(ex, ey) <= cfg.d_influence:
                return True
        return False

    # memoized per-node quantities (each still computed by brute force once)
    corridor_memo: dict[tuple[int, int], bool] = {}
    dist_memo: dict[tuple[int, int, int], float] = {}
    vis_memo: dict[tuple[tuple[int, int, int], int], float] = {}

    def clearance(v) -> float:
        d = dist_memo.get(v)
        if d is None:
            x, y, z = center(v)
            d = brute_distance(Vec3(x, y, z), boxes, cfg.d_safe)
            dist_memo[v] = d
        return d

    def node_visibility(v, t: int) -> float:
        key = (v, t)
        vb = vis_memo.get(key)
        if vb is None:
            x, y, z = center(v)
            vb = _oracle_visibility(Vec3(x, y, z), wps[t], boxes, n_rays)
            vis_memo[key] = vb
        return vb

    def feasible(v, p_t: Vec3) -> bool:
        x, y, z = center(v)
        if not (cfg.z_min <= z <= cfg.z_max):
            return False
        r = math.sqrt((x - p_t.x) ** 2 + (y - p_t.y) ** 2 + (z - p_t.z) ** 2)
        if r < cfg.d_cam_min or r > cfg.d_cam_max:
            return False
        key = (v[0], v[1])
        hit = corridor_memo.get(key)
        if hit is None:
            hit = corridor_ok(x, y)
            corridor_memo[key] = hit
        if not hit:
            return False
        return clearance(v) >= cfg.d_safe

    def viewpoint(t: int) -> tuple[float, float, float]:
        p = wps[t]
        ux, uy = _oracle_heading(wps, t, cfg.heading_eps)
        return (p.x - cfg.d_behind * ux, p.y - cfg.d_behind * uy, cfg.z_ref)

    def edge_cost(a, b, t: int) -> float:
        ax, ay, az = center(a)
        bx, by, bz = center(b)
        qx, qy, qz = viewpoint(t)
        d_b = clearance(b)
        v_b = node_visibility(b, t)
        path = cfg.w_path * math.sqrt((bx - ax) ** 2 + (by - ay) ** 2
                                      + (bz - az) ** 2)
        track = cfg.w_trk * (math.sqrt((bx - qx) ** 2 + (by - qy) ** 2
                                       + (bz - qz) ** 2)
                             / max(cfg.d_behind, 1.0))
        vis = cfg.w_vis * (1.0 - v_b)
        prox = max(0.0, cfg.d_influence - d_b) / cfg.d_influence
        safe = cfg.w_safe * prox * prox
        smooth = cfg.w_sm * abs(bz - az)
        return path + track + vis + safe + smooth

    z0 = min(max(scenario.start.z, cfg.z_min), cfg.z_max)
    start = (math.ceil(scenario.start.x / dxy - 0.5),
             math.ceil(scenario.start.y / dxy - 0.5),
             math.ceil(z0 / dz - 0.5))
    if not feasible(start, wps[0]):
        raise ValueError("oracle: start infeasible")

    layer: dict[tuple[int, int, int], float] = {start: 0.0}
    parents: list[dict] = []
    for t in range(1, horizon + 1):
        nxt: dict[tuple[int, int, int], float] = {}
        par: dict = {}
        p_t = wps[t]
        for v, g in layer.items():
            for off in offsets:
                nv = (v[0] + off[0], v[1] + off[1], v[2] + off[2])
                if not feasible(nv, p_t):
                    continue
                ng = g + edge_cost(v, nv, t)
                if nv not in nxt or ng < nxt[nv]:
                    nxt[nv] = ng
                    par[nv] = v
        if not nxt:
            raise ValueError(f"oracle: no feasible states at layer {t}")
        layer = nxt
        parents.append(par)

    best_v = min(layer, key=lambda v: (layer[v], v))
    best_g = layer[best_v]
    path = [best_v]
    for par in reversed(parents):
        path.append(par[path[-1]])
    path.reverse()
    return best_g, path
