"""Vector math, oriented-box obstacles, and a BVH for distance / line-of-sight queries.

The BVH answers two queries:

* ``distance(point)`` -- Euclidean distance from a point to the nearest box
  surface, evaluated against boxes inflated by the safety margin given at
  build time (0 if the point is inside an inflated box, ``inf`` for an empty
  world).
* ``segment_occluded(a, b)`` -- whether the segment from ``a`` to ``b``
  intersects any *uninflated* box.  Sight rays test raw geometry; inflating
  them would spuriously report occlusion next to every wall.

Both queries also come in numpy batch form (``batch_distance``,
``batch_segment_occluded``).  The batch forms use the same per-box float
expressions as the scalar forms, so results are bit-identical.

Boxes at tangency count as hit (boxes are closed sets).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_PARALLEL_EPS = 1e-12


@dataclass(frozen=True)
class Vec3:
    """A point or offset in metres, world frame."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError(f"non-finite Vec3 component: {(self.x, self.y, self.z)}")

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @staticmethod
    def from_array(a) -> "Vec3":
        return Vec3(float(a[0]), float(a[1]), float(a[2]))

    def __add__(self, o: "Vec3") -> "Vec3":
        return Vec3(self.x + o.x, self.y + o.y, self.z + o.z)

    def __sub__(self, o: "Vec3") -> "Vec3":
        return Vec3(self.x - o.x, self.y - o.y, self.z - o.z)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


def _normalize_yaw(yaw: float) -> float:
    """Wrap into [-pi, pi)."""
    wrapped = math.fmod(yaw + math.pi, 2.0 * math.pi)
    if wrapped < 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class ObstacleBox:
    """Oriented bounding box:+-half_extents around center, rotated by yaw about world z."""

    center: Vec3
    half_extents: Vec3
    yaw: float = 0.0
    class_label: str = ""

    def __post_init__(self):
        h = self.half_extents
        if not (h.x > 0.0 and h.y > 0.0 and h.z > 0.0):
            raise ValueError(f"half_extents must be strictly positive, got {h}")
        if not math.isfinite(self.yaw):
            raise ValueError("yaw must be finite")
        object.__setattr__(self, "yaw", _normalize_yaw(self.yaw))

    @property
    def top(self) -> float:
        return self.center.z + self.half_extents.z


@dataclass
class Bvh:
    """Immutable spatial index over inflated oriented boxes.

    Build once with :func:`build_bvh`; queries are deterministic and safe
    for concurrent read-only use.  At the box counts these worlds carry
    (hundreds at most), queries vectorized across the box axis beat any
    hierarchy traversal in Python, so both the scalar and batch paths sweep
    all boxes; the per-box world AABBs serve as a prefilter for segment
    bundles.
    """

    boxes: list[ObstacleBox]
    inflation: float
    # per-box arrays (input order)
    centers: np.ndarray = field(repr=False, default=None)
    half_raw: np.ndarray = field(repr=False, default=None)
    half_infl: np.ndarray = field(repr=False, default=None)
    cos_yaw: np.ndarray = field(repr=False, default=None)
    sin_yaw: np.ndarray = field(repr=False, default=None)
    # inflated world AABBs (input order)
    aabb_min: np.ndarray = field(repr=False, default=None)
    aabb_max: np.ndarray = field(repr=False, default=None)
    # per-box plain-float tuples for the scalar occlusion path
    _box_f: list = field(repr=False, default=None)
    # contiguous per-component copies for the scalar distance path
    _cx: np.ndarray = field(repr=False, default=None)
    _cy: np.ndarray = field(repr=False, default=None)
    _cz: np.ndarray = field(repr=False, default=None)
    _hx: np.ndarray = field(repr=False, default=None)
    _hy: np.ndarray = field(repr=False, default=None)
    _hz: np.ndarray = field(repr=False, default=None)

    @property
    def n_boxes(self) -> int:
        return len(self.boxes)

    # -- scalar queries ------------------------------------------------------

    def distance(self, point: Vec3) -> float:
        """Distance from point to nearest inflated box surface (inf if no boxes)."""
        if not (math.isfinite(point.x) and math.isfinite(point.y) and math.isfinite(point.z)):
            raise ValueError("query point must be finite")
        return self.distance_xyz(point.x, point.y, point.z)

    def distance_xyz(self, px: float, py: float, pz: float) -> float:
        """Same query as :meth:`distance` on raw coordinates (hot-loop form).

        Vectorized across boxes with the same per-box expressions as
        :meth:`batch_distance`, so the scalar and batch paths agree
        bit-for-bit.
        """
        if self.n_boxes == 0:
            return math.inf
        dx = px - self._cx
        dy = py - self._cy
        dz = pz - self._cz
        c, s = self.cos_yaw, self.sin_yaw
        lx = c * dx + s * dy
        ly = c * dy - s * dx
        ex = np.maximum(np.abs(lx) - self._hx, 0.0)
        ey = np.maximum(np.abs(ly) - self._hy, 0.0)
        ez = np.maximum(np.abs(dz) - self._hz, 0.0)
        # sqrt is monotone and correctly rounded, so taking it after the min
        # gives the same float as the per-box sqrt in batch_distance
        return math.sqrt((ex * ex + ey * ey + ez * ez).min())

    def distance_multi_xyz(self, px: np.ndarray, py: np.ndarray,
                           pz: np.ndarray) -> np.ndarray:
        """Distances for small component arrays of points (hot-loop form).

        Broadcasts boxes x points in one sweep; per-element expressions match
        :meth:`distance_xyz`, so values are bit-identical to the scalar path.
        """
        if self.n_boxes == 0:
            return np.full(px.shape[0], np.inf)
        dx = px - self._cx[:, None]
        dy = py - self._cy[:, None]
        dz = pz - self._cz[:, None]
        c = self.cos_yaw[:, None]
        s = self.sin_yaw[:, None]
        lx = c * dx + s * dy
        ly = c * dy - s * dx
        ex = np.maximum(np.abs(lx) - self._hx[:, None], 0.0)
        ey = np.maximum(np.abs(ly) - self._hy[:, None], 0.0)
        ez = np.maximum(np.abs(dz) - self._hz[:, None], 0.0)
        return np.sqrt((ex * ex + ey * ey + ez * ez).min(axis=0))

    def segment_occluded(self, a: Vec3, b: Vec3) -> bool:
        """True iff the segment a-b intersects any uninflated box."""
        return self.segment_occluded_xyz(a.x, a.y, a.z, b.x, b.y, b.z)

    def segment_occluded_xyz(self, ax: float, ay: float, az: float,
                             bx: float, by: float, bz: float) -> bool:
        """Same query as :meth:`segment_occluded` on raw coordinates.

        A vectorized AABB overlap prefilter narrows the field (inflated
        AABBs contain the raw boxes, so this is conservative), then the few
        surviving boxes get the exact slab test with an early exit.
        """
        if self.n_boxes == 0:
            return False
        lo, hi = self.aabb_min, self.aabb_max
        over = ((lo[:, 0] <= (ax if ax > bx else bx))
                & (hi[:, 0] >= (bx if ax > bx else ax))
                & (lo[:, 1] <= (ay if ay > by else by))
                & (hi[:, 1] >= (by if ay > by else ay))
                & (lo[:, 2] <= (az if az > bz else bz))
                & (hi[:, 2] >= (bz if az > bz else az)))
        boxes = self._box_f
        for bi in np.nonzero(over)[0].tolist():
            if _box_segment_hit(boxes[bi], ax, ay, az, bx, by, bz):
                return True
        return False

    def clear_ray_count(self, ax: float, ay: float, az: float,
                        ends: list[tuple[float, float, float]]) -> int:
        """How many segments from a common origin to ``ends`` are unoccluded.

        Equivalent to counting ``not segment_occluded_xyz(...)`` per ray, but
        the AABB prefilter runs once over the whole bundle's bounding box.
        """
        if self.n_boxes == 0:
            return len(ends)
        lox = hix = ax
        loy = hiy = ay
        loz = hiz = az
        for ex, ey, ez in ends:
            if ex < lox:
                lox = ex
            elif ex > hix:
                hix = ex
            if ey < loy:
                loy = ey
            elif ey > hiy:
                hiy = ey
            if ez < loz:
                loz = ez
            elif ez > hiz:
                hiz = ez
        lo, hi = self.aabb_min, self.aabb_max
        over = ((lo[:, 0] <= hix) & (hi[:, 0] >= lox)
                & (lo[:, 1] <= hiy) & (hi[:, 1] >= loy)
                & (lo[:, 2] <= hiz) & (hi[:, 2] >= loz))
        cand = np.nonzero(over)[0].tolist()
        if not cand:
            return len(ends)
        boxes = self._box_f
        clear = 0
        for ex, ey, ez in ends:
            for bi in cand:
                if _box_segment_hit(boxes[bi], ax, ay, az, ex, ey, ez):
                    break
            else:
                clear += 1
        return clear

    # -- batch queries -------------------------------------------------------

    def batch_distance(self, points: np.ndarray) -> np.ndarray:
        """Distances for an (M, 3) array of points; brute-force min over boxes."""
        points = np.asarray(points, dtype=np.float64)
        m = points.shape[0]
        if self.n_boxes == 0:
            return np.full(m, np.inf)
        best = np.full(m, np.inf)
        for bi in range(self.n_boxes):
            cx, cy, cz = self.centers[bi]
            c, s = self.cos_yaw[bi], self.sin_yaw[bi]
            hx, hy, hz = self.half_infl[bi]
            dx = points[:, 0] - cx
            dy = points[:, 1] - cy
            dz = points[:, 2] - cz
            lx = c * dx + s * dy
            ly = c * dy - s * dx
            ex = np.maximum(np.abs(lx) - hx, 0.0)
            ey = np.maximum(np.abs(ly) - hy, 0.0)
            ez = np.maximum(np.abs(dz) - hz, 0.0)
            d = np.sqrt(ex * ex + ey * ey + ez * ez)
            np.minimum(best, d, out=best)
        return best

    def batch_segment_occluded(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Occlusion flags for (M, 3) segment endpoint arrays.

        Boxes are swept in order of proximity to the segment bundle and rays
        already known occluded are dropped, so dense occluder fields resolve
        after a couple of boxes.
        """
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        m = a.shape[0]
        occluded = np.zeros(m, dtype=bool)
        if self.n_boxes == 0 or m == 0:
            return occluded
        bundle_lo = np.minimum(a.min(axis=0), b.min(axis=0))
        bundle_hi = np.maximum(a.max(axis=0), b.max(axis=0))
        near = (self.aabb_max >= bundle_lo).all(axis=1) & (self.aabb_min <= bundle_hi).all(axis=1)
        cand = np.nonzero(near)[0]
        if cand.size == 0:
            return occluded
        mid = 0.5 * (bundle_lo + bundle_hi)
        order = cand[np.argsort(np.linalg.norm(self.centers[cand] - mid, axis=1), kind="stable")]
        alive = np.arange(m)
        aa, bb = a, b
        for bi in order:
            hit = self._batch_box_segment_hit(bi, aa, bb)
            if hit.any():
                occluded[alive[hit]] = True
                keep = ~hit
                alive = alive[keep]
                if alive.size == 0:
                    break
                aa = aa[keep]
                bb = bb[keep]
        return occluded

    def _batch_box_segment_hit(self, bi: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        cx, cy, cz = self.centers[bi]
        c, s = self.cos_yaw[bi], self.sin_yaw[bi]
        hx, hy, hz = self.half_raw[bi]
        dax = a[:, 0] - cx
        day = a[:, 1] - cy
        ox = c * dax + s * day
        oy = c * day - s * dax
        oz = a[:, 2] - cz
        dbx = b[:, 0] - cx
        dby = b[:, 1] - cy
        ex = c * dbx + s * dby
        ey = c * dby - s * dbx
        ez = b[:, 2] - cz
        dx, dy, dz = ex - ox, ey - oy, ez - oz

        tmin = np.zeros(a.shape[0])
        tmax = np.ones(a.shape[0])
        ok = np.ones(a.shape[0], dtype=bool)
        for o, d, h in ((ox, dx, hx), (oy, dy, hy), (oz, dz, hz)):
            par = np.abs(d) < _PARALLEL_EPS
            ok &= ~par | (np.abs(o) <= h)
            # parallel lanes divide by a dummy 1.0 and are overwritten below
            safe = np.where(par, 1.0, d)
            t1 = (-h - o) / safe
            t2 = (h - o) / safe
            lo = np.minimum(t1, t2)
            hi = np.maximum(t1, t2)
            tmin = np.where(par, tmin, np.maximum(tmin, lo))
            tmax = np.where(par, tmax, np.minimum(tmax, hi))
        return ok & (tmin <= tmax)


def _box_segment_hit(box: tuple, ax: float, ay: float, az: float,
                     bx: float, by: float, bz: float) -> bool:
    """Closed-interval slab test of one uninflated box against a segment.

    Same per-axis float expressions as ``Bvh._batch_box_segment_hit`` so the
    scalar and batch occlusion paths agree bit-for-bit.
    """
    cx, cy, cz, c, s, hx, hy, hz = box
    dax = ax - cx
    day = ay - cy
    ox = c * dax + s * day
    oy = c * day - s * dax
    oz = az - cz
    dbx = bx - cx
    dby = by - cy
    ex = c * dbx + s * dby
    ey = c * dby - s * dbx
    ez = bz - cz
    dx, dy, dz = ex - ox, ey - oy, ez - oz

    tmin, tmax = 0.0, 1.0
    for o, d, h in ((ox, dx, hx), (oy, dy, hy), (oz, dz, hz)):
        if -_PARALLEL_EPS < d < _PARALLEL_EPS:
            if not (-h <= o <= h):
                return False
        else:
            t1 = (-h - o) / d
            t2 = (h - o) / d
            if t1 <= t2:
                lo, hi = t1, t2
            else:
                lo, hi = t2, t1
            if lo > tmin:
                tmin = lo
            if hi < tmax:
                tmax = hi
            if tmin > tmax:
                return False
    return True


def _inflated_aabb(box: ObstacleBox, inflation: float) -> tuple[np.ndarray, np.ndarray]:
    hx = box.half_extents.x + inflation
    hy = box.half_extents.y + inflation
    hz = box.half_extents.z + inflation
    c_, s_ = math.cos(box.yaw), math.sin(box.yaw)
    wx = abs(c_) * hx + abs(s_) * hy
    wy = abs(s_) * hx + abs(c_) * hy
    c = box.center
    return (np.array([c.x - wx, c.y - wy, c.z - hz]),
            np.array([c.x + wx, c.y + wy, c.z + hz]))


def build_bvh(obstacles: list[ObstacleBox], inflation: float) -> Bvh:
    """Build the index: per-box frame arrays plus inflated world AABBs."""
    if inflation < 0.0:
        raise ValueError("inflation must be >= 0")
    for box in obstacles:
        if not isinstance(box, ObstacleBox):
            raise TypeError(f"expected ObstacleBox, got {type(box)!r}")

    n = len(obstacles)
    bvh = Bvh(boxes=list(obstacles), inflation=float(inflation))
    bvh.centers = np.array([[b.center.x, b.center.y, b.center.z] for b in obstacles],
                           dtype=np.float64).reshape(n, 3)
    bvh.half_raw = np.array([[b.half_extents.x, b.half_extents.y, b.half_extents.z]
                             for b in obstacles], dtype=np.float64).reshape(n, 3)
    bvh.half_infl = bvh.half_raw + inflation
    bvh.cos_yaw = np.array([math.cos(b.yaw) for b in obstacles], dtype=np.float64)
    bvh.sin_yaw = np.array([math.sin(b.yaw) for b in obstacles], dtype=np.float64)

    mins, maxs = np.empty((n, 3)), np.empty((n, 3))
    for i, b in enumerate(obstacles):
        mins[i], maxs[i] = _inflated_aabb(b, inflation)
    bvh.aabb_min, bvh.aabb_max = mins, maxs

    bvh._cx = np.ascontiguousarray(bvh.centers[:, 0])
    bvh._cy = np.ascontiguousarray(bvh.centers[:, 1])
    bvh._cz = np.ascontiguousarray(bvh.centers[:, 2])
    bvh._hx = np.ascontiguousarray(bvh.half_infl[:, 0])
    bvh._hy = np.ascontiguousarray(bvh.half_infl[:, 1])
    bvh._hz = np.ascontiguousarray(bvh.half_infl[:, 2])
    bvh._box_f = [
        (b.center.x, b.center.y, b.center.z,
         math.cos(b.yaw), math.sin(b.yaw),
         b.half_extents.x, b.half_extents.y, b.half_extents.z)
        for b in obstacles
    ]
    return bvh
