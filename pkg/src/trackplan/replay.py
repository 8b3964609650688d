"""Post-hoc trajectory evaluation.

Replays a planned trajectory against the scenario geometry with the full
5-ray visibility check (regardless of what ray subset the planner searched
with), and derives the quality metrics: per-frame visibility, path length,
minimum obstacle clearance, and observed speed/acceleration peaks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Bvh, Vec3
from .objective import RAY_OFFSETS_5, ray_offsets
from .scenario import Scenario


@dataclass
class EvalReport:
    per_frame_visibility: list[float]
    mean_visibility: float
    path_length: float
    min_clearance: float
    collision_free: bool
    v_max_observed: float
    a_max_observed: float
    n_frames: int

    def to_dict(self) -> dict:
        return {
            "per_frame_visibility": self.per_frame_visibility,
            "mean_visibility": self.mean_visibility,
            "path_length": self.path_length,
            "min_clearance": self.min_clearance,
            "collision_free": self.collision_free,
            "v_max_observed": self.v_max_observed,
            "a_max_observed": self.a_max_observed,
            "n_frames": self.n_frames,
        }


@dataclass
class DeltaReport:
    """Visibility difference between two replayed trajectories.

    ``excluded`` is set (and the numeric fields zeroed) when either side is a
    degenerate 1-point trajectory, which yields no comparable frames.
    """

    delta_pp: float
    frame_identical: bool
    per_frame_delta: list[float]
    excluded: bool = False

    @staticmethod
    def excluded_pair() -> "DeltaReport":
        return DeltaReport(delta_pp=0.0, frame_identical=False,
                           per_frame_delta=[], excluded=True)


def replay(trajectory: list[Vec3], scenario: Scenario, bvh: Bvh,
           d_safe: float = 1.5, dt: float | None = None) -> EvalReport:
    """Evaluate a trajectory frame by frame; always uses the full 5-ray set."""
    n = len(trajectory)
    if n < 1:
        raise ValueError("trajectory must have at least one state")
    wps = scenario.target.waypoints
    if n > 1 and n != len(wps):
        raise ValueError(
            f"trajectory length {n} does not match target length {len(wps)}")
    if dt is None:
        dt = scenario.target.dt

    pos = np.array([[s.x, s.y, s.z] for s in trajectory], dtype=np.float64)
    rays = ray_offsets(len(RAY_OFFSETS_5))

    vis: list[float] = []
    for t in range(n):
        p_t = wps[t] if n > 1 else wps[0]
        tgt = np.array([[p_t.x, p_t.y, p_t.z]]) + rays
        a = np.repeat(pos[t: t + 1], rays.shape[0], axis=0)
        occ = bvh.batch_segment_occluded(a, tgt)
        vis.append(float((~occ).sum() / rays.shape[0]))

    clear = bvh.batch_distance(pos)
    min_clear = float(clear.min())

    if n > 1:
        steps = pos[1:] - pos[:-1]
        step_len = np.sqrt((steps * steps).sum(axis=1))
        path_length = float(step_len.sum())
        v = steps / dt
        v_max = float(np.sqrt((v * v).sum(axis=1)).max())
        if n > 2:
            acc = (v[1:] - v[:-1]) / dt
            a_max = float(np.sqrt((acc * acc).sum(axis=1)).max())
        else:
            a_max = 0.0
    else:
        path_length = 0.0
        v_max = 0.0
        a_max = 0.0

    return EvalReport(
        per_frame_visibility=vis,
        mean_visibility=float(sum(vis) / len(vis)),
        path_length=path_length,
        min_clearance=min_clear,
        collision_free=min_clear >= d_safe,
        v_max_observed=v_max,
        a_max_observed=a_max,
        n_frames=n,
    )


def compare(base: EvalReport, ours: EvalReport) -> DeltaReport:
    """Per-frame visibility delta (ours − base) in percentage points."""
    if base.n_frames <= 1 or ours.n_frames <= 1:
        return DeltaReport.excluded_pair()
    if base.n_frames != ours.n_frames:
        raise ValueError("frame-count mismatch between comparable reports")
    per = [o - b for b, o in zip(base.per_frame_visibility,
                                 ours.per_frame_visibility)]
    identical = all(b == o for b, o in zip(base.per_frame_visibility,
                                           ours.per_frame_visibility))
    delta_pp = 100.0 * (ours.mean_visibility - base.mean_visibility)
    return DeltaReport(delta_pp=delta_pp, frame_identical=identical,
                       per_frame_delta=per)


@dataclass
class CohortSummary:
    n: int
    mean_runtime: float
    median_runtime: float
    p99_runtime: float
    max_runtime: float
    total_runtime: float
    converged: int
    fallbacks: int
    mean_visibility: float
    mean_visibility_excl: float
    excluded_profiles: tuple[str, ...]
    worst_delta_pp: float
    frame_identical_count: int
    better_or_equal_count: int
    excluded_pairs: int

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["excluded_profiles"] = list(self.excluded_profiles)
        return d


def aggregate_cohort(rows: list[dict],
                     excluded_profiles: tuple[str, ...] = ()) -> CohortSummary:
    """Cohort-level aggregates from per-scenario result dicts.

    Each row needs: scenario_id, runtime, converged, mean_visibility; delta
    rows additionally carry delta_pp / frame_identical / excluded.  The
    ``excluded_profiles`` mean drops scenarios whose id starts with any of
    the named profile prefixes.
    """
    runtimes = np.array([r["runtime"] for r in rows], dtype=np.float64)
    converged = sum(1 for r in rows if r["converged"])
    vis = [r["mean_visibility"] for r in rows if r["converged"]]
    kept = [r["mean_visibility"] for r in rows
            if r["converged"]
            and not any(r["scenario_id"].startswith(p) for p in excluded_profiles)]

    deltas = [r for r in rows if "delta_pp" in r and not r.get("excluded", False)]
    excluded_pairs = sum(1 for r in rows if r.get("excluded", False))

    return CohortSummary(
        n=len(rows),
        mean_runtime=float(runtimes.mean()) if len(rows) else 0.0,
        median_runtime=float(np.median(runtimes)) if len(rows) else 0.0,
        p99_runtime=float(np.percentile(runtimes, 99)) if len(rows) else 0.0,
        max_runtime=float(runtimes.max()) if len(rows) else 0.0,
        total_runtime=float(runtimes.sum()) if len(rows) else 0.0,
        converged=converged,
        fallbacks=len(rows) - converged,
        mean_visibility=float(np.mean(vis)) if vis else 0.0,
        mean_visibility_excl=float(np.mean(kept)) if kept else 0.0,
        excluded_profiles=tuple(excluded_profiles),
        worst_delta_pp=min((r["delta_pp"] for r in deltas), default=0.0),
        frame_identical_count=sum(1 for r in deltas if r.get("frame_identical")),
        better_or_equal_count=sum(1 for r in deltas if r["delta_pp"] >= 0.0),
        excluded_pairs=excluded_pairs,
    )
