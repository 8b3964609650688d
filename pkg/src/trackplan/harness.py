"""Batch experiment driver.

Runs planner variants over scenario cohorts with a process pool, persists
per-scenario records as JSONL, and derives the summary tables (comparison,
ablation, beam/ray sweep).  All outputs are deterministic for equal seeds and
flags at any worker count: workers only compute, and results are collected
and written in scenario-id order.  Wall-clock timings live in fields ending
in ``_ms`` and are the only nondeterministic values in the records.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import layered, queue_planner
from .generate import DEFAULT_LENGTH_RANGE, generate_synthetic_cohort
from .geometry import Vec3, build_bvh
from .objective import (STRUCTURE_LAYERED_DAG, STRUCTURE_PRIORITY_QUEUE,
                        PlannerConfig)
from .replay import aggregate_cohort, compare, replay
from .scenario import Scenario

TIMING_FIELDS = ("runtime_ms", "bvh_build_ms")


@dataclass(frozen=True)
class VariantSpec:
    id: str
    structure: str
    use_cache: bool
    beam_width: float | None = None     # None: keep the configured beam
    expansion_cap: int | None = None    # None: keep the configured cap


VARIANTS: dict[str, VariantSpec] = {
    "B0": VariantSpec("B0", STRUCTURE_PRIORITY_QUEUE, use_cache=False),
    "B1": VariantSpec("B1", STRUCTURE_PRIORITY_QUEUE, use_cache=True),
    "B2": VariantSpec("B2", STRUCTURE_LAYERED_DAG, use_cache=True,
                      beam_width=math.inf, expansion_cap=100_000_000),
    "B3": VariantSpec("B3", STRUCTURE_LAYERED_DAG, use_cache=False,
                      beam_width=2048),
    "B4": VariantSpec("B4", STRUCTURE_LAYERED_DAG, use_cache=True,
                      beam_width=2048),
}


def resolve_config(scenario: Scenario, base_overrides: dict | None,
                   variant: VariantSpec | None) -> PlannerConfig:
    """Defaults, then CLI flags, then scenario params, then variant fields."""
    params: dict = {}
    if base_overrides:
        params.update(base_overrides)
    params.update(scenario.params)
    if variant is not None:
        params["structure"] = variant.structure
        params["use_cache"] = variant.use_cache
        if variant.beam_width is not None:
            params["beam_width"] = variant.beam_width
        if variant.expansion_cap is not None:
            params["expansion_cap"] = variant.expansion_cap
    return PlannerConfig().with_overrides(params)


def run_scenario(scenario_json: str, variant_id: str | None,
                 base_overrides: dict | None) -> dict:
    """Plan + replay one scenario; returns a JSON-ready record."""
    scenario = Scenario.from_json(scenario_json)
    variant = VARIANTS[variant_id] if variant_id else None
    cfg = resolve_config(scenario, base_overrides, variant)

    # CPU time of this worker process: insensitive to time-slicing between
    # parallel workers, so per-task numbers are comparable across worker
    # counts and machine load
    t0 = time.process_time()
    bvh = build_bvh(scenario.obstacles, inflation=cfg.d_safe)
    bvh_ms = 1000.0 * (time.process_time() - t0)

    planner = (queue_planner if cfg.structure == STRUCTURE_PRIORITY_QUEUE
               else layered)
    t0 = time.process_time()
    res = planner.plan(scenario, bvh, cfg)
    run_ms = 1000.0 * (time.process_time() - t0)

    ev = replay(res.trajectory, scenario, bvh, d_safe=cfg.d_safe)
    return {
        "scenario_id": scenario.id,
        "variant_id": variant_id,
        "converged": res.converged,
        "expansions": res.expansions,
        "total_cost": res.total_cost if res.converged else None,
        "runtime_ms": run_ms,
        "bvh_build_ms": bvh_ms,
        "trajectory": [[s.x, s.y, s.z] for s in res.trajectory],
        "eval": ev.to_dict(),
    }


def _run_one(args: tuple[str, str | None, dict | None]) -> dict:
    return run_scenario(*args)


def run_cohort(scenarios: list[str], variant_id: str | None,
               base_overrides: dict | None, workers: int) -> list[dict]:
    """Run one variant over a list of scenario JSON strings, id-ordered."""
    jobs = [(s, variant_id, base_overrides) for s in scenarios]
    # schedule big worlds first so a long job never straggles alone at the
    # end of the pool; output order is restored below
    jobs.sort(key=lambda j: len(j[0]), reverse=True)
    if workers <= 1:
        records = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs, chunksize=1))
    records.sort(key=lambda r: r["scenario_id"])
    return records


# ---------------------------------------------------------------------------
# cohort persistence

def scenario_dir(cohort_dir: Path) -> Path:
    return Path(cohort_dir) / "scenarios"


def load_cohort(cohort_dir: Path) -> list[str]:
    """Scenario JSON strings per the manifest; fails loudly if files miss."""
    cohort_dir = Path(cohort_dir)
    manifest = json.loads((cohort_dir / "manifest.json").read_text())
    texts, missing = [], []
    for name in manifest["scenarios"]:
        p = scenario_dir(cohort_dir) / f"{name}.json"
        if not p.exists():
            missing.append(name)
        else:
            texts.append(p.read_text())
    if missing:
        raise FileNotFoundError(f"cohort incomplete, missing scenarios: {missing}")
    return texts


def write_jsonl(path: Path, records: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")


def read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _profile_of(scenario_id: str) -> str:
    # ids look like "<profile>-<seed hex>-<index>"
    return scenario_id.rsplit("-", 2)[0]


def _summary_rows(records: list[dict]) -> dict:
    return [
        {
            "scenario_id": r["scenario_id"],
            "runtime": r["runtime_ms"] / 1000.0,
            "converged": r["converged"],
            "mean_visibility": r["eval"]["mean_visibility"],
        }
        for r in records
    ]


# ---------------------------------------------------------------------------
# commands

def cmd_generate(seed: int, n: int, profile: str, out_dir: Path,
                 length_range: tuple[float, float] = DEFAULT_LENGTH_RANGE,
                 param_overrides: dict | None = None) -> list[str]:
    """Write n scenario files plus a manifest; idempotent for equal args."""
    out_dir = Path(out_dir)
    sdir = scenario_dir(out_dir)
    sdir.mkdir(parents=True, exist_ok=True)
    scenarios = generate_synthetic_cohort(seed, n, profile, length_range,
                                          param_overrides)
    names = []
    for s in scenarios:
        (sdir / f"{s.id}.json").write_text(s.to_json(), encoding="utf-8")
        names.append(s.id)
    manifest = out_dir / "manifest.json"
    existing = []
    if manifest.exists():
        existing = [n_ for n_ in json.loads(manifest.read_text())["scenarios"]
                    if n_ not in names]
    manifest.write_text(json.dumps({"scenarios": existing + names}, indent=1),
                        encoding="utf-8")
    return names


def _compare_summaries(out_dir: Path, base: list[dict],
                       ours: list[dict]) -> dict:
    """Aggregate + visibility + per-profile CSVs from paired records."""
    sdir = Path(out_dir) / "summary"

    agg_rows = []
    for vid, recs in (("B0", base), ("B4", ours)):
        s = aggregate_cohort(_summary_rows(recs))
        agg_rows.append([vid, s.n, s.converged, s.fallbacks,
                         s.mean_runtime, s.total_runtime, s.max_runtime,
                         s.mean_visibility])
    write_csv(sdir / "compare_aggregate.csv",
              ["variant", "n", "converged", "fallbacks", "mean_runtime_s",
               "total_runtime_s", "max_runtime_s", "mean_visibility"],
              agg_rows)

    by_id = {r["scenario_id"]: r for r in base}
    delta_rows, deltas = [], []
    for r in ours:
        b = by_id[r["scenario_id"]]
        eb = _eval_from_record(b)
        eo = _eval_from_record(r)
        d = compare(eb, eo)
        deltas.append(d)
        delta_rows.append([r["scenario_id"], "" if d.excluded else d.delta_pp,
                           d.frame_identical, d.excluded])
    write_csv(sdir / "compare_deltas.csv",
              ["scenario_id", "delta_pp", "frame_identical", "excluded"],
              delta_rows)

    valid = [d for d in deltas if not d.excluded]
    vis_block = {
        "n_pairs": len(valid),
        "excluded_pairs": len(deltas) - len(valid),
        "mean_visibility_base": _mean([b["eval"]["mean_visibility"]
                                       for b in base if b["converged"]]),
        "mean_visibility_ours": _mean([r["eval"]["mean_visibility"]
                                       for r in ours if r["converged"]]),
        "mean_delta_pp": _mean([d.delta_pp for d in valid]),
        "worst_delta_pp": min((d.delta_pp for d in valid), default=0.0),
        "frame_identical": sum(1 for d in valid if d.frame_identical),
        "better_or_equal": sum(1 for d in valid if d.delta_pp >= 0.0),
    }
    write_csv(sdir / "compare_visibility.csv",
              list(vis_block.keys()), [list(vis_block.values())])

    prof_rows = []
    profiles = sorted({_profile_of(r["scenario_id"]) for r in ours})
    for p in profiles:
        bsub = [r for r in base if _profile_of(r["scenario_id"]) == p]
        osub = [r for r in ours if _profile_of(r["scenario_id"]) == p]
        sb = aggregate_cohort(_summary_rows(bsub))
        so = aggregate_cohort(_summary_rows(osub))
        prof_rows.append([p, len(osub), sb.converged, so.converged,
                          sb.mean_visibility, so.mean_visibility,
                          100.0 * (so.mean_visibility - sb.mean_visibility)])
    write_csv(sdir / "compare_profiles.csv",
              ["profile", "n", "converged_base", "converged_ours",
               "visibility_base", "visibility_ours", "delta_pp"],
              prof_rows)
    return vis_block


def _mean(xs: list[float]) -> float:
    return sum(xs) / len(xs) if xs else 0.0


def _eval_from_record(r: dict):
    from .replay import EvalReport
    e = r["eval"]
    return EvalReport(**e)


def cmd_compare(cohort_dir: Path, workers: int = 32,
                cap: int = 5_000_000,
                base_overrides: dict | None = None,
                out_dir: Path | None = None) -> dict:
    """Baseline (B0) vs layered (B4) with identical inputs and cap."""
    out = Path(out_dir) if out_dir is not None else Path(cohort_dir)
    overrides = dict(base_overrides or {})
    overrides.setdefault("expansion_cap", cap)
    texts = load_cohort(cohort_dir)
    base = run_cohort(texts, "B0", overrides, workers)
    ours = run_cohort(texts, "B4", overrides, workers)
    rdir = out / "results"
    write_jsonl(rdir / "B0" / "results.jsonl", base)
    write_jsonl(rdir / "B4" / "results.jsonl", ours)
    return _compare_summaries(out, base, ours)


def cmd_ablate(cohort_dir: Path, workers: int = 32,
               base_overrides: dict | None = None,
               out_dir: Path | None = None) -> list[dict]:
    """All five variants on one cohort, plus the cache-transparency check."""
    out = Path(out_dir) if out_dir is not None else Path(cohort_dir)
    texts = load_cohort(cohort_dir)
    vids = ("B0", "B1", "B2", "B3", "B4")
    # one pool for the whole matrix: big worlds first so no long job
    # straggles alone at the end, and the five variants of each scenario
    # adjacent so every variant runs under the same machine load (runtime
    # means are compared across variants, so skewing contention toward one
    # variant would bias them)
    order = sorted(range(len(texts)), key=lambda i: len(texts[i]),
                   reverse=True)
    jobs = [(texts[i], vid, base_overrides) for i in order for vid in vids]
    if workers <= 1:
        recs = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            recs = list(pool.map(_run_one, jobs, chunksize=1))
    results: dict[str, list[dict]] = {vid: [] for vid in vids}
    for rec in recs:
        results[rec["variant_id"]].append(rec)
    for vid in vids:
        results[vid].sort(key=lambda r: r["scenario_id"])
        write_jsonl(out / "results" / vid / "results.jsonl", results[vid])

    for a, b in (("B0", "B1"), ("B3", "B4")):
        for ra, rb in zip(results[a], results[b]):
            if (ra["trajectory"] != rb["trajectory"]
                    or ra["total_cost"] != rb["total_cost"]
                    or ra["expansions"] != rb["expansions"]):
                raise AssertionError(
                    f"cache transparency violated: {a} vs {b} differ on "
                    f"{ra['scenario_id']}")

    mean_b0 = _mean([r["runtime_ms"] for r in results["B0"]])
    rows = []
    for vid in ("B0", "B1", "B2", "B3", "B4"):
        s = aggregate_cohort(_summary_rows(results[vid]))
        mean_ms = s.mean_runtime * 1000.0
        rows.append({
            "variant": vid,
            "mean_runtime_s": s.mean_runtime,
            "max_runtime_s": s.max_runtime,
            "converged": s.converged,
            "fallbacks": s.fallbacks,
            "speedup_vs_B0": mean_b0 / mean_ms if mean_ms > 0 else math.inf,
        })
    write_csv(out / "summary" / "ablation.csv",
              list(rows[0].keys()), [list(r.values()) for r in rows])
    return rows


SWEEP_DEFAULT_CONFIGS = ((1, 128), (5, 128), (3, 1500), (5, 2048))


def cmd_sweep(cohort_dir: Path, configs=SWEEP_DEFAULT_CONFIGS,
              workers: int = 32,
              base_overrides: dict | None = None,
              out_dir: Path | None = None) -> list[dict]:
    """Ray-count / beam-width grid vs the exact unpruned 5-ray reference."""
    out = Path(out_dir) if out_dir is not None else Path(cohort_dir)
    texts = load_cohort(cohort_dir)
    overrides = dict(base_overrides or {})

    ref_over = dict(overrides)
    ref_over.update({"ray_count": 5, "beam_width": math.inf,
                     "structure": STRUCTURE_LAYERED_DAG,
                     "expansion_cap": 100_000_000})
    reference = run_cohort(texts, None, ref_over, workers)
    write_jsonl(out / "results" / "reference" / "results.jsonl",
                reference)
    ref_vis = {r["scenario_id"]: r["eval"]["mean_visibility"]
               for r in reference}

    b0_over = dict(overrides)
    b0_over.setdefault("expansion_cap", 5_000_000)
    b0 = run_cohort(texts, "B0", b0_over, workers)
    mean_b0 = _mean([r["runtime_ms"] for r in b0])

    rows = []
    all_configs = list(configs) + [(5, math.inf)]
    for rays, beam in all_configs:
        over = dict(overrides)
        over.update({"ray_count": rays, "beam_width": beam,
                     "structure": STRUCTURE_LAYERED_DAG})
        if beam == math.inf:
            over["expansion_cap"] = 100_000_000
        recs = run_cohort(texts, None, over, workers)
        beam_name = "inf" if beam == math.inf else int(beam)
        write_jsonl(out / "results" /
                    f"sweep_r{rays}_b{beam_name}" / "results.jsonl", recs)
        losses = [100.0 * (r["eval"]["mean_visibility"]
                           - ref_vis[r["scenario_id"]])
                  for r in recs if r["converged"]]
        mean_ms = _mean([r["runtime_ms"] for r in recs])
        rows.append({
            "rays": rays,
            "beam": beam_name,
            "converged": sum(1 for r in recs if r["converged"]),
            "mean_visibility": _mean([r["eval"]["mean_visibility"]
                                      for r in recs if r["converged"]]),
            "worst_loss_pp": min(losses, default=0.0),
            "speedup_vs_B0": mean_b0 / mean_ms if mean_ms > 0 else math.inf,
        })
    write_csv(out / "summary" / "sweep.csv",
              list(rows[0].keys()), [list(r.values()) for r in rows])
    return rows


def cmd_replay(trajectory_file: Path, scenario_file: Path) -> dict:
    """Standalone replay of an externally produced trajectory."""
    scenario = Scenario.from_json(Path(scenario_file).read_text())
    obj = json.loads(Path(trajectory_file).read_text())
    if not isinstance(obj, list) or not all(
            isinstance(p, list) and len(p) == 3 for p in obj):
        raise ValueError("trajectory file must be a JSON list of [x, y, z]")
    traj = [Vec3(*p) for p in obj]
    cfg = PlannerConfig().with_overrides(scenario.params)
    bvh = build_bvh(scenario.obstacles, inflation=cfg.d_safe)
    return replay(traj, scenario, bvh, d_safe=cfg.d_safe).to_dict()


def cmd_report_data(cohort_dir: Path, out_dir: Path | None = None) -> dict:
    """Recompute summary CSVs from the persisted JSONL records.

    Used both as the report-package feed and as the accounting check that
    persisted records reproduce the live aggregates.
    """
    out = Path(out_dir) if out_dir is not None else Path(cohort_dir)
    rdir = Path(cohort_dir) / "results"
    b0 = rdir / "B0" / "results.jsonl"
    b4 = rdir / "B4" / "results.jsonl"
    if not (b0.exists() and b4.exists()):
        raise FileNotFoundError("run compare first: missing B0/B4 results")
    return _compare_summaries(out, read_jsonl(b0), read_jsonl(b4))
