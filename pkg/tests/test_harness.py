"""Benchmark harness: cohort persistence, variant runs, and summary outputs."""

import json
import math

import pytest

from trackplan.harness import (VARIANTS, cmd_compare, cmd_generate, cmd_replay,
                               cmd_report_data, load_cohort, read_jsonl,
                               resolve_config, run_cohort, run_scenario,
                               scenario_dir, write_csv, write_jsonl)
from trackplan.generate import generate_synthetic_cohort
from trackplan.scenario import Scenario

TIMING_FIELDS = ("runtime_ms", "bvh_build_ms")


def _strip_timing(records: list[dict]) -> str:
    clean = [{k: v for k, v in r.items() if k not in TIMING_FIELDS}
             for r in records]
    return json.dumps(clean, sort_keys=True)


# -- variant table and config resolution --------------------------------------

def test_variant_matrix():
    assert set(VARIANTS) == {"B0", "B1", "B2", "B3", "B4"}
    b0, b1, b2, b3, b4 = (VARIANTS[k] for k in ("B0", "B1", "B2", "B3", "B4"))
    assert b0.structure == b1.structure == "priority_queue"
    assert b2.structure == b3.structure == b4.structure == "layered_dag"
    assert (b0.use_cache, b1.use_cache) == (False, True)
    assert (b3.use_cache, b4.use_cache) == (False, True)
    assert b2.use_cache
    assert b2.beam_width == math.inf and b2.expansion_cap == 100_000_000
    assert b3.beam_width == b4.beam_width == 2048


def test_resolve_config_precedence():
    sc = generate_synthetic_cohort(1, 1, "open", (10.0, 12.0))[0]
    sc.params["w_vis"] = 7.0
    sc.params["use_cache"] = False
    # scenario params beat CLI-level overrides
    cfg = resolve_config(sc, {"w_vis": 3.0, "w_sm": 0.4}, None)
    assert cfg.w_vis == 7.0 and cfg.w_sm == 0.4
    # variant hard fields beat scenario params
    cfg = resolve_config(sc, None, VARIANTS["B4"])
    assert cfg.use_cache and cfg.structure == "layered_dag"
    assert cfg.beam_width == 2048
    # B2 lifts the cap and removes the beam bound
    cfg = resolve_config(sc, {"expansion_cap": 123}, VARIANTS["B2"])
    assert cfg.beam_width == math.inf and cfg.expansion_cap == 100_000_000


# -- persistence helpers -------------------------------------------------------

def test_jsonl_round_trip(tmp_path):
    rows = [{"a": 1, "b": [1.5, None]}, {"a": 2, "b": []}]
    path = tmp_path / "sub" / "rows.jsonl"
    write_jsonl(path, rows)
    assert read_jsonl(path) == rows
    assert len(path.read_text().strip().splitlines()) == 2


def test_write_csv(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["x", "y"], [[1, "a"], [2.5, "b"]])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x,y"
    assert lines[1:] == ["1,a", "2.5,b"]


def test_generate_writes_cohort_and_manifest(tmp_path):
    names = cmd_generate(5, 4, "open", tmp_path, (10.0, 12.0))
    assert len(names) == 4
    listed = json.loads((tmp_path / "manifest.json").read_text())["scenarios"]
    assert listed == names
    files = sorted(p.stem for p in scenario_dir(tmp_path).glob("*.json"))
    assert files == sorted(names)
    # regenerating with equal args leaves identical bytes
    before = {p.name: p.read_bytes() for p in scenario_dir(tmp_path).iterdir()}
    cmd_generate(5, 4, "open", tmp_path, (10.0, 12.0))
    after = {p.name: p.read_bytes() for p in scenario_dir(tmp_path).iterdir()}
    assert before == after


def test_generate_appends_second_profile(tmp_path):
    a = cmd_generate(5, 2, "open", tmp_path, (10.0, 12.0))
    b = cmd_generate(5, 2, "canyon", tmp_path, (10.0, 12.0))
    listed = json.loads((tmp_path / "manifest.json").read_text())["scenarios"]
    assert listed == a + b
    assert len(load_cohort(tmp_path)) == 4


def test_load_cohort_requires_manifest(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_cohort(tmp_path)


# -- running -------------------------------------------------------------------

def test_run_scenario_record_schema():
    sc = generate_synthetic_cohort(8, 1, "urban-sparse", (10.0, 12.0))[0]
    rec = run_scenario(sc.to_json(), "B4", None)
    assert rec["scenario_id"] == sc.id and rec["variant_id"] == "B4"
    assert rec["converged"] is True
    assert rec["expansions"] > 0 and rec["runtime_ms"] > 0.0
    assert len(rec["trajectory"]) == sc.target.horizon + 1
    ev = rec["eval"]
    assert set(ev) == {"per_frame_visibility", "mean_visibility", "path_length",
                       "min_clearance", "collision_free", "v_max_observed",
                       "a_max_observed", "n_frames"}
    json.dumps(rec)  # JSON-serializable end to end


def test_fallback_record_has_null_cost():
    sc = generate_synthetic_cohort(8, 1, "urban-sparse", (10.0, 12.0))[0]
    rec = run_scenario(sc.to_json(), "B0", {"expansion_cap": 10})
    assert rec["converged"] is False
    assert rec["total_cost"] is None
    assert len(rec["trajectory"]) == 1


def test_run_cohort_worker_count_is_invisible():
    texts = [s.to_json()
             for s in generate_synthetic_cohort(8, 4, "urban-sparse", (10.0, 12.0))]
    seq = run_cohort(texts, "B4", None, workers=1)
    par = run_cohort(texts, "B4", None, workers=4)
    assert _strip_timing(seq) == _strip_timing(par)


# -- commands ------------------------------------------------------------------

def test_compare_outputs(tmp_path):
    cmd_generate(6, 3, "urban-sparse", tmp_path, (10.0, 12.0))
    block = cmd_compare(tmp_path, workers=2)
    assert block["n_pairs"] + block["excluded_pairs"] == 3
    for vid in ("B0", "B4"):
        recs = read_jsonl(tmp_path / "results" / vid / "results.jsonl")
        assert len(recs) == 3
    sdir = tmp_path / "summary"
    for name in ("compare_aggregate.csv", "compare_deltas.csv",
                 "compare_visibility.csv", "compare_profiles.csv"):
        assert (sdir / name).exists()


def test_report_data_reproduces_compare_block(tmp_path):
    cmd_generate(6, 3, "urban-sparse", tmp_path, (10.0, 12.0))
    live = cmd_compare(tmp_path, workers=2)
    out = tmp_path / "rebuilt"
    replayed = cmd_report_data(tmp_path, out_dir=out)
    assert replayed == live
    assert (out / "summary" / "compare_visibility.csv").exists()


def test_report_data_requires_results(tmp_path):
    cmd_generate(6, 1, "open", tmp_path, (10.0, 12.0))
    with pytest.raises(FileNotFoundError):
        cmd_report_data(tmp_path)


def test_cmd_replay_round_trip(tmp_path):
    sc = generate_synthetic_cohort(9, 1, "open", (10.0, 12.0))[0]
    rec = run_scenario(sc.to_json(), "B4", None)
    sfile = tmp_path / "scenario.json"
    tfile = tmp_path / "trajectory.json"
    sfile.write_text(sc.to_json())
    tfile.write_text(json.dumps(rec["trajectory"]))
    out = cmd_replay(tfile, sfile)
    assert out == rec["eval"]


def test_cmd_replay_rejects_malformed_trajectory(tmp_path):
    sc = generate_synthetic_cohort(9, 1, "open", (10.0, 12.0))[0]
    sfile = tmp_path / "scenario.json"
    sfile.write_text(sc.to_json())
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"points": [[0, 0, 0]]}))
    with pytest.raises(ValueError):
        cmd_replay(bad, sfile)
    bad.write_text(json.dumps([[0, 0], [1, 1]]))
    with pytest.raises(ValueError):
        cmd_replay(bad, sfile)
