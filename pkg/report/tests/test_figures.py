"""Figure builders: rendering details and companion-CSV fidelity.

The fidelity test drives the real benchmark harness on a tiny cohort and
checks, for every figure kind, that the companion CSV repeats the harness
file values verbatim.
"""

import csv
import json
from pathlib import Path

import pytest

from trackplan_report import DELTA_ENVELOPE_PP, FigureSpec, SchemaError, render
from trackplan_report.figures import delta_hist

from trackplan.harness import cmd_ablate, cmd_compare, cmd_generate, cmd_sweep


@pytest.fixture(scope="session")
def bench_dir(tmp_path_factory) -> Path:
    """A miniature but fully real benchmark run."""
    out = tmp_path_factory.mktemp("bench")
    cmd_generate(51, 3, "urban-sparse", out, (10.0, 12.0))
    cmd_compare(out, workers=1)
    cmd_ablate(out, workers=1)
    cmd_sweep(out, configs=((1, 128), (5, 2048)), workers=1)
    return out


def _csv_rows(path: Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _render(kind, inputs, out_dir) -> dict:
    return render(FigureSpec(kind=kind, inputs=tuple(inputs),
                             out=out_dir / f"{kind}.png"))


def test_companion_csvs_repeat_harness_values_exactly(bench_dir, tmp_path):
    summary = bench_dir / "summary"
    results = bench_dir / "results"

    res = _render("runtime_dist",
                  [results / v / "results.jsonl" for v in ("B0", "B4")],
                  tmp_path)
    recs = {("B0", r["scenario_id"]): r for r in map(
        json.loads, (results / "B0" / "results.jsonl").read_text().splitlines())}
    recs.update({("B4", r["scenario_id"]): r for r in map(
        json.loads, (results / "B4" / "results.jsonl").read_text().splitlines())})
    companion = _csv_rows(res["companion"])
    assert len(companion) == len(recs)
    for row in companion:
        rec = recs[(row["variant"], row["scenario_id"])]
        assert float(row["runtime_ms"]) == rec["runtime_ms"]
        assert float(row["mean_visibility"]) == rec["eval"]["mean_visibility"]

    res = _render("compare_bars", [summary / "compare_aggregate.csv"], tmp_path)
    want = _csv_rows(summary / "compare_aggregate.csv")
    got = _csv_rows(res["companion"])
    assert [r["variant"] for r in got] == [r["variant"] for r in want]
    for g, w in zip(got, want):
        for col in ("mean_runtime_s", "mean_visibility", "converged"):
            assert g[col] == w[col]  # verbatim, not just numerically equal

    res = _render("delta_hist", [summary / "compare_deltas.csv"], tmp_path)
    want = [r for r in _csv_rows(summary / "compare_deltas.csv")
            if r["excluded"] != "True" and r["delta_pp"] != ""]
    got = _csv_rows(res["companion"])
    data = [r for r in got if not r["scenario_id"].startswith("__")]
    assert [(r["scenario_id"], r["delta_pp"]) for r in data] == \
        [(r["scenario_id"], r["delta_pp"]) for r in want]
    extras = {r["scenario_id"]: r["delta_pp"] for r in got
              if r["scenario_id"].startswith("__")}
    assert float(extras["__envelope_pp__"]) == -DELTA_ENVELOPE_PP
    assert extras["__worst__"] == min(want, key=lambda r: float(r["delta_pp"]))["delta_pp"]

    res = _render("frame_series",
                  [summary / "compare_deltas.csv",
                   results / "B0" / "results.jsonl",
                   results / "B4" / "results.jsonl"], tmp_path)
    worst_id = min(want, key=lambda r: float(r["delta_pp"]))["scenario_id"]
    frames = {}
    for vid in ("B0", "B4"):
        for r in map(json.loads,
                     (results / vid / "results.jsonl").read_text().splitlines()):
            if r["scenario_id"] == worst_id:
                frames[vid] = r["eval"]["per_frame_visibility"]
    got = _csv_rows(res["companion"])
    assert len(got) == len(frames["B0"])
    for t, row in enumerate(got):
        assert int(row["frame"]) == t
        assert float(row["visibility_base"]) == frames["B0"][t]
        assert float(row["visibility_ours"]) == frames["B4"][t]

    res = _render("ablation_bars", [summary / "ablation.csv"], tmp_path)
    want = _csv_rows(summary / "ablation.csv")
    got = _csv_rows(res["companion"])
    assert [r["variant"] for r in got] == ["B0", "B1", "B2", "B3", "B4"]
    for g, w in zip(got, want):
        for col in ("mean_runtime_s", "converged", "fallbacks", "speedup_vs_B0"):
            assert g[col] == w[col]

    res = _render("tradeoff_scatter", [summary / "sweep.csv"], tmp_path)
    want = _csv_rows(summary / "sweep.csv")
    got = _csv_rows(res["companion"])
    assert len(got) == len(want) == 3  # two swept configs plus the reference
    for g, w in zip(got, want):
        for col in ("rays", "beam", "worst_loss_pp", "speedup_vs_B0"):
            assert g[col] == w[col]


def test_delta_hist_draws_envelope_line_and_worst_marker(tmp_path):
    path = tmp_path / "deltas.csv"
    path.write_text("scenario_id,delta_pp,frame_identical,excluded\n"
                    "a,0.0,True,False\n"
                    "b,0.0,True,False\n"
                    "c,-4.32,False,False\n")
    fig, header, rows = delta_hist([path])
    try:
        ax = fig.axes[0]
        dashed = [ln for ln in ax.lines if ln.get_linestyle() == "--"]
        assert any(ln.get_xdata()[0] == -5.0 for ln in dashed)
        markers = [ln for ln in ax.lines if ln.get_marker() == "v"]
        assert len(markers) == 1
        assert markers[0].get_xdata()[0] == -4.32
    finally:
        import matplotlib.pyplot as plt
        plt.close(fig)
    assert ["__worst__", "-4.32"] in rows


def test_delta_hist_empty_input_is_annotated(tmp_path):
    path = tmp_path / "deltas.csv"
    path.write_text("scenario_id,delta_pp,frame_identical,excluded\n")
    out = render(FigureSpec(kind="delta_hist", inputs=(path,),
                            out=tmp_path / "empty.png"))
    assert Path(out["figure"]).exists()
    assert out["rows"] == [["__envelope_pp__", "-5.0"]]


def test_schema_mismatch_names_offending_column(tmp_path):
    path = tmp_path / "wrong.csv"
    path.write_text("foo,bar\n1,2\n")
    with pytest.raises(SchemaError) as err:
        render(FigureSpec(kind="tradeoff_scatter", inputs=(path,),
                          out=tmp_path / "x.png"))
    assert "rays" in str(err.value)


def test_missing_input_is_rejected(tmp_path):
    with pytest.raises(FileNotFoundError):
        render(FigureSpec(kind="compare_bars",
                          inputs=(tmp_path / "nope.csv",),
                          out=tmp_path / "x.png"))


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(ValueError):
        FigureSpec(kind="pie", inputs=(tmp_path / "a.csv",),
                   out=tmp_path / "x.png")
