"""Figure builders over the harness output schemas.

Every builder returns ``(figure, header, rows)`` where the rows are exactly
the numbers drawn on the figure, taken verbatim from the input files; the
renderer writes them as the figure's companion CSV.  Nothing here recomputes
planner math — files produced by the benchmark harness are the single source
of numeric truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .io import SchemaError, read_csv, read_jsonl, write_csv  # noqa: E402

FIGURE_KINDS = ("runtime_dist", "compare_bars", "delta_hist", "frame_series",
                "ablation_bars", "tradeoff_scatter")

# dashed reference line drawn on delta histograms: the 5 pp loss envelope
DELTA_ENVELOPE_PP = 5.0

_RESULT_FIELDS = ("scenario_id", "variant_id", "converged", "runtime_ms",
                  "eval")


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[Path, ...]
    out: Path
    title: str | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; expected one of {FIGURE_KINDS}")
        if not self.inputs:
            raise ValueError("at least one input file is required")


def _profile_of(scenario_id: str) -> str:
    return scenario_id.rsplit("-", 2)[0]


def _new_axes(title: str | None, default: str):
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.set_title(title or default)
    return fig, ax


# -- builders -----------------------------------------------------------------

def runtime_dist(inputs, title=None):
    """Per-profile runtime and visibility distributions from results JSONL."""
    header = ["variant", "profile", "scenario_id", "runtime_ms",
              "mean_visibility"]
    rows = []
    by_variant: dict[str, list[float]] = {}
    for path in inputs:
        for rec in read_jsonl(path, _RESULT_FIELDS):
            vid = str(rec["variant_id"])
            rows.append([vid, _profile_of(rec["scenario_id"]),
                         rec["scenario_id"], rec["runtime_ms"],
                         rec["eval"]["mean_visibility"]])
            by_variant.setdefault(vid, []).append(rec["runtime_ms"])
    fig, ax = _new_axes(title, "planner runtime distribution")
    labels = sorted(by_variant)
    ax.boxplot([by_variant[v] for v in labels], tick_labels=labels, whis=(0, 100))
    ax.set_ylabel("runtime [ms]")
    ax.set_yscale("log")
    return fig, header, rows


def compare_bars(inputs, title=None):
    """Mean runtime and visibility per variant from compare_aggregate.csv."""
    table = read_csv(inputs[0], ("variant", "mean_runtime_s",
                                 "mean_visibility", "converged"))
    header = ["variant", "mean_runtime_s", "mean_visibility", "converged"]
    rows = [[r[c] for c in header] for r in table]
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 4.0))
    fig.suptitle(title or "baseline vs layered planner")
    variants = [r[0] for r in rows]
    axes[0].bar(variants, [float(r[1]) for r in rows])
    axes[0].set_ylabel("mean runtime [s]")
    axes[1].bar(variants, [float(r[2]) for r in rows])
    axes[1].set_ylabel("mean visibility")
    axes[1].set_ylim(0.0, 1.0)
    return fig, header, rows


def delta_hist(inputs, title=None):
    """Visibility-delta histogram from compare_deltas.csv.

    Draws the dashed 5 pp loss-envelope reference line and marks the
    worst-case (most negative) delta taken verbatim from the input.
    """
    table = read_csv(inputs[0], ("scenario_id", "delta_pp", "excluded"))
    kept = [r for r in table
            if r["excluded"] != "True" and r["delta_pp"] != ""]
    header = ["scenario_id", "delta_pp"]
    rows = [[r["scenario_id"], r["delta_pp"]] for r in kept]
    fig, ax = _new_axes(title, "per-scenario visibility delta")
    ax.set_xlabel("visibility delta [pp]")
    ax.set_ylabel("scenarios")
    if kept:
        values = [float(r["delta_pp"]) for r in kept]
        ax.hist(values, bins=21)
        worst = min(kept, key=lambda r: float(r["delta_pp"]))
        ax.plot([float(worst["delta_pp"])], [0.0], marker="v", markersize=10,
                clip_on=False, label=f"worst {worst['delta_pp']} pp")
        rows.append(["__worst__", worst["delta_pp"]])
        ax.legend()
    else:
        ax.annotate("no comparable pairs", xy=(0.5, 0.5),
                    xycoords="axes fraction", ha="center")
    ax.axvline(-DELTA_ENVELOPE_PP, linestyle="--", color="gray")
    rows.append(["__envelope_pp__", str(-DELTA_ENVELOPE_PP)])
    return fig, header, rows


def frame_series(inputs, title=None):
    """Per-frame visibility traces for the worst-delta scenario.

    Inputs: compare_deltas.csv, base results.jsonl, ours results.jsonl.
    """
    if len(inputs) != 3:
        raise ValueError("frame_series needs deltas CSV plus two results files")
    deltas = read_csv(inputs[0], ("scenario_id", "delta_pp", "excluded"))
    kept = [r for r in deltas
            if r["excluded"] != "True" and r["delta_pp"] != ""]
    if not kept:
        raise ValueError(f"{inputs[0]}: no comparable scenario pairs")
    worst_id = min(kept, key=lambda r: float(r["delta_pp"]))["scenario_id"]

    def _frames(path):
        for rec in read_jsonl(path, _RESULT_FIELDS):
            if rec["scenario_id"] == worst_id:
                return rec["eval"]["per_frame_visibility"]
        raise ValueError(f"{path}: scenario {worst_id!r} not found")

    base = _frames(inputs[1])
    ours = _frames(inputs[2])
    header = ["frame", "visibility_base", "visibility_ours"]
    rows = [[t, b, o] for t, (b, o) in enumerate(zip(base, ours))]
    fig, ax = _new_axes(title, f"per-frame visibility: {worst_id}")
    ax.plot(range(len(base)), base, label="baseline", drawstyle="steps-post")
    ax.plot(range(len(ours)), ours, label="layered", drawstyle="steps-post")
    ax.set_xlabel("frame")
    ax.set_ylabel("visibility")
    ax.set_ylim(-0.05, 1.05)
    ax.legend()
    return fig, header, rows


def ablation_bars(inputs, title=None):
    """Variant-matrix mean runtimes from ablation.csv."""
    table = read_csv(inputs[0], ("variant", "mean_runtime_s", "converged",
                                 "fallbacks", "speedup_vs_B0"))
    header = ["variant", "mean_runtime_s", "converged", "fallbacks",
              "speedup_vs_B0"]
    rows = [[r[c] for c in header] for r in table]
    fig, ax = _new_axes(title, "variant-matrix mean runtime")
    ax.bar([r[0] for r in rows], [float(r[1]) for r in rows])
    ax.set_ylabel("mean runtime [s]")
    ax.set_yscale("log")
    for r in rows:
        ax.annotate(f"{float(r[4]):.1f}x", xy=(r[0], float(r[1])),
                    ha="center", va="bottom")
    return fig, header, rows


def tradeoff_scatter(inputs, title=None):
    """Speed-quality trade-off from sweep.csv: one labeled point per config."""
    table = read_csv(inputs[0], ("rays", "beam", "worst_loss_pp",
                                 "speedup_vs_B0"))
    header = ["rays", "beam", "worst_loss_pp", "speedup_vs_B0"]
    rows = [[r[c] for c in header] for r in table]
    fig, ax = _new_axes(title, "speed vs worst-case visibility loss")
    for rays, beam, loss, speedup in rows:
        ax.scatter([float(speedup)], [float(loss)])
        ax.annotate(f"r{rays}/b{beam}", xy=(float(speedup), float(loss)),
                    xytext=(4, 4), textcoords="offset points")
    ax.set_xlabel("speedup vs baseline")
    ax.set_ylabel("worst-case loss [pp]")
    ax.axhline(0.0, color="gray", linewidth=0.6)
    return fig, header, rows


_BUILDERS = {
    "runtime_dist": runtime_dist,
    "compare_bars": compare_bars,
    "delta_hist": delta_hist,
    "frame_series": frame_series,
    "ablation_bars": ablation_bars,
    "tradeoff_scatter": tradeoff_scatter,
}


def render(spec: FigureSpec) -> dict:
    """Build one figure; write the image plus its companion CSV.

    Returns the output paths and the companion table for callers that want
    to assert on the plotted numbers.
    """
    for path in spec.inputs:
        if not Path(path).exists():
            raise FileNotFoundError(path)
    fig, header, rows = _BUILDERS[spec.kind](
        [Path(p) for p in spec.inputs], spec.title)
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    plt.close(fig)
    companion = out.with_suffix(".csv")
    write_csv(companion, header, rows)
    return {"figure": str(out), "companion": str(companion),
            "header": header, "rows": rows}
