"""Command-line entry point for the benchmark harness."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import harness
from .generate import DEFAULT_LENGTH_RANGE, PROFILES


def _beam_value(text: str) -> float:
    if text == "inf":
        return math.inf
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("beam must be positive or 'inf'")
    return v


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=32)
    p.add_argument("--cap", type=int, default=5_000_000)
    p.add_argument("--beam", type=_beam_value, default=2048)
    p.add_argument("--rays", type=int, choices=(1, 3, 5), default=5)
    p.add_argument("--out", type=Path, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="trackplan",
                                 description="offline tracking-planner benchmark harness")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded scenario cohort")
    _add_common(g)
    g.add_argument("--profile", choices=PROFILES, required=True)
    g.add_argument("-n", type=int, required=True)
    g.add_argument("--length-min", type=float, default=DEFAULT_LENGTH_RANGE[0])
    g.add_argument("--length-max", type=float, default=DEFAULT_LENGTH_RANGE[1])

    c = sub.add_parser("compare", help="baseline vs layered planner on a cohort")
    _add_common(c)
    c.add_argument("cohort_dir", type=Path)

    a = sub.add_parser("ablate", help="run the B0-B4 variant matrix")
    _add_common(a)
    a.add_argument("cohort_dir", type=Path)

    s = sub.add_parser("sweep", help="beam-width / ray-count grid")
    _add_common(s)
    s.add_argument("cohort_dir", type=Path)
    s.add_argument("--beams", type=str, default=None,
                   help="comma-separated beam widths (int or 'inf')")
    s.add_argument("--ray-counts", type=str, default=None,
                   help="comma-separated ray counts from {1,3,5}")

    r = sub.add_parser("replay", help="replay an external trajectory")
    r.add_argument("trajectory_file", type=Path)
    r.add_argument("scenario_file", type=Path)
    r.add_argument("--out", type=Path, default=None)

    d = sub.add_parser("report-data", help="recompute summary CSVs from records")
    d.add_argument("cohort_dir", type=Path)
    d.add_argument("--out", type=Path, default=None)

    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            out = args.out or Path("cohort")
            names = harness.cmd_generate(
                args.seed, args.n, args.profile, out,
                (args.length_min, args.length_max))
            print(f"wrote {len(names)} scenarios to {out}")
        elif args.command == "compare":
            block = harness.cmd_compare(
                args.cohort_dir, workers=args.workers, cap=args.cap,
                base_overrides={"beam_width": args.beam,
                                "ray_count": args.rays},
                out_dir=args.out)
            print(json.dumps(block, indent=1))
        elif args.command == "ablate":
            rows = harness.cmd_ablate(
                args.cohort_dir, workers=args.workers,
                base_overrides={"expansion_cap": args.cap,
                                "ray_count": args.rays},
                out_dir=args.out)
            print(json.dumps(rows, indent=1))
        elif args.command == "sweep":
            configs = harness.SWEEP_DEFAULT_CONFIGS
            if args.beams and args.ray_counts:
                beams = [_beam_value(b) for b in args.beams.split(",")]
                rays = [int(r) for r in args.ray_counts.split(",")]
                configs = [(r, b) for r in rays for b in beams]
            rows = harness.cmd_sweep(
                args.cohort_dir, configs=configs, workers=args.workers,
                base_overrides={"expansion_cap": args.cap},
                out_dir=args.out)
            print(json.dumps(rows, indent=1))
        elif args.command == "replay":
            report = harness.cmd_replay(args.trajectory_file, args.scenario_file)
            text = json.dumps(report, indent=1)
            if args.out:
                args.out.write_text(text, encoding="utf-8")
            else:
                print(text)
        elif args.command == "report-data":
            block = harness.cmd_report_data(args.cohort_dir, out_dir=args.out)
            print(json.dumps(block, indent=1))
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
