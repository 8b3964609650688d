"""Command-line entry point: render one figure from harness outputs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FIGURE_KINDS, FigureSpec, render
from .io import SchemaError


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="trackplan-report",
        description="build paper-style figures from trackplan harness outputs")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("render", help="render one figure plus its companion CSV")
    r.add_argument("--kind", choices=FIGURE_KINDS, required=True)
    r.add_argument("--in", dest="inputs", type=Path, nargs="+", required=True,
                   help="harness CSV/JSONL input file(s)")
    r.add_argument("--out", type=Path, required=True,
                   help="output image path; the companion CSV lands beside it")
    r.add_argument("--title", default=None)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(kind=args.kind, inputs=tuple(args.inputs),
                      out=args.out, title=args.title)
    try:
        result = render(spec)
    except (SchemaError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result['figure']} and {result['companion']}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
