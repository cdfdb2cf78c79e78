"""Command line front end: tablefigs render --kind <kind> --in <csv> --out <img>."""

from __future__ import annotations

import argparse
import sys

from .render import KIND_COLUMNS, FigureSpec, SchemaMismatch, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tablefigs", description="Render figures from opquery CSV tables."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    pr = sub.add_parser("render", help="render one figure from one CSV")
    pr.add_argument("--kind", required=True, choices=sorted(KIND_COLUMNS))
    pr.add_argument("--in", dest="input_csv", required=True, metavar="CSV")
    pr.add_argument("--out", dest="output_image", required=True, metavar="IMG")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        input_csv=args.input_csv, kind=args.kind, output_image=args.output_image
    )
    try:
        render(spec)
    except SchemaMismatch as exc:
        print(f"tablefigs: SchemaMismatch: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"tablefigs: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.output_image}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
