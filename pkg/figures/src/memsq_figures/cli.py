"""figures <kind> --in ... --out ...: render memsq outputs to SVG."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .readers import SchemaError
from .render import KINDS, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figures",
        description="Render memsq CSV/JSON outputs into deterministic SVG figures",
    )
    parser.add_argument("--version", action="version", version=f"figures {__version__}")
    parser.add_argument("kind", choices=KINDS, help="figure kind")
    parser.add_argument("--in", dest="in_path", required=True,
                        help="run directory, similarity.csv, or sweep store.jsonl")
    parser.add_argument("--out", required=True, help="output SVG path")
    parser.add_argument("--bounds", help="bounds.csv for the phase diagram overlays")
    parser.add_argument("--manifest", help="manifest.json for guide levels")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        render(args.kind, args.in_path, args.out, bounds=args.bounds,
               manifest=args.manifest)
    except SchemaError as exc:
        print(f"figures: {exc}", file=sys.stderr)
        return 2
    print(f"figures: wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
