"""Command line entry point.

    softbitq-plots render --kind bler --in k6_float.csv k6_proposed.csv \
        --out bler_k6.png

Exit codes: 0 success, 2 schema mismatch (message lists the missing
columns), 1 any other input problem.
"""

import argparse
import sys

from .figures import KINDS, FigureSpec, render
from .schema import SchemaError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softbitq-plots",
        description="Render experiment CSVs into PNG figures.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure from CSV inputs")
    p.add_argument("--kind", required=True, choices=KINDS,
                   help="which figure to draw")
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   metavar="CSV", help="input CSV file(s), concatenated")
    p.add_argument("--out", required=True, metavar="PNG",
                   help="output image path")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    spec = FigureSpec(kind=args.kind, csv_paths=tuple(args.inputs),
                      out_path=args.out)
    try:
        render(spec)
    except SchemaError as e:
        print(f"schema mismatch: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(str(e), file=sys.stderr)
        return 1
    print(f"wrote {spec.out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
