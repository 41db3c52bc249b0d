"""Command line interface: render one figure from run directories."""

import argparse
import sys

from .figures import KINDS, FigureSpec, render
from .schema import SchemaError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="render",
        description="Render a figure from orbitgrad run directories.",
    )
    p.add_argument("--kind", required=True, choices=KINDS, help="figure kind")
    p.add_argument("--run", required=True, action="append", metavar="DIR",
                   help="input run directory (repeatable)")
    p.add_argument("--out", required=True, metavar="FILE", help="output image path")
    p.add_argument("--ref", metavar="JSON",
                   help="flat metrics JSON drawn as dashed reference lines "
                        "(convergence only)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(kind=args.kind, runs=tuple(args.run), out=args.out,
                          ref=args.ref)
        out = render(spec)
    except (SchemaError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
