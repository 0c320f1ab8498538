"""Command-line entry: plot <kind> --in DIR --out FILE."""

from __future__ import annotations

import argparse
import sys

from .contract import FIGURE_KINDS, PlotContractError, PlotJob
from .render import render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render a figure from a sparsecl run or sweep directory",
    )
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("--in", dest="input_dir", required=True,
                        help="run or sweep output directory")
    parser.add_argument("--out", dest="output_path", required=True,
                        help="image file to write (extension picks the format)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = PlotJob(input_dir=args.input_dir, kind=args.kind,
                  output_path=args.output_path)
    try:
        render(job)
    except PlotContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.output_path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
