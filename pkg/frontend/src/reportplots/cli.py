"""Standalone figure renderer: render --in DIR --out DIR [--coords FILE] [--figs LIST]."""
from __future__ import annotations

import argparse
import sys

from .render import ALL_FIGURES, PlotSpec, RenderError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render", description="Render report figures from plot-ready CSVs"
    )
    parser.add_argument("--in", dest="in_dir", required=True, help="report-data CSV directory")
    parser.add_argument("--out", dest="out_dir", required=True, help="image output directory")
    parser.add_argument("--coords", default=None, help="optional area coordinate CSV (area,x,y)")
    parser.add_argument(
        "--figs", default=None,
        help=f"comma-separated subset of: {','.join(ALL_FIGURES)}",
    )
    parser.add_argument("--format", dest="image_format", default="png")
    parser.add_argument("--layout-seed", type=int, default=0)
    args = parser.parse_args(argv)
    figures = tuple(args.figs.split(",")) if args.figs else ALL_FIGURES
    try:
        spec = PlotSpec(
            in_dir=args.in_dir,
            out_dir=args.out_dir,
            coords_path=args.coords,
            figures=figures,
            image_format=args.image_format,
            layout_seed=args.layout_seed,
        )
        result = render(spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for name, info in result.figures.items():
        print(f"{name}: {info['path']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
