"""Figure CLI.

    bhfigures render --spec spec.json
    bhfigures phase-diagram --csv phase_diagram.csv --out fig.png
    bhfigures dispersion --csv spectrum.csv --out fig.png
    bhfigures response-map --csv response.csv --out fig.png [--column A]
                           [--omega-star W]
    bhfigures cut --csv phase_diagram.csv --out fig.png [--x J]
"""

from __future__ import annotations

import argparse
import sys

from .csvio import SchemaError
from .render import FigureSpec, load_spec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bhfigures",
                                     description="Render figures from simulation CSVs")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("render", help="render from a JSON figure spec")
    sp.add_argument("--spec", required=True)

    for cmd, kind in (("phase-diagram", "phase_heatmap"),
                      ("dispersion", "dispersion"),
                      ("response-map", "response_map"),
                      ("cut", "observable_cut")):
        sp = sub.add_parser(cmd, help=f"render a {kind} figure")
        sp.add_argument("--csv", required=True)
        sp.add_argument("--out", required=True)
        sp.add_argument("--column", default="", help="value column (response/heatmap)")
        sp.add_argument("--x", default="", help="x column (cuts)")
        sp.add_argument("--omega-star", type=float, default=None,
                        help="reference frequency line (response maps)")
        sp.set_defaults(kind=kind)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "render":
            spec = load_spec(args.spec)
        else:
            spec = FigureSpec(kind=args.kind, csv=args.csv, out=args.out,
                              value_column=args.column, x_column=args.x,
                              omega_star=args.omega_star)
        info = render(spec)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(info.path)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
