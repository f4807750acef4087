"""``plot-hho`` command line: ``conv`` for convergence plots, ``fields``
for stream/pressure/difference maps, ``enrich`` for enrichment maps."""

from __future__ import annotations

import argparse
import sys

from .figures import plot_convergence, plot_enrichment_map, plot_fields


def _build_parser():
    ap = argparse.ArgumentParser(prog="plot-hho")
    sub = ap.add_subparsers(dest="command", required=True)

    conv = sub.add_parser("conv", help="log-log error vs DOFs from .dat tables")
    conv.add_argument("tables", nargs="+")
    conv.add_argument("--labels", help="comma-separated legend labels")
    conv.add_argument("--y", default="EnergyError", help="error column to plot")
    conv.add_argument("--x", default="DOFs")
    conv.add_argument("--slope", type=float, help="slope triangle value")
    conv.add_argument("--title")
    conv.add_argument("--out", default="convergence.png")

    fields = sub.add_parser("fields", help="stream/pressure plots from a field dump")
    fields.add_argument("dump")
    fields.add_argument("--diff", help="second dump for difference maps")
    fields.add_argument("--out", default="fields", help="output path prefix")

    enr = sub.add_parser("enrich", help="enrichment-dimension map")
    enr.add_argument("map")
    enr.add_argument("--out", default="enrichment.png")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "conv":
            labels = args.labels.split(",") if args.labels else None
            out = plot_convergence(
                args.tables,
                labels=labels,
                x_column=args.x,
                y_column=args.y,
                slope=args.slope,
                out_path=args.out,
                title=args.title,
            )
            print(f"wrote {out}")
        elif args.command == "fields":
            for path in plot_fields(args.dump, other_path=args.diff, out_prefix=args.out):
                print(f"wrote {path}")
        else:
            print(f"wrote {plot_enrichment_map(args.map, out_path=args.out)}")
        return 0
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
