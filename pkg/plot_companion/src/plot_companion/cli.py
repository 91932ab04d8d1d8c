"""Command line interface: `netplot snapshot` and `netplot convergence`."""

from __future__ import annotations

import argparse
import sys

from .csvio import ColumnError, read_convergence, read_snapshots
from .figures import plot_convergence, plot_snapshot


def _cmd_snapshot(args) -> int:
    rows = read_snapshots(args.input)
    oracle_rows = read_snapshots(args.oracle) if args.oracle else None
    t_sel = plot_snapshot(rows, args.t, args.output, oracle_rows=oracle_rows)
    print(f"wrote {args.output} (t = {t_sel:g})")
    return 0


def _cmd_convergence(args) -> int:
    levels = read_convergence(args.input)
    slope = plot_convergence(levels, args.output)
    print(f"levels: {len(levels)}")
    print(f"fitted slope: {slope:.4f}")
    print(f"wrote {args.output}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netplot", description="Render figures from netadvect CSV outputs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("snapshot", help="per-edge solution curves at one time")
    p.add_argument("--input", required=True, help="snapshots.csv from a solver run")
    p.add_argument("--output", required=True, help="image file to write")
    p.add_argument("--t", type=float, required=True, help="time to plot (nearest stored step)")
    p.add_argument("--oracle", default=None,
                   help="optional oracle.csv (same schema) overlaid as the exact solution")
    p.set_defaults(func=_cmd_snapshot)

    p = sub.add_parser("convergence", help="log-log error vs mesh size")
    p.add_argument("--input", required=True, help="convergence.csv from a refinement study")
    p.add_argument("--output", required=True, help="image file to write")
    p.set_defaults(func=_cmd_convergence)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ColumnError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
