#!/usr/bin/env python3
"""Render the six-panel monitor figure: series.py <series.csv> <out.png>"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from ksnbc_plots import FigureSpec, SchemaMismatch, plot_series  # noqa: E402


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", help="series.csv from a run directory")
    parser.add_argument("out", help="output image path")
    parser.add_argument("--log-y", action="store_true")
    args = parser.parse_args(argv)
    spec = FigureSpec(inputs=(args.csv,), kind="series-panel",
                      output=Path(args.out), log_y=args.log_y)
    try:
        out = plot_series(args.csv, spec)
    except (SchemaMismatch, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
