#!/usr/bin/env python3
"""Render the (p, mu) outcome phase diagram: phase.py <sweep.csv> <out.png>"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from ksnbc_plots import FigureSpec, SchemaMismatch, plot_phase  # noqa: E402


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", help="sweep.csv from a sweep directory")
    parser.add_argument("out", help="output image path")
    parser.add_argument("--show-3d-thresholds", action="store_true",
                        help="overlay p = 7/5 (and mu0 if given)")
    parser.add_argument("--mu0", type=float, default=None,
                        help="damping threshold for the horizontal overlay")
    args = parser.parse_args(argv)
    spec = FigureSpec(inputs=(args.csv,), kind="phase-diagram",
                      output=Path(args.out),
                      show_3d_thresholds=args.show_3d_thresholds, mu0=args.mu0)
    try:
        out = plot_phase(args.csv, spec)
    except (SchemaMismatch, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
