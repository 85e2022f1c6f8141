"""plotkit command line: render one figure kind from one CSV.

Exit codes: 0 success, 2 schema/usage error, 4 IO error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import FigureRequest, SchemaError, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plotkit", description=__doc__)
    parser.add_argument(
        "--kind", required=True, choices=("coarse_traj", "fine_traj", "trace")
    )
    parser.add_argument("--in", dest="csv_path", required=True, help="input CSV")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--d", type=int, default=None, help="only this individual")
    parser.add_argument(
        "--t", type=int, default=None, help="coarse step (required for fine_traj)"
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    req = FigureRequest(
        kind=args.kind,
        csv_path=Path(args.csv_path),
        out_path=Path(args.out),
        individual=args.d,
        coarse_step=args.t,
    )
    try:
        for path in render(req):
            print(path)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
