"""render-figures: batch-render the 12-chart grid from a results directory."""

from __future__ import annotations

import argparse
import sys

from .render import MissingScenario, SchemaMismatch, render_all


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="render-figures",
        description="Render blocked/established/utilization charts from "
        "bamsim timeseries.csv results.",
    )
    parser.add_argument("--in", dest="results", required=True, help="results directory")
    parser.add_argument("--out", dest="out", required=True, help="figures directory")
    parser.add_argument("--format", choices=("png", "svg"), default="png")
    parser.add_argument(
        "--per-window",
        action="store_true",
        help="plot per-bin request counts instead of cumulative curves",
    )
    args = parser.parse_args(argv)
    try:
        written = render_all(
            args.results, args.out, image_format=args.format, per_window=args.per_window
        )
    except (SchemaMismatch, MissingScenario, OSError) as exc:
        print(f"render-figures: error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
