"""`resetcorr-plot render <job-file>`: render one job to PNG and SVG."""

from __future__ import annotations

import argparse
import sys

from .jobs import load_job
from .render import render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="resetcorr-plot",
                                     description="figure generation from result files")
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="render a plot-job file")
    p_render.add_argument("job")
    args = parser.parse_args(argv)

    try:
        job = load_job(args.job)
        result = render(job)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    stats = {k: v for k, v in result.items() if k not in ("png", "svg")}
    print(f"wrote {result['png']} and {result['svg']} {stats}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
