"""``plot --spec spec.json``: render one figure from analysis outputs."""

from __future__ import annotations

import argparse
import sys

from .readers import InputFormatError
from .specs import PlotSpecError, load_spec
from .render import render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render a figure (correlation heatmap, SNR curve, or "
                    "peak slices) from twinimg CSV/JSON outputs.")
    parser.add_argument("--spec", required=True, help="plot specification JSON")
    args = parser.parse_args(argv)
    try:
        path = render(load_spec(args.spec))
    except (PlotSpecError, InputFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
