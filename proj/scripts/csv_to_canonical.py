#!/usr/bin/env python3
"""Convert joint-position tables to canonical JSON.

Input is one frame per row with m * 3 numbers (x1, y1, z1, x2, ...), comma or
whitespace separated; a non-numeric first row is skipped as a header. This is
the shape most motion-capture exporters produce, e.g. CMU mocap clips run
through forward kinematics (31 joints, layout cmu-31).

    csv_to_canonical.py --layout cmu-31 --joints 31 --label 4 walk_01.csv > walk_01.json
"""

import argparse
import json
import sys
from pathlib import Path


def parse_row(line):
    return [float(v) for v in line.replace(",", " ").split()]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("input", type=Path)
    ap.add_argument("--layout", required=True, help="built-in layout name, e.g. cmu-31")
    ap.add_argument("--joints", required=True, type=int)
    ap.add_argument("--label", type=int)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply every coordinate")
    args = ap.parse_args()

    frames = []
    for line_no, line in enumerate(args.input.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            values = parse_row(line)
        except ValueError:
            if frames or line_no > 1:
                raise SystemExit(f"{args.input}:{line_no}: not a number row")
            continue
        if len(values) != 3 * args.joints:
            raise SystemExit(f"{args.input}:{line_no}: expected {3 * args.joints} numbers, got {len(values)}")
        frames.append([[args.scale * v for v in values[3 * j:3 * j + 3]] for j in range(args.joints)])
    if not frames:
        raise SystemExit(f"{args.input}: no frames")

    json.dump({"layout": args.layout, "label": args.label, "frames": frames}, sys.stdout)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
