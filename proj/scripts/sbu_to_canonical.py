#!/usr/bin/env python3
"""Convert SBU Kinect Interaction skeleton files to canonical JSON.

Each skeleton_pos.txt holds one frame per line: the frame number followed by
15 joints x (x, y, z) for the first person and then for the second. Every
input file becomes two canonical documents (one per person) and one manifest
record listing both, so the pair is scored as one record.

    sbu_to_canonical.py --root SBU --out sbu_canonical
"""

import argparse
import json
import re
from pathlib import Path

JOINTS = 15


def denormalize(x, y, z):
    # Inverse of the normalisation shipped with the dataset.
    return 1280 - x * 2560, 960 - y * 1920, z * 10000 / 7.8125


def read_people(path, raw):
    people = ([], [])
    for line_no, line in enumerate(path.read_text().splitlines(), 1):
        values = [float(v) for v in line.replace(",", " ").split()]
        if not values:
            continue
        if len(values) != 1 + 2 * 3 * JOINTS:
            raise SystemExit(f"{path}:{line_no}: expected {1 + 6 * JOINTS} numbers, got {len(values)}")
        coords = values[1:]
        for p in range(2):
            frame = []
            for j in range(JOINTS):
                x, y, z = coords[(p * JOINTS + j) * 3:(p * JOINTS + j) * 3 + 3]
                frame.append(list((x, y, z) if raw else denormalize(x, y, z)))
            people[p].append(frame)
    return people


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--root", required=True, type=Path, help="extracted dataset (s01s02/01/001/skeleton_pos.txt ...)")
    ap.add_argument("--out", required=True, type=Path)
    ap.add_argument("--raw", action="store_true", help="keep the normalised coordinates")
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    records = []
    for path in sorted(args.root.rglob("skeleton_pos.txt")):
        rel = path.relative_to(args.root).parts
        pair = next((p for p in rel if re.fullmatch(r"s\d\ds\d\d", p)), None)
        action = next((int(p) for p in rel if re.fullmatch(r"\d\d", p)), None)
        if pair is None or action is None:
            raise SystemExit(f"{path}: cannot find the subject pair and action folders")
        label = action - 1
        stem = "_".join(p for p in rel[:-1])
        names = []
        for p, frames in enumerate(read_people(path, args.raw)):
            name = f"{stem}_p{p + 1}.json"
            doc = {"layout": "sbu-15", "label": label, "frames": frames}
            (args.out / name).write_text(json.dumps(doc))
            names.append(name)
        subject = int(pair[1:3])
        records.append(f"{names[0]}|{names[1]}, {label}, {subject}, -")

    manifest = ["class_count = 8", "layout = sbu-15"] + records
    (args.out / "manifest.txt").write_text("\n".join(manifest) + "\n")
    print(f"wrote {len(records)} records to {args.out}")


if __name__ == "__main__":
    main()
