#!/usr/bin/env python3
"""Rebuild the UCI splice-junction file layout from the copy bundled in keel-ds.

The keel-ds wheel ships the 3190 UCI splice records as comma-separated
nucleotides followed by the class. The original instance names are not
included, so each record gets the placeholder name KEEL-<row>.

usage: pip download --no-deps keel-ds -d /tmp/keel
       python3 scripts/splice_from_keel.py /tmp/keel/keel_ds-*.whl data/splice.data
"""
import sys
import zipfile

MEMBER = "keel_ds/data/balanced/raw/splice.dat"


def main(wheel, out):
    raw = zipfile.ZipFile(wheel).read(MEMBER).decode("ascii")
    rows = []
    for i, line in enumerate(raw.splitlines(), start=1):
        fields = [f.strip() for f in line.split(",")]
        if not line.strip() or line.startswith("@"):
            continue
        label, seq = fields[-1], "".join(fields[:-1])
        rows.append(f"{label},  KEEL-{i:04d},  {seq}")
    with open(out, "w", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")
    print(f"wrote {len(rows)} records to {out}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
