"""Rebuild the abalone subset (rings 8-10 normal, rings 3 and 21 anomalous)
in UCI abalone.data layout from the KEEL imbalanced-benchmark partitions.

usage: python3 abalone_from_keel.py KEEL_DIR OUT_FILE
"""
import collections
import pathlib
import sys


def rows(path, cls):
    out = []
    for line in pathlib.Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("@"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if parts[-1] == cls:
            out.append((parts[0],) + tuple(float(v) for v in parts[1:-1]))
    return out


def main(keel, out):
    keel = pathlib.Path(keel)
    normal = rows(keel / "abalone-20_vs_8-9-10.dat", "negative")
    ring8 = collections.Counter(rows(keel / "abalone-21_vs_8.dat", "negative"))
    ring9 = collections.Counter(rows(keel / "abalone9-18.dat", "negative"))
    lines = []
    for r in normal:
        if ring8[r] > 0:
            ring8[r] -= 1
            rings = 8
        elif ring9[r] > 0:
            ring9[r] -= 1
            rings = 9
        else:
            rings = 10
        lines.append((r, rings))
    lines += [(r, 3) for r in rows(keel / "abalone-3_vs_11.dat", "positive")]
    lines += [(r, 21) for r in rows(keel / "abalone-21_vs_8.dat", "positive")]
    with open(out, "w") as f:
        for r, rings in lines:
            f.write(",".join([r[0]] + [repr(v) for v in r[1:]] + [str(rings)]) + "\n")
    print(f"{len(lines)} rows written to {out}", file=sys.stderr)


if __name__ == "__main__":
    main(*sys.argv[1:3])
