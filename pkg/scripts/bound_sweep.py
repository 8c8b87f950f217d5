"""Sweep rectangular (w, h, E) and report how close the Hough tree weight gets to
the weight bound and to the naive count. Ratios below 1 mean the bound holds.

    python scripts/bound_sweep.py --max-w 32 --csv sweep.csv
"""
import argparse
import csv
import sys

from hcf.circuit import circuit_depth, compile_tree
from hcf.grid import ImageDomain
from hcf.treebuilder import build_hough_tree, depth_bound, naive_weight, tree_metrics, weight_bound


def sweep(max_w, step):
    for w in range(2, max_w + 1, step):
        for h in (w // 2 or 1, w, 2 * w):
            for E in sorted({1, max(1, w // 2), w}):
                t = build_hough_tree(ImageDomain(w, h), E)
                m = tree_metrics(t)
                c = compile_tree(t)
                yield {
                    "w": w,
                    "h": h,
                    "E": E,
                    "weight": m.weight,
                    "circuit": c.size,
                    "bound_ratio": round(m.weight / weight_bound(w, h, E), 4),
                    "naive_ratio": round(m.weight / naive_weight(w, h, E), 4),
                    "depth": circuit_depth(c),
                    "depth_bound": depth_bound(w, E),
                }


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-w", type=int, default=32)
    ap.add_argument("--step", type=int, default=3)
    ap.add_argument("--csv", help="write rows here instead of stdout")
    args = ap.parse_args(argv)

    rows = list(sweep(args.max_w, args.step))
    fh = open(args.csv, "w", newline="") if args.csv else sys.stdout
    wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
    wr.writeheader()
    wr.writerows(rows)
    worst = max(rows, key=lambda r: r["bound_ratio"])
    print(f"worst bound ratio {worst['bound_ratio']} at w={worst['w']} h={worst['h']} E={worst['E']}", file=sys.stderr)
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
