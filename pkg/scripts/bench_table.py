"""Circuit sizes for the Hough and FHT ensembles against the naive count and the
weight bound. Writes a markdown table to stdout (or --out).

    python scripts/bench_table.py --sizes 4,8,16,32,64
"""
import argparse
import sys

from hcf.cli import bench_rows, format_table


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="4,8,16,32,64")
    ap.add_argument("--builder", choices=("fixed", "greedy"), default="fixed")
    ap.add_argument("--format", choices=("md", "csv"), default="md")
    ap.add_argument("--out")
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]

    chunks = []
    for kind in ("hough", "fht"):
        use = [n for n in sizes if kind != "fht" or n & (n - 1) == 0]
        rows = bench_rows(kind, use, args.builder)
        chunks.append(f"## {kind}\n\n" + format_table(rows, args.format))
    text = "\n".join(chunks)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
