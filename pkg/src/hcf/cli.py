"""Command-line front end.

Subcommands: ``synth``, ``verify``, ``eval``, ``bench``, ``export``.

Images are read as PGM (P2 or P5) or CSV of integers. File row ``r`` is image
row ``y = r`` (row 0 is the bottom row y = 0) and file column ``c`` is ``x = c``.

Exit codes: 0 ok, 1 usage or bad input, 2 verification mismatch, 3 internal
invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import oracle
from .circuit import (
    Circuit,
    DecompositionError,
    circuit_depth,
    compile_tree,
    evaluate_batch,
    load_circuit,
    prune,
    save_circuit,
)
from .grid import ImageDomain, base_function, bits_of
from .partition import Partition, span_partition
from .treebuilder import (
    BoundViolation,
    PartitionTree,
    build_fht_tree,
    build_hough_tree,
    build_tree_greedy,
    depth_bound,
    weight_bound,
    naive_weight,
    tree_metrics,
)

EXIT_USAGE, EXIT_MISMATCH, EXIT_INTERNAL = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _size_flags(p):
    p.add_argument("--kind", choices=("hough", "fht", "segment"), default="hough")
    p.add_argument("-w", type=int, help="image width")
    p.add_argument("-h", type=int, dest="height", help="image height")
    p.add_argument("-E", type=int, help="number of elevations")
    p.add_argument("-n", type=int, help="square size (fht, segment, or w=h=E)")
    p.add_argument("--builder", choices=("fixed", "greedy"), default="fixed")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hcf", description="Hough summation-circuit synthesis")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", add_help=False, help="build a circuit and report metrics")
    p.add_argument("--help", action="help")
    _size_flags(p)
    p.add_argument("--out", help="circuit output path (metrics go next to it)")
    p.add_argument("--format", choices=("json", "dot"), default="json")

    p = sub.add_parser("verify", add_help=False, help="check a circuit against direct sums")
    p.add_argument("--help", action="help")
    p.add_argument("circuit")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("eval", add_help=False, help="run a circuit on an image")
    p.add_argument("--help", action="help")
    p.add_argument("circuit")
    p.add_argument("--image", required=True)
    p.add_argument("--naive", action="store_true", help="sum directly instead of running the circuit")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv",), default="csv")

    p = sub.add_parser("bench", add_help=False, help="size table across n")
    p.add_argument("--help", action="help")
    p.add_argument("--kind", choices=("hough", "fht"), default="hough")
    p.add_argument("--sizes", default="4,8,16,32")
    p.add_argument("--builder", choices=("fixed", "greedy"), default="fixed")
    p.add_argument("--format", choices=("csv", "md"), default="md")
    p.add_argument("--out")

    p = sub.add_parser("export", add_help=False, help="DOT graph of a circuit or tree JSON")
    p.add_argument("--help", action="help")
    p.add_argument("input")
    p.add_argument("--out")
    p.add_argument("--format", choices=("dot",), default="dot")
    return ap


@dataclass(frozen=True)
class RunConfig:
    """Validated ensemble choice for synth: ``n`` is set for fht and segment."""

    kind: str
    w: int
    h: int
    E: int
    n: int | None = None
    builder: str = "fixed"

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        kind, builder = args.kind, getattr(args, "builder", "fixed")
        if kind in ("fht", "segment"):
            n = args.n
            if n is None:
                raise UsageError(f"--kind {kind} needs -n")
            if any(v is not None for v in (args.w, args.height, args.E)):
                raise UsageError(f"--kind {kind} takes -n only")
            if kind == "fht" and (n < 2 or n & (n - 1)):
                raise UsageError("-n must be a power of two >= 2 for fht")
            if kind == "segment" and n < 2:
                raise UsageError("-n must be >= 2 for segment")
            h = n if kind == "fht" else 2 * n
            return cls(kind, n, h, n, n, builder)
        n = args.n
        w = args.w if args.w is not None else n
        h = args.height if args.height is not None else n
        E = args.E if args.E is not None else n
        if None in (w, h, E):
            raise UsageError("--kind hough needs -w, -h, -E (or -n)")
        if w < 2 or h < 1 or E < 1:
            raise UsageError("need w >= 2, h >= 1, E >= 1")
        return cls("hough", w, h, E, None, builder)

    def size(self) -> dict:
        if self.n is not None:
            return {"kind": self.kind, "n": self.n}
        return {"kind": self.kind, "w": self.w, "h": self.h, "E": self.E}


def hough_partitions(domain: ImageDomain, tables) -> list[Partition]:
    whole = Partition.whole(domain.w)
    return [span_partition(domain, f, whole) for f in tables]


def make_tree(kind: str, w: int, h: int, E: int, builder: str) -> PartitionTree:
    domain = ImageDomain(w, h)
    if kind == "fht":
        if builder == "fixed":
            return build_fht_tree(w)
        tables = oracle.fht_tables(w)
    else:
        if builder == "fixed":
            return build_hough_tree(domain, E)
        tables = [base_function(e, domain) for e in range(E)]
    tree = build_tree_greedy(hough_partitions(domain, tables))
    tree.domain = domain
    return tree


def synthesize(size: dict, builder: str = "fixed") -> tuple[Circuit, dict, PartitionTree]:
    kind = size["kind"]
    if kind == "hough":
        w, h, E = size["w"], size["h"], size["E"]
    elif kind == "fht":
        w = h = E = size["n"]
    else:
        w, h, E = size["n"], 2 * size["n"], size["n"]
    tree = make_tree(kind, w, h, E, builder)
    m = tree_metrics(tree)
    circuit = compile_tree(tree)
    if circuit.size + circuit.shared_hits != m.weight:
        raise BoundViolation(
            f"circuit size {circuit.size} + shared {circuit.shared_hits} != tree weight {m.weight}"
        )
    metrics = {
        "kind": kind,
        "builder": builder,
        "w": w,
        "h": h,
        "E": E,
        "tree_weight": m.weight,
        "comp_depth": m.comp_depth,
        "level_cards": list(m.level_cards),
        "shared_hits": circuit.shared_hits,
        "naive_size": naive_weight(w, h, E),
        "eq27_rhs": weight_bound(w, h, E),
        "depth_bound": depth_bound(w, E),
    }
    if kind == "segment":
        seg = oracle.segment_ensemble(size["n"])
        metrics["unpruned_size"] = circuit.size
        renamed = {key: circuit.outputs[cyc] for key, cyc in seg.cyclic.items()}
        circuit = Circuit(circuit.w, circuit.h, circuit.inputs, circuit.adders, renamed, circuit.shared_hits)
        circuit = prune(circuit, seg.zero_mask)
    metrics["circuit_size"] = circuit.size
    metrics["circuit_depth"] = circuit_depth(circuit)
    circuit.meta = dict(size, builder=builder)
    return circuit, metrics, tree


def patterns_for(meta: dict) -> tuple[dict, int]:
    """Output name -> pixel mask on the circuit's domain, plus the zero-pad mask."""
    kind = meta.get("kind")
    if kind == "hough":
        domain = ImageDomain(meta["w"], meta["h"])
        tables = [base_function(e, domain) for e in range(meta["E"])]
        return oracle.hough_lines(domain, tables), 0
    if kind == "fht":
        n = meta["n"]
        return oracle.hough_lines(ImageDomain(n, n), oracle.fht_tables(n)), 0
    if kind == "segment":
        n = meta["n"]
        seg = oracle.segment_ensemble(n)
        small = ImageDomain(n, n)
        pats = {}
        for key, m in seg.segments.items():
            pats[key] = sum(1 << seg.domain.index(*small.pixel(i)) for i in bits_of(m))
        return pats, seg.zero_mask
    raise ValueError("circuit JSON carries no known ensemble kind")


def read_image(path: str) -> np.ndarray:
    """Image file -> array indexed [x, y]."""
    raw = Path(path).read_bytes()
    if raw[:2] in (b"P2", b"P5"):
        rows = _read_pgm(raw)
    else:
        text = raw.decode()
        rows = np.array([[int(v) for v in r] for r in csv.reader(io.StringIO(text)) if r], dtype=np.int64)
    return rows.T.copy()


def _read_pgm(raw: bytes) -> np.ndarray:
    magic = raw[:2]
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while raw[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(int(raw[start:pos]))
    width, height, maxval = tokens
    if magic == b"P2":
        vals = [int(t) for t in raw[pos:].split()]
        arr = np.array(vals[: width * height], dtype=np.int64)
    else:
        pos += 1
        dtype = np.uint8 if maxval < 256 else ">u2"
        arr = np.frombuffer(raw[pos:], dtype=dtype, count=width * height).astype(np.int64)
    if arr.size != width * height:
        raise ValueError("truncated PGM")
    return arr.reshape(height, width)


def _write(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_synth(args) -> int:
    cfg = RunConfig.from_args(args)
    circuit, metrics, tree = synthesize(cfg.size(), cfg.builder)
    if args.out:
        out = Path(args.out)
        if args.format == "dot":
            out.write_text(circuit.to_dot())
        else:
            save_circuit(circuit, out)
        out.with_suffix(".metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
        out.with_suffix(".tree.json").write_text(json.dumps(tree.to_json(), sort_keys=True) + "\n")
    elif args.format == "dot":
        sys.stdout.write(circuit.to_dot())
        return 0
    sys.stdout.write(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_verify(args) -> int:
    circuit = _load(args.circuit)
    patterns, zero = patterns_for(circuit.meta)
    report = oracle.verify_circuit(circuit, patterns, args.trials, args.seed, mask=zero)
    _write(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n", args.out)
    return 0 if report.ok else EXIT_MISMATCH


def _load(path) -> Circuit:
    try:
        return load_circuit(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read circuit {path}: {exc}") from exc


def cmd_eval(args) -> int:
    circuit = _load(args.circuit)
    img = read_image(args.image)
    meta = circuit.meta
    if meta.get("kind") == "segment":
        n = meta["n"]
        if img.shape != (n, n):
            raise UsageError(f"image is {img.shape[0]}x{img.shape[1]}, circuit expects {n}x{n}")
        img = oracle.segment_ensemble(n).embed_image(img)
    if img.shape != (circuit.w, circuit.h):
        raise UsageError(f"image is {img.shape[0]}x{img.shape[1]}, circuit expects {circuit.w}x{circuit.h}")
    flat = img.reshape(1, -1)
    if args.naive:
        patterns, _ = patterns_for(meta)
        sums = {k: int(v[0]) for k, v in oracle.naive_hough(flat, patterns).sums.items()}
    else:
        sums = {k: int(v[0]) for k, v in evaluate_batch(circuit, flat).items()}
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["elevation", "shift", "sum"])
    for (e, s), v in sorted(sums.items()):
        wr.writerow([e, s, v])
    _write(buf.getvalue(), args.out)
    return 0


def bench_rows(kind: str, sizes, builder: str = "fixed") -> list[dict]:
    rows = []
    for n in sizes:
        t0 = time.perf_counter()
        circuit, m, _ = synthesize({"kind": kind, "n": n} if kind == "fht" else {"kind": "hough", "w": n, "h": n, "E": n}, builder)
        rows.append(
            {
                "n": n,
                "naive": m["naive_size"],
                "tree_weight": m["tree_weight"],
                "circuit_size": m["circuit_size"],
                "eq27_rhs": round(m["eq27_rhs"], 2),
                "circuit_depth": m["circuit_depth"],
                "seconds": round(time.perf_counter() - t0, 3),
            }
        )
    return rows


def format_table(rows: list[dict], fmt: str) -> str:
    cols = list(rows[0]) if rows else []
    if fmt == "csv":
        buf = io.StringIO()
        wr = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        wr.writeheader()
        wr.writerows(rows)
        return buf.getvalue()
    lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    for r in rows:
        lines.append("| " + " | ".join(str(r[c]) for c in cols) + " |")
    return "\n".join(lines) + "\n"


def cmd_bench(args) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s]
    except ValueError as exc:
        raise UsageError(f"bad --sizes: {args.sizes}") from exc
    if any(n < 2 for n in sizes) or (args.kind == "fht" and any(n & (n - 1) for n in sizes)):
        raise UsageError("sizes must be >= 2 (powers of two for fht)")
    _write(format_table(bench_rows(args.kind, sizes, args.builder), args.format), args.out)
    return 0


def cmd_export(args) -> int:
    try:
        data = json.loads(Path(args.input).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from exc
    if isinstance(data, dict) and "adders" in data:
        dot = Circuit.from_json(data).to_dot()
    elif isinstance(data, dict) and "nodes" in data:
        dot = tree_json_to_dot(data)
    else:
        raise UsageError(f"{args.input} is neither a circuit nor a tree")
    _write(dot, args.out)
    return 0


def tree_json_to_dot(d: dict) -> str:
    lines = ["digraph tree {", "  rankdir=LR;"]
    cards = {n["id"]: n["card"] for n in d["nodes"]}
    for n in d["nodes"]:
        label = "U*" if n["id"] == d["root"] else (f"L{n['leaf']}" if "leaf" in n else f"L^{n['level']}_{n['index']}")
        lines.append(f'  n{n["id"]} [label="{label} ({n["card"]})"];')
    for n in d["nodes"]:
        for c in n["children"]:
            lines.append(f'  n{n["id"]} -> n{c} [label="{cards[n["id"]] - cards[c]}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


COMMANDS = {"synth": cmd_synth, "verify": cmd_verify, "eval": cmd_eval, "bench": cmd_bench, "export": cmd_export}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"hcf: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BoundViolation, DecompositionError) as exc:
        print(f"hcf: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValueError as exc:
        print(f"hcf: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
