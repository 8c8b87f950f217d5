"""Computation chains and fanin-2 summation circuits.

Circuit node ids are topological: ``0..len(inputs)-1`` are pixel inputs, adder
``k`` is node ``len(inputs) + k``. Adders are ordered by (depth, creation), so
each depth level is a contiguous slice and can be evaluated in one numpy step.
"""
from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .grid import ImageDomain, bits_of
from .partition import Ensemble, Partition, refines
from .treebuilder import PartitionTree, edge_depth

log = logging.getLogger(__name__)

MAX_ABS_INPUT = 2**31


class DecompositionError(ValueError):
    pass


@dataclass
class ChainEntry:
    partition: Partition
    source: tuple[int, int] | None = None  # (level, position) of a refining partition
    leaf: int | None = None
    node: int | None = None


@dataclass
class ComputationChain:
    """Levels of partitions; level t adds new partitions built from levels < t.

    The cumulative ensemble R_t is the union of all partitions in levels 0..t.
    """

    levels: list[list[ChainEntry]]
    labels: dict[int, list[tuple]] = field(default_factory=dict)  # leaf -> member names
    domain: ImageDomain | None = None

    def cumulative(self, t: int) -> list[Partition]:
        return [e.partition for lvl in self.levels[: t + 1] for e in lvl]

    def ensemble(self, t: int) -> Ensemble:
        size = self.levels[0][0].partition.n
        return Ensemble.of(size, (m for p in self.cumulative(t) for m in p.masks))

    def _source(self, t: int, entry: ChainEntry) -> Partition:
        if entry.source is not None:
            lvl, pos = entry.source
            return self.levels[lvl][pos].partition
        best = None
        for p in self.cumulative(t - 1):
            if refines(p, entry.partition) and (best is None or p.card < best.card):
                best = p
        if best is None:
            raise DecompositionError("no earlier partition refines a chain member")
        return best

    def segments(self):
        for t in range(1, len(self.levels)):
            for entry in self.levels[t]:
                yield t, entry, self._source(t, entry)

    @property
    def weight(self) -> int:
        return sum(src.card - e.partition.card for _, e, src in self.segments())

    @property
    def depth(self) -> int:
        seg: dict[int, int] = {}
        for t, e, src in self.segments():
            seg[t] = max(seg.get(t, 0), edge_depth(src, e.partition))
        return sum(seg.values())


def chain_of_tree(tree: PartitionTree) -> ComputationChain:
    depth = tree.depth_map()
    parent = tree.parent_map()
    order = sorted(depth, key=lambda i: (depth[i], i))
    levels: list[list[ChainEntry]] = [[] for _ in range(max(depth.values()) + 1)]
    where: dict[int, tuple[int, int]] = {}
    leaf_of = {nid: j for j, nid in enumerate(tree.leaves)}
    for nid in order:
        t = depth[nid]
        src = where[parent[nid]] if nid in parent else None
        entry = ChainEntry(tree.partition(nid), src, leaf_of.get(nid), nid)
        where[nid] = (t, len(levels[t]))
        levels[t].append(entry)
    labels = {j: tree.leaf_labels(j) for j in range(len(tree.leaves))}
    return ComputationChain(levels, labels, tree.domain)


@dataclass
class Circuit:
    w: int
    h: int
    inputs: list[int]
    adders: list[tuple[int, int]]
    outputs: dict  # name -> node id, -1 for the constant zero
    shared_hits: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.adders)

    @property
    def n_nodes(self) -> int:
        return len(self.inputs) + len(self.adders)

    def node_depths(self) -> np.ndarray:
        d = np.zeros(self.n_nodes, dtype=np.int64)
        base = len(self.inputs)
        for k, (a, b) in enumerate(self.adders):
            d[base + k] = max(d[a], d[b]) + 1
        return d

    def node_masks(self) -> list[int]:
        masks = [1 << p for p in self.inputs]
        for a, b in self.adders:
            masks.append(masks[a] | masks[b])
        return masks

    def to_json(self) -> dict:
        return {
            "w": self.w,
            "h": self.h,
            "inputs": list(self.inputs),
            "adders": [list(a) for a in self.adders],
            "outputs": {_key_str(k): v for k, v in self.outputs.items()},
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Circuit":
        try:
            c = cls(
                int(d["w"]),
                int(d["h"]),
                [int(i) for i in d["inputs"]],
                [(int(a), int(b)) for a, b in d["adders"]],
                {_key_parse(k): int(v) for k, v in d["outputs"].items()},
                meta=d.get("meta", {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed circuit JSON: {exc}") from exc
        c.validate()
        return c

    def validate(self):
        base = len(self.inputs)
        for k, (a, b) in enumerate(self.adders):
            if not (0 <= a < base + k and 0 <= b < base + k):
                raise ValueError(f"adder {k} is not in topological order")
        for name, v in self.outputs.items():
            if not (-1 <= v < self.n_nodes):
                raise ValueError(f"output {name!r} points outside the circuit")

    def to_dot(self) -> str:
        """One DOT node per circuit node; output names go into node labels."""
        names: dict[int, list[str]] = {}
        for name, v in sorted(self.outputs.items(), key=lambda kv: _key_str(kv[0])):
            names.setdefault(v, []).append(_key_str(name))

        def label(nid, text):
            if nid in names:
                text += "\\n" + " ".join(f"[{n}]" for n in names[nid])
            return text

        lines = ["digraph circuit {", "  rankdir=LR;"]
        for i, p in enumerate(self.inputs):
            x, y = divmod(p, self.h)
            lines.append(f'  n{i} [shape=box,label="{label(i, f"p({x},{y})")}"];')
        base = len(self.inputs)
        for k, (a, b) in enumerate(self.adders):
            nid = base + k
            lines.append(f'  n{nid} [shape=circle,label="{label(nid, "+")}"];')
            lines.append(f"  n{a} -> n{nid};")
            lines.append(f"  n{b} -> n{nid};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _key_str(k) -> str:
    return ",".join(str(v) for v in k) if isinstance(k, tuple) else str(k)


def _key_parse(s: str):
    parts = s.split(",")
    try:
        vals = tuple(int(p) for p in parts)
    except ValueError:
        return s
    return vals if len(vals) > 1 else vals[0]


class _Builder:
    """Adder DAG with global sharing of identical pixel sets."""

    def __init__(self, n_inputs: int):
        self.masks = [1 << i for i in range(n_inputs)]
        self.depth = [0] * n_inputs
        self.by_mask = {m: i for i, m in enumerate(self.masks)}
        self.adders: list[tuple[int, int]] = []
        self.n_inputs = n_inputs
        self.hits = 0

    def add(self, a: int, b: int) -> int:
        if self.masks[a] & self.masks[b]:
            raise DecompositionError("adder operands overlap")
        m = self.masks[a] | self.masks[b]
        hit = self.by_mask.get(m)
        if hit is not None:
            self.hits += 1
            return hit
        nid = len(self.masks)
        self.masks.append(m)
        self.depth.append(max(self.depth[a], self.depth[b]) + 1)
        self.adders.append((a, b))
        self.by_mask[m] = nid
        return nid

    def sum_of(self, operands: list[int]) -> int:
        # shallowest pair first: depth ceil(log2 n) above the deepest operand at worst
        heap = [(self.depth[o], j, o) for j, o in enumerate(operands)]
        heapq.heapify(heap)
        j = len(heap)
        while len(heap) > 1:
            _, _, a = heapq.heappop(heap)
            _, _, b = heapq.heappop(heap)
            c = self.add(a, b)
            heapq.heappush(heap, (self.depth[c], j, c))
            j += 1
        return heap[0][2]

    def finish(self, w: int, h: int, outputs: dict) -> Circuit:
        base = self.n_inputs
        order = sorted(range(len(self.adders)), key=lambda k: (self.depth[base + k], k))
        remap = list(range(base)) + [0] * len(self.adders)
        for new, old in enumerate(order):
            remap[base + old] = base + new
        adders = [(remap[self.adders[k][0]], remap[self.adders[k][1]]) for k in order]
        outs = {name: remap[v] for name, v in outputs.items()}
        return Circuit(w, h, list(range(base)), adders, outs, self.hits)


def compile_chain(chain: ComputationChain) -> Circuit:
    """One shared adder tree per chain member, built over its source decomposition."""
    root = chain.levels[0][0].partition
    n = root.n
    if root.card != n:
        raise DecompositionError("a chain starts at the finest partition")
    b = _Builder(n)
    class_nodes: dict[tuple[int, int], np.ndarray] = {(0, 0): np.arange(n)}
    for t in range(1, len(chain.levels)):
        for pos, entry in enumerate(chain.levels[t]):
            if entry.source is not None:
                src_at = entry.source
            else:
                src_part = chain._source(t, entry)
                src_at = next(
                    (lv, p)
                    for lv in range(t)
                    for p, e in enumerate(chain.levels[lv])
                    if e.partition is src_part
                )
            src = chain.levels[src_at[0]][src_at[1]].partition
            part = entry.partition
            if part.card == src.card:
                if part != src:
                    raise DecompositionError("same-size source is not the same partition")
                class_nodes[(t, pos)] = class_nodes[src_at]
                continue
            pairs = np.unique(part.labels * src.card + src.labels)
            child, parent = pairs // src.card, pairs % src.card
            if np.unique(parent).size != src.card:
                raise DecompositionError("source does not refine the chain member")
            src_nodes = class_nodes[src_at]
            cuts = np.flatnonzero(np.diff(child)) + 1
            nodes = np.empty(part.card, dtype=np.int64)
            for c, grp in zip(child[np.r_[0, cuts]], np.split(parent, cuts)):
                nodes[c] = b.sum_of(src_nodes[grp].tolist())
            class_nodes[(t, pos)] = nodes
    outputs = {}
    for t, lvl in enumerate(chain.levels):
        for pos, entry in enumerate(lvl):
            if entry.leaf is None:
                continue
            names = chain.labels.get(entry.leaf) or [(entry.leaf, j) for j in range(entry.partition.card)]
            for j, name in enumerate(names):
                outputs[name] = int(class_nodes[(t, pos)][j])
    w, h = (chain.domain.w, chain.domain.h) if chain.domain is not None else (n, 1)
    circuit = b.finish(w, h, outputs)
    if b.hits:
        log.info("hash sharing saved %d adders below the chain weight", b.hits)
    return circuit


def compile(chain: ComputationChain) -> Circuit:  # noqa: A001 - public name
    return compile_chain(chain)


def compile_tree(tree: PartitionTree) -> Circuit:
    return compile_chain(chain_of_tree(tree))


def circuit_depth(c: Circuit) -> int:
    if not c.adders:
        return 0
    return int(c.node_depths().max())


def _levels(c: Circuit) -> list[slice]:
    d = c.node_depths()[len(c.inputs):]
    cuts = np.flatnonzero(np.diff(d)) + 1
    starts = np.r_[0, cuts]
    ends = np.r_[cuts, len(d)]
    base = len(c.inputs)
    return [slice(base + s, base + e) for s, e in zip(starts, ends)] if len(d) else []


def evaluate_batch(c: Circuit, imgs: np.ndarray) -> dict:
    """Outputs for a batch of flat images ``[B, w*h]``; values are ``[B]`` arrays."""
    imgs = np.asarray(imgs, dtype=np.int64)
    if imgs.ndim != 2 or imgs.shape[1] != c.w * c.h:
        raise ValueError(f"images must be [B, {c.w * c.h}], got {imgs.shape}")
    if imgs.size and np.abs(imgs).max() > MAX_ABS_INPUT // (c.w * c.h):
        raise ValueError("pixel values too large for exact 64-bit accumulation")
    vals = np.zeros((c.n_nodes, imgs.shape[0]), dtype=np.int64)
    vals[: len(c.inputs)] = imgs[:, c.inputs].T
    if c.adders:
        ad = np.asarray(c.adders, dtype=np.int64)
        base = len(c.inputs)
        for sl in _levels(c):
            a = ad[sl.start - base: sl.stop - base]
            vals[sl] = vals[a[:, 0]] + vals[a[:, 1]]
    zero = np.zeros(imgs.shape[0], dtype=np.int64)
    return {name: (vals[v] if v >= 0 else zero) for name, v in c.outputs.items()}


def evaluate(c: Circuit, img: np.ndarray) -> dict:
    """Output sums for one ``[x, y]`` image (or a flat pixel vector)."""
    img = np.asarray(img, dtype=np.int64)
    if img.ndim == 2:
        if img.shape != (c.w, c.h):
            raise ValueError(f"image shape {img.shape} does not match {c.w}x{c.h}")
        img = img.reshape(-1)
    out = evaluate_batch(c, img[None, :])
    return {k: int(v[0]) for k, v in out.items()}


def prune(c: Circuit, zero_mask) -> Circuit:
    """Drop inputs known to be zero and every adder that depends only on them.

    ``zero_mask`` is a pixel bitmask or a collection of ``(x, y)`` pixels.
    """
    if not isinstance(zero_mask, int):
        zero_mask = sum(1 << (x * c.h + y) for x, y in set(zero_mask))
    zero = set(bits_of(zero_mask))
    b_inputs = [p for p in c.inputs if p not in zero]
    new_id: list[int] = []  # old node -> new node, -1 for constant zero
    pos = {p: j for j, p in enumerate(b_inputs)}
    for p in c.inputs:
        new_id.append(pos.get(p, -1))
    adders: list[tuple[int, int]] = []
    base = len(b_inputs)
    for a, b in c.adders:
        na, nb = new_id[a], new_id[b]
        if na < 0:
            new_id.append(nb)
        elif nb < 0:
            new_id.append(na)
        else:
            adders.append((na, nb))
            new_id.append(base + len(adders) - 1)
    outputs = {name: (new_id[v] if v >= 0 else -1) for name, v in c.outputs.items()}
    pruned = Circuit(c.w, c.h, b_inputs, adders, outputs, c.shared_hits, dict(c.meta))
    return _drop_dead(pruned)


def _drop_dead(c: Circuit) -> Circuit:
    """Remove adders no output depends on and restore (depth, id) order."""
    base = len(c.inputs)
    live = np.zeros(c.n_nodes, dtype=bool)
    for v in c.outputs.values():
        if v >= 0:
            live[v] = True
    for k in range(len(c.adders) - 1, -1, -1):
        if live[base + k]:
            a, b = c.adders[k]
            live[a] = live[b] = True
    depth = c.node_depths()
    keep = sorted((k for k in range(len(c.adders)) if live[base + k]), key=lambda k: (depth[base + k], k))
    remap = list(range(base)) + [-1] * len(c.adders)
    for new, old in enumerate(keep):
        remap[base + old] = base + new
    adders = [(remap[c.adders[k][0]], remap[c.adders[k][1]]) for k in keep]
    outputs = {n: (remap[v] if v >= 0 else -1) for n, v in c.outputs.items()}
    return Circuit(c.w, c.h, c.inputs, adders, outputs, c.shared_hits, c.meta)


def save_circuit(c: Circuit, path):
    with open(path, "w") as fh:
        json.dump(c.to_json(), fh, sort_keys=True)


def load_circuit(path) -> Circuit:
    with open(path) as fh:
        return Circuit.from_json(json.load(fh))
