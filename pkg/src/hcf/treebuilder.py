"""Binary partition trees computing partition-union ensembles.

Two generic builders work on explicit image partitions (greedy pair merging and
the fixed pairwise schedule). The Hough and FHT builders run the fixed
schedule on column partitions only: every node is the shift span of one line
profile over its column partition, and two siblings merge as

    P(parent) = P(left) v P(right) v Eq(f_e1, f_e2)

with e1 the last elevation covered by the left block and e2 = e1 + 1. Image
partitions are materialized on demand.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import grid
from .grid import BaseFunction, ImageDomain
from .partition import (
    Partition,
    common_refinement,
    equality_labels,
    meet_card,
    refines,
    span_partition,
)


class BoundViolation(AssertionError):
    """A proven bound failed: this is a bug, not an input error."""


@dataclass
class TreeNode:
    id: int
    level: int
    index: int
    card: int
    children: list[int] = field(default_factory=list)
    leaf: int | None = None
    pset: Partition | None = None
    span: int | None = None
    cover: tuple[int, int] | None = None


class PartitionTree:
    """Rooted binary tree of partitions, root = finest partition of the domain.

    ``partition(i)`` gives the node's partition of the full domain. Span trees
    keep only ``pset`` and ``span`` per node and build it lazily.
    """

    def __init__(self, size: int, domain: ImageDomain | None = None, tables=None):
        self.size = size
        self.domain = domain
        self.tables = tables
        self.nodes: list[TreeNode] = []
        self.root: int | None = None
        self.leaves: list[int] = []
        self._parts: dict[int, Partition] = {}

    def add(self, level, index, card, children=(), **kw) -> TreeNode:
        node = TreeNode(len(self.nodes), level, index, card, list(children), **kw)
        self.nodes.append(node)
        return node

    def set_partition(self, node_id: int, part: Partition):
        self._parts[node_id] = part

    @property
    def is_span_tree(self) -> bool:
        return self.tables is not None

    def partition(self, node_id: int) -> Partition:
        part = self._parts.get(node_id)
        if part is None:
            node = self.nodes[node_id]
            if node_id == self.root:
                part = Partition.finest(self.size)
            else:
                part = span_partition(self.domain, self.tables[node.span], node.pset)
            if self.is_span_tree and node_id != self.root:
                return part
            self._parts[node_id] = part
        return part

    def parent_map(self) -> dict[int, int]:
        return {c: n.id for n in self.nodes for c in n.children}

    def depth_map(self) -> dict[int, int]:
        depth = {self.root: 0}
        stack = [self.root]
        while stack:
            u = stack.pop()
            for c in self.nodes[u].children:
                depth[c] = depth[u] + 1
                stack.append(c)
        return depth

    @property
    def depth(self) -> int:
        return max(self.depth_map().values())

    def edges(self):
        for n in self.nodes:
            for c in n.children:
                yield n.id, c

    def leaf_labels(self, leaf: int) -> list[tuple]:
        """Output names for the members of input partition ``leaf``."""
        node = self.nodes[self.leaves[leaf]]
        if self.is_span_tree:
            # f(0) = 0 for every profile, so member s of a leaf is the line with shift s
            return [(node.span, s) for s in range(node.card)]
        return [(leaf, j) for j in range(node.card)]

    def to_json(self) -> dict:
        out = []
        for n in self.nodes:
            d = {"id": n.id, "level": n.level, "index": n.index, "card": n.card, "children": n.children}
            if n.leaf is not None:
                d["leaf"] = n.leaf
            if n.pset is not None:
                d["pset"] = n.pset.to_json()
            if n.span is not None:
                d["span"] = n.span
            if n.cover is not None:
                d["cover"] = list(n.cover)
            out.append(d)
        meta = {"size": self.size, "root": self.root, "leaves": self.leaves, "nodes": out}
        if self.domain is not None:
            meta["w"], meta["h"] = self.domain.w, self.domain.h
        return meta

    def to_dot(self) -> str:
        lines = ["digraph tree {", "  rankdir=LR;"]
        for n in self.nodes:
            if n.id == self.root:
                label = f"U* ({n.card})"
            elif n.leaf is not None:
                label = f"L{n.leaf} ({n.card})"
            else:
                label = f"L^{n.level}_{n.index} ({n.card})"
            lines.append(f'  n{n.id} [label="{label}"];')
        for a, b in self.edges():
            w = self.nodes[a].card - self.nodes[b].card
            lines.append(f'  n{a} -> n{b} [label="{w}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _check_inputs(inputs):
    if not inputs:
        raise ValueError("need at least one input partition")
    n = inputs[0].n
    if any(p.n != n for p in inputs):
        raise ValueError("input partitions live on different domains")
    if len(set(inputs)) != len(inputs):
        raise ValueError("input partitions must be distinct")
    return n


def _attach_root(tree: PartitionTree, top: int):
    root = tree.add(-1, 0, tree.size, [top])
    tree.root = root.id
    tree.set_partition(root.id, Partition.finest(tree.size))


def build_tree_greedy(inputs: list[Partition]) -> PartitionTree:
    """Merge the pair with the smallest common refinement until one is left.

    Ties go to the pair of oldest nodes (input order first, merged nodes after).
    """
    n = _check_inputs(inputs)
    tree = PartitionTree(n)
    parts: dict[int, Partition] = {}
    for i, p in enumerate(inputs):
        node = tree.add(0, i, p.card, leaf=i)
        tree.set_partition(node.id, p)
        tree.leaves.append(node.id)
        parts[node.id] = p
    heap = []
    ids = list(parts)
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            heapq.heappush(heap, (meet_card(parts[ids[a]], parts[ids[b]]), ids[a], ids[b]))
    merges = 0
    while len(parts) > 1:
        c, a, b = heapq.heappop(heap)
        if a not in parts or b not in parts:
            continue
        pa, pb = parts.pop(a), parts.pop(b)
        merged = common_refinement(pa, pb)
        lvl = max(tree.nodes[a].level, tree.nodes[b].level) + 1
        node = tree.add(lvl, merges, merged.card, [a, b])
        merges += 1
        tree.set_partition(node.id, merged)
        for other, q in parts.items():
            heapq.heappush(heap, (meet_card(q, merged), other, node.id))
        parts[node.id] = merged
    _attach_root(tree, next(iter(parts)))
    return tree


def fixed_schedule(m: int):
    """Yield ``(k, i, children)`` for every non-leaf node of the fixed schedule."""
    prev = m
    k = 1
    while prev > 1:
        i = 0
        while 2 * i + 1 < prev:
            yield k, i, (2 * i, 2 * i + 1)
            i += 1
        if 2 * i < prev:
            yield k, i, (2 * i,)
            i += 1
        prev = i
        k += 1


def level_counts(m: int) -> tuple[list[int], list[int]]:
    """Node counts and two-children counts per level (k >= 1) of the fixed schedule."""
    nodes: dict[int, int] = {}
    pairs: dict[int, int] = {}
    for k, _, ch in fixed_schedule(m):
        nodes[k] = nodes.get(k, 0) + 1
        pairs[k] = pairs.get(k, 0) + (len(ch) == 2)
    ks = sorted(nodes)
    return [nodes[k] for k in ks], [pairs[k] for k in ks]


def build_tree_fixed(inputs: list[Partition]) -> PartitionTree:
    n = _check_inputs(inputs)
    tree = PartitionTree(n)
    level = []
    for i, p in enumerate(inputs):
        node = tree.add(0, i, p.card, leaf=i)
        tree.set_partition(node.id, p)
        tree.leaves.append(node.id)
        level.append(node.id)
    nxt: list[int] = []
    cur_k = 1
    for k, i, ch in fixed_schedule(len(inputs)):
        if k != cur_k:
            level, nxt, cur_k = nxt, [], k
        kids = [level[c] for c in ch]
        if len(kids) == 2:
            part = common_refinement(tree.partition(kids[0]), tree.partition(kids[1]))
        else:
            part = tree.partition(kids[0])
        node = tree.add(k, i, part.card, kids)
        tree.set_partition(node.id, part)
        nxt.append(node.id)
    top = nxt[0] if nxt else level[0]
    _attach_root(tree, top)
    return tree


def pset_bound(k: int, w: int) -> int:
    """min(2^(2^k - 1), w): cap on the column-partition size at level k."""
    if k >= 7:
        return w
    return min(1 << ((1 << k) - 1), w)


def build_span_tree(domain: ImageDomain, tables: list[BaseFunction], *, check_eq24: bool = False) -> PartitionTree:
    """Fixed-schedule tree over the shift orbits of the given line profiles.

    Only column partitions are computed; the image partition of a node is the
    shift span of its ``span`` profile over its ``pset``.
    """
    if not tables:
        raise ValueError("need at least one line profile")
    w, h = domain.w, domain.h
    tree = PartitionTree(domain.size, domain, tables)
    whole = Partition.whole(w)
    level = []
    for e in range(len(tables)):
        node = tree.add(0, e, h, leaf=e, pset=whole, span=e, cover=(e, e))
        tree.leaves.append(node.id)
        level.append(node.id)
    nxt: list[int] = []
    cur_k = 1
    for k, i, ch in fixed_schedule(len(tables)):
        if k != cur_k:
            level, nxt, cur_k = nxt, [], k
        kids = [tree.nodes[level[c]] for c in ch]
        if len(kids) == 2:
            left, right = kids
            e1 = left.cover[1]
            e2 = right.cover[0]
            eq = equality_labels(tables[e1].values, tables[e2].values, h)
            pset = common_refinement(common_refinement(left.pset, right.pset), eq)
            cover = (left.cover[0], right.cover[1])
        else:
            pset = kids[0].pset
            cover = kids[0].cover
        if check_eq24 and pset.card > pset_bound(k, w):
            raise BoundViolation(f"|P^{k}_{i}| = {pset.card} exceeds {pset_bound(k, w)}")
        node = tree.add(k, i, h * pset.card, [c.id for c in kids], pset=pset, span=cover[0], cover=cover)
        nxt.append(node.id)
    top = nxt[0] if nxt else level[0]
    _attach_root(tree, top)
    return tree


def build_hough_tree(domain: ImageDomain, E: int) -> PartitionTree:
    if domain.w < 2:
        raise ValueError("the Hough ensemble needs w >= 2")
    if E < 1:
        raise ValueError("need at least one elevation")
    tables = [grid.base_function(e, domain) for e in range(E)]
    return build_span_tree(domain, tables, check_eq24=True)


def build_fht_tree(n: int) -> PartitionTree:
    from .oracle import fht_tables

    domain = ImageDomain(n, n)
    return build_span_tree(domain, fht_tables(n))


def edge_depth(parent: Partition, child: Partition) -> int:
    """ceil(log2 of the largest number of parent classes inside a child class)."""
    pairs = np.unique(child.labels * parent.card + parent.labels)
    per_child = np.bincount(pairs // parent.card, minlength=child.card)
    return math.ceil(math.log2(int(per_child.max())))


@dataclass(frozen=True)
class TreeMetrics:
    weight: int
    closed_form: int
    comp_depth: int
    level_cards: tuple[int, ...]
    depth: int


def _edge_depth_node(tree: PartitionTree, parent: int, child: int) -> int:
    if tree.is_span_tree:
        c = tree.nodes[child].pset
        if parent == tree.root:
            return math.ceil(math.log2(int(c.class_sizes().max())))
        return edge_depth(tree.nodes[parent].pset, c)
    return edge_depth(tree.partition(parent), tree.partition(child))


def tree_metrics(tree: PartitionTree) -> TreeMetrics:
    nodes = tree.nodes
    weight = sum(nodes[a].card - nodes[b].card for a, b in tree.edges())
    doubles = sum(n.card for n in nodes if len(n.children) == 2)
    closed = tree.size + doubles - sum(nodes[i].card for i in tree.leaves)
    if weight != closed:
        raise BoundViolation(f"edge-sum weight {weight} != closed form {closed}")
    depth = tree.depth_map()
    seg: dict[int, int] = {}
    for a, b in tree.edges():
        d = _edge_depth_node(tree, a, b)
        seg[depth[b]] = max(seg.get(depth[b], 0), d)
    levels: dict[int, int] = {}
    for n in nodes:
        if n.id == tree.root:
            continue
        c = n.pset.card if n.pset is not None else n.card
        levels[n.level] = max(levels.get(n.level, 0), c)
    return TreeMetrics(
        weight=weight,
        closed_form=closed,
        comp_depth=sum(seg.values()),
        level_cards=tuple(levels[k] for k in sorted(levels)),
        depth=max(depth.values()),
    )


def weight_bound(w: int, h: int, E: int) -> float:
    return 4 * w * h * E / (math.log2(w) + 1) * (1 + math.sqrt(2 / w)) + h * (w - E)


def depth_bound(w: int, E: int) -> float:
    # ceil on log2(w): a single line over w columns already needs ceil(log2 w) levels
    return math.ceil(math.log2(w)) * (math.ceil(math.log2(E)) + 1)


def naive_weight(w: int, h: int, E: int) -> int:
    return E * h * (w - 1)


@dataclass(frozen=True)
class BoundReport:
    weight: int
    weight_bound: float
    naive: int
    comp_depth: int
    depth_bound: float
    level_cards: tuple[int, ...]
    n_lines: int

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def check_bounds(tree: PartitionTree, domain: ImageDomain, E: int) -> BoundReport:
    m = tree_metrics(tree)
    w, h = domain.w, domain.h
    rhs = weight_bound(w, h, E)
    if not m.weight < rhs:
        raise BoundViolation(f"tree weight {m.weight} is not below {rhs}")
    if m.weight > naive_weight(w, h, E):
        raise BoundViolation(f"tree weight {m.weight} exceeds the trivial {naive_weight(w, h, E)}")
    dbound = depth_bound(w, E)
    if m.comp_depth > dbound + 1e-9:
        raise BoundViolation(f"computation depth {m.comp_depth} exceeds {dbound}")
    for n in tree.nodes:
        if n.pset is not None and n.pset.card > pset_bound(n.level, w):
            raise BoundViolation(f"|P^{n.level}_{n.index}| = {n.pset.card} exceeds {pset_bound(n.level, w)}")
    lines = {tuple((v + s) % h for v in tree.tables[e].values) for e in range(E) for s in range(h)}
    if len(lines) > E * h:
        raise BoundViolation("more distinct lines than E*h")
    return BoundReport(m.weight, rhs, naive_weight(w, h, E), m.comp_depth, dbound, m.level_cards, len(lines))


def check_tree(tree: PartitionTree):
    """Every edge refines and the leaves carry the inputs; raises on failure."""
    for a, b in tree.edges():
        if not refines(tree.partition(a), tree.partition(b)):
            raise BoundViolation(f"edge {a}->{b} is not a refinement")
    kids = sum(len(n.children) == 2 for n in tree.nodes)
    if len(tree.leaves) != kids + 1:
        raise BoundViolation("leaf count is not two-children count plus one")


def save_tree(tree: PartitionTree, path):
    with open(path, "w") as fh:
        json.dump(tree.to_json(), fh)
