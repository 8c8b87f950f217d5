"""Ensembles and partitions of a finite domain ``{0, ..., n-1}``.

A :class:`Partition` is stored as a label array: ``labels[u]`` is the class of
element ``u``. Labels are canonical (classes numbered by their smallest
element), so two partitions are equal iff their label arrays are.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .grid import BaseFunction, ImageDomain, bits_of, mask_of


class NotARefinement(ValueError):
    pass


class NotCombinable(ValueError):
    pass


def _canonical(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size == 0:
        return labels.astype(np.int64)
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inv.reshape(-1)]


class Partition:
    """Partition of ``range(n)`` with canonical member order."""

    def __init__(self, labels, *, canonical: bool = False):
        lab = np.asarray(labels, dtype=np.int64) if canonical else _canonical(labels)
        lab.setflags(write=False)
        self.labels = lab
        self.card = int(lab.max()) + 1 if lab.size else 0
        self._key = None

    @classmethod
    def finest(cls, n: int) -> "Partition":
        return cls(np.arange(n), canonical=True)

    @classmethod
    def whole(cls, n: int) -> "Partition":
        return cls(np.zeros(n, dtype=np.int64), canonical=True)

    @classmethod
    def from_masks(cls, n: int, masks: Iterable[int]) -> "Partition":
        lab = np.full(n, -1, dtype=np.int64)
        for j, m in enumerate(masks):
            if m == 0:
                raise ValueError("partition members must be non-empty")
            idx = bits_of(m)
            if idx[-1] >= n:
                raise ValueError("member outside the domain")
            if (lab[idx] >= 0).any():
                raise ValueError("partition members overlap")
            lab[idx] = j
        if (lab < 0).any():
            raise ValueError("members do not cover the domain")
        return cls(lab)

    @classmethod
    def from_json(cls, n: int, classes: Sequence[Sequence[int]]) -> "Partition":
        return cls.from_masks(n, (mask_of(c) for c in classes))

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def key(self) -> bytes:
        if self._key is None:
            self._key = self.labels.tobytes()
        return self._key

    def __len__(self) -> int:
        return self.card

    def __eq__(self, other) -> bool:
        return isinstance(other, Partition) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        return f"Partition(n={self.n}, card={self.card})"

    def classes(self) -> list[np.ndarray]:
        """Member index arrays, in canonical order."""
        order = np.argsort(self.labels, kind="stable")
        cuts = np.cumsum(np.bincount(self.labels, minlength=self.card))[:-1]
        return np.split(order, cuts)

    @cached_property
    def masks(self) -> tuple[int, ...]:
        return tuple(mask_of(c.tolist()) for c in self.classes())

    def class_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.card)

    def to_json(self) -> list[list[int]]:
        return [c.tolist() for c in self.classes()]


@dataclass(frozen=True)
class Ensemble:
    """Non-empty collection of distinct non-empty patterns on ``range(size)``."""

    size: int
    patterns: tuple[int, ...]

    def __post_init__(self):
        if not self.patterns:
            raise ValueError("an ensemble is non-empty")
        full = (1 << self.size) - 1
        for p in self.patterns:
            if p == 0:
                raise ValueError("ensemble members must be non-empty")
            if p & ~full:
                raise ValueError("ensemble member outside the domain")

    @classmethod
    def of(cls, size: int, patterns: Iterable[int]) -> "Ensemble":
        uniq = sorted(set(patterns), key=lambda m: ((m & -m).bit_length(), m))
        return cls(size, tuple(uniq))

    def __len__(self) -> int:
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)

    @property
    def support(self) -> int:
        s = 0
        for p in self.patterns:
            s |= p
        return s


def is_partition(ens: Ensemble) -> bool:
    seen = 0
    for p in ens.patterns:
        if seen & p:
            return False
        seen |= p
    return seen == (1 << ens.size) - 1


def as_ensemble(p: Partition) -> Ensemble:
    return Ensemble(p.n, p.masks)


def _same_domain(a: Partition, b: Partition):
    if a.n != b.n:
        raise ValueError(f"domain mismatch: {a.n} vs {b.n}")


def refines(a: Partition, b: Partition) -> bool:
    """True iff every member of ``a`` lies inside one member of ``b``."""
    _same_domain(a, b)
    if a.card < b.card:
        return False
    _, first = np.unique(a.labels, return_index=True)
    target = b.labels[first]
    return bool(np.array_equal(target[a.labels], b.labels))


def common_refinement(a: Partition, b: Partition) -> Partition:
    _same_domain(a, b)
    return Partition(a.labels * b.card + b.labels)


def meet_card(a: Partition, b: Partition) -> int:
    """``|a v b|`` without building the canonical result."""
    _same_domain(a, b)
    return int(np.unique(a.labels * b.card + b.labels).size)


def refinement_weight(a: Partition, b: Partition) -> int:
    if not refines(a, b):
        raise NotARefinement("first partition does not refine the second")
    return a.card - b.card


@dataclass(frozen=True)
class WeightReport:
    weight: int
    depth: int


def depth_of_weight(weight: int) -> int:
    return math.ceil(math.log2(weight + 1)) if weight > 0 else 0


def decompose(source: Ensemble | Partition, target: int) -> list[int]:
    """Smallest set of disjoint source patterns whose union is ``target``."""
    pats = source.masks if isinstance(source, Partition) else source.patterns
    cands = [p for p in pats if p & ~target == 0]
    union = 0
    disjoint = True
    for p in cands:
        if union & p:
            disjoint = False
        union |= p
    if union != target:
        raise NotCombinable("target is not a union of source patterns")
    if disjoint:
        return cands
    return _min_exact_cover(cands, target)


def _min_exact_cover(cands: list[int], target: int) -> list[int]:
    cands = sorted(cands, key=lambda m: -m.bit_count())
    by_low: dict[int, list[int]] = {}
    for p in cands:
        for i in bits_of(p):
            by_low.setdefault(i, []).append(p)
    best: list[int] | None = None

    def go(rest: int, chosen: list[int]):
        nonlocal best
        if rest == 0:
            if best is None or len(chosen) < len(best):
                best = list(chosen)
            return
        if best is not None and len(chosen) + 1 >= len(best):
            return
        low = (rest & -rest).bit_length() - 1
        for p in by_low.get(low, ()):
            if p & ~rest == 0:
                chosen.append(p)
                go(rest ^ p, chosen)
                chosen.pop()

    go(target, [])
    if best is None:
        raise NotCombinable("no disjoint decomposition exists")
    return best


def combination_weight(source: Ensemble | Partition, target: int) -> WeightReport:
    w = len(decompose(source, target)) - 1
    return WeightReport(w, depth_of_weight(w))


@dataclass(frozen=True)
class EqualityPartition:
    """Columns grouped by the cyclic row offset between two base functions."""

    classes: dict[int, int]  # offset n -> X bitmask
    w: int

    def partition(self) -> Partition:
        return Partition.from_masks(self.w, self.classes.values())

    def __len__(self) -> int:
        return len(self.classes)


def _offsets(f, g, h: int) -> np.ndarray:
    return (np.asarray(g, dtype=np.int64) - np.asarray(f, dtype=np.int64)) % h


def equality_partition(f: BaseFunction, g: BaseFunction) -> EqualityPartition:
    if (f.w, f.h) != (g.w, g.h):
        raise ValueError("base functions live on different domains")
    off = _offsets(f.values, g.values, f.h)
    classes = {}
    for x, n in enumerate(off.tolist()):
        classes[n] = classes.get(n, 0) | (1 << x)
    return EqualityPartition(dict(sorted(classes.items())), f.w)


def equality_labels(f_values, g_values, h: int) -> Partition:
    """Equality partition of X straight from two value tables."""
    return Partition(_offsets(f_values, g_values, h))


def span_partition(domain: ImageDomain, f, a: Partition) -> Partition:
    """Image partition of all vertical shifts of graph(f) restricted to A's classes.

    Pixel (x, y) belongs to the piece ``graph_f(a) + s`` with ``a`` the class of
    x and ``s = mod_h(y - f(x))``.
    """
    vals = np.asarray(f.values if isinstance(f, BaseFunction) else f, dtype=np.int64)
    if a.n != domain.w or vals.size != domain.w:
        raise ValueError("X partition and function must cover the image width")
    h = domain.h
    ys = np.arange(h)
    s = (ys[None, :] - vals[:, None]) % h
    lab = a.labels[:, None] * h + s
    return Partition(lab.reshape(-1))
