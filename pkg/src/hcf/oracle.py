"""Ground truth: direct summation, FHT dyadic profiles, segment lines, verification."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .grid import BaseFunction, ImageDomain, bits_of, graph_pattern, round_div
from .partition import Ensemble, Partition, span_partition


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def fht_profile(n: int, e: int) -> list[int]:
    """Dyadic line of width n: the left half is the half-width line of
    elevation e//2, the right half is the same line raised by ceil(e/2)."""
    if n == 1:
        return [0]
    half = fht_profile(n // 2, e // 2)
    return half + [v + (e + 1) // 2 for v in half]


def fht_tables(n: int) -> list[BaseFunction]:
    if not _is_pow2(n) or n < 2:
        raise ValueError(f"FHT size must be a power of two >= 2, got {n}")
    return [BaseFunction(e, n, n, tuple(v % n for v in fht_profile(n, e))) for e in range(n)]


def fht_ensemble(n: int) -> list[Partition]:
    domain = ImageDomain(n, n)
    whole = Partition.whole(n)
    return [span_partition(domain, f, whole) for f in fht_tables(n)]


def hough_lines(domain: ImageDomain, tables) -> dict[tuple[int, int], int]:
    """(elevation, shift) -> line bitmask for every profile in ``tables``."""
    return {(f.e, s): graph_pattern(domain, f.values, s=s) for f in tables for s in range(domain.h)}


@dataclass
class NaiveResult:
    sums: dict
    additions: int


def _as_index_lists(patterns) -> tuple[list, list[np.ndarray]]:
    if isinstance(patterns, Ensemble):
        items = list(enumerate(patterns.patterns))
    elif isinstance(patterns, Mapping):
        items = list(patterns.items())
    else:
        items = list(enumerate(patterns))
    return [k for k, _ in items], [np.asarray(bits_of(m), dtype=np.int64) for _, m in items]


def naive_hough(img: np.ndarray, patterns) -> NaiveResult:
    """Sum ``img`` (flat pixel vector, or a batch ``[B, N]``) over each pattern."""
    img = np.asarray(img, dtype=np.int64)
    keys, idx = _as_index_lists(patterns)
    if idx and all(len(i) == len(idx[0]) for i in idx):
        mat = np.stack(idx)
        sums = img[..., mat].sum(axis=-1)
        vals = [sums[..., j] for j in range(len(keys))]
    else:
        vals = [img[..., i].sum(axis=-1) for i in idx]
    adds = sum(max(len(i) - 1, 0) for i in idx)
    out = {k: (int(v) if np.ndim(v) == 0 else v) for k, v in zip(keys, vals)}
    return NaiveResult(out, adds)


@dataclass
class SegmentEnsemble:
    """Line segments of an n x n image embedded as cyclic lines on an n x 2n image.

    Rows ``n..2n-1`` of the padded image are the zero pad.
    """

    n: int
    domain: ImageDomain
    zero_mask: int
    segments: dict[tuple[int, int], int]  # (e, s) -> pixels on the n x n image
    cyclic: dict[tuple[int, int], tuple[int, int]]  # (e, s) -> (e, s mod 2n)
    specs: list[tuple[int, int]] = field(default_factory=list)

    def embed_image(self, img: np.ndarray) -> np.ndarray:
        """[x, y] image of size n x n -> padded [x, y] image of size n x 2n."""
        img = np.asarray(img)
        out = np.zeros((self.n, 2 * self.n), dtype=img.dtype)
        out[:, : self.n] = img
        return out


def segment_pixels(n: int, e: int, s: int) -> list[tuple[int, int]]:
    pts = [(x, round_div(e * x, n - 1) + s) for x in range(n)]
    return [(x, y) for x, y in pts if 0 <= y < n]


def segment_ensemble(n: int) -> SegmentEnsemble:
    if n < 2:
        raise ValueError("segments need n >= 2")
    small = ImageDomain(n, n)
    padded = ImageDomain(n, 2 * n)
    zero = 0
    for x in range(n):
        for y in range(n, 2 * n):
            zero |= 1 << padded.index(x, y)
    specs, segs, cyc = [], {}, {}
    for e in range(n):
        for s in range(-n + 1, n):
            specs.append((e, s))
            pix = segment_pixels(n, e, s)
            if pix:
                segs[(e, s)] = sum(1 << small.index(x, y) for x, y in pix)
                cyc[(e, s)] = (e, s % (2 * n))
    return SegmentEnsemble(n, padded, zero, segs, cyc, specs)


@dataclass
class VerificationReport:
    trials: int
    seed: int
    status: str
    checked: int = 0
    first_failure: dict | None = None

    @property
    def ok(self) -> bool:
        return self.status == "pass"

    def to_json(self) -> dict:
        d = {"trials": self.trials, "seed": self.seed, "status": self.status, "checked": self.checked}
        if self.first_failure is not None:
            d["first_failure"] = self.first_failure
        return d


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("HCF_THREADS", "1")))
    except ValueError:
        return 1


def image_battery(domain: ImageDomain, trials: int, seed: int, exhaustive_limit: int = 256):
    """Named image batches: zeros, ones, deltas (small domains), seeded random."""
    n = domain.size
    yield "zeros", np.zeros((1, n), dtype=np.int64)
    yield "ones", np.ones((1, n), dtype=np.int64)
    if n <= exhaustive_limit:
        yield "delta", np.eye(n, dtype=np.int64)
    if trials > 0:
        rng = np.random.default_rng(seed)
        yield "random", rng.integers(0, 256, size=(trials, n), dtype=np.int64)


def verify_circuit(circuit, patterns: Mapping, trials: int = 100, seed: int = 0, mask: int = 0) -> VerificationReport:
    """Compare circuit outputs with direct sums on a battery of images.

    ``patterns`` maps output names to pixel bitmasks; ``mask`` marks pixels
    forced to zero in every test image (pruned inputs).
    """
    from .circuit import evaluate_batch

    domain = ImageDomain(circuit.w, circuit.h)
    keep = np.ones(domain.size, dtype=np.int64)
    if mask:
        keep[bits_of(mask)] = 0
    missing = [k for k in patterns if k not in circuit.outputs]
    if missing:
        return VerificationReport(trials, seed, "fail", 0, {"reason": "missing output", "pattern": repr(missing[0])})
    batches = list(image_battery(domain, trials, seed))

    def run(batch):
        kind, imgs = batch
        imgs = imgs * keep
        got = evaluate_batch(circuit, imgs)
        want = naive_hough(imgs, patterns).sums
        for key, ref in want.items():
            bad = np.nonzero(got[key] != ref)[0]
            if bad.size:
                j = int(bad[0])
                return {
                    "pattern": repr(key),
                    "image": kind,
                    "row": j,
                    "expected": int(ref[j]),
                    "got": int(got[key][j]),
                }
        return None

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(run, batches))
    checked = sum(len(b[1]) for b in batches)
    for res in results:
        if res is not None:
            return VerificationReport(trials, seed, "fail", checked, res)
    return VerificationReport(trials, seed, "pass", checked)
