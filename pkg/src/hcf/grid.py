"""Image domain, pixel patterns, vertical shifts and digital-line generators.

Pixels are indexed as ``x * h + y`` and a pattern is the integer bitmask of
its pixel indices, so set algebra is plain ``|``, ``&`` and ``^`` on ints and
equality is extensional for free.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class ImageDomain:
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"image domain needs w, h >= 1, got {self.w}x{self.h}")

    @property
    def size(self) -> int:
        return self.w * self.h

    def index(self, x: int, y: int) -> int:
        if not (0 <= x < self.w and 0 <= y < self.h):
            raise ValueError(f"pixel ({x}, {y}) outside {self.w}x{self.h} image")
        return x * self.h + y

    def pixel(self, i: int) -> tuple[int, int]:
        return divmod(i, self.h)

    @property
    def full(self) -> int:
        """Bitmask of the whole image."""
        return (1 << self.size) - 1


def bits_of(mask: int) -> list[int]:
    """Sorted indices of the set bits of ``mask``."""
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def mask_of(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << int(i)
    return m


def pattern(domain: ImageDomain, pixels: Iterable[tuple[int, int]]) -> int:
    return mask_of(domain.index(x, y) for x, y in pixels)


def pixels(domain: ImageDomain, mask: int) -> set[tuple[int, int]]:
    return {domain.pixel(i) for i in bits_of(mask)}


def shift_pattern(domain: ImageDomain, mask: int, s: int) -> int:
    """Move every pixel of the pattern up by ``s`` rows, wrapping mod h."""
    h = domain.h
    s %= h
    if s == 0:
        return mask
    col = (1 << h) - 1
    out = 0
    for x in range(domain.w):
        c = (mask >> (x * h)) & col
        if c:
            c = ((c << s) | (c >> (h - s))) & col
            out |= c << (x * h)
    return out


def project(domain: ImageDomain, mask: int) -> int:
    """Columns touched by the pattern, as a bitmask over X."""
    h = domain.h
    col = (1 << h) - 1
    return mask_of(x for x in range(domain.w) if (mask >> (x * h)) & col)


def round_div(num: int, den: int) -> int:
    """floor(num/den + 1/2) for den > 0, in exact integer arithmetic."""
    return (2 * num + den) // (2 * den)


@dataclass(frozen=True)
class BaseFunction:
    """Cyclic line profile ``x -> mod_h(round(e * x / (w - 1)))``."""

    e: int
    w: int
    h: int
    values: tuple[int, ...]

    def __call__(self, x: int) -> int:
        return self.values[x]

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)


def base_function(e: int, domain: ImageDomain) -> BaseFunction:
    w, h = domain.w, domain.h
    if w < 2:
        raise ValueError("base functions need w >= 2")
    if e < 0:
        raise ValueError("elevation must be non-negative")
    vals = tuple(round_div(e * x, w - 1) % h for x in range(w))
    return BaseFunction(e, w, h, vals)


def graph_pattern(domain: ImageDomain, values, columns: int | None = None, s: int = 0) -> int:
    """Graph of a column->row table restricted to ``columns`` (X bitmask), shifted by s."""
    h = domain.h
    xs = range(domain.w) if columns is None else bits_of(columns)
    return mask_of(x * h + (values[x] + s) % h for x in xs)


def line_pattern(e: int, s: int, domain: ImageDomain) -> int:
    f = base_function(e, domain)
    return graph_pattern(domain, f.values, s=s)


def orbit(domain: ImageDomain, mask: int) -> list[int]:
    """All distinct vertical shifts of a pattern, in shift order."""
    seen = []
    for s in range(domain.h):
        p = shift_pattern(domain, mask, s)
        if p not in seen:
            seen.append(p)
    return seen


def transpose_image(values: np.ndarray) -> np.ndarray:
    """Swap x and y of an image array indexed ``[x, y]``."""
    return np.ascontiguousarray(np.asarray(values).T)


def image_vector(domain: ImageDomain, values: np.ndarray) -> np.ndarray:
    """Flatten an ``[x, y]`` image into pixel-index order."""
    values = np.asarray(values)
    if values.shape != (domain.w, domain.h):
        raise ValueError(f"image shape {values.shape} does not match {domain.w}x{domain.h}")
    return values.reshape(-1)
