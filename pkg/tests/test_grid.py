import numpy as np
import pytest
from hypothesis import given, strategies as st

from hcf.grid import (
    ImageDomain,
    base_function,
    line_pattern,
    orbit,
    pattern,
    pixels,
    project,
    shift_pattern,
    transpose_image,
)
from hcf.partition import Ensemble, is_partition

# f_4 on width 15, evaluated by hand with round(t) = floor(t + 1/2)
F4_W15 = [0, 0, 1, 1, 1, 1, 2, 2, 2, 3, 3, 3, 3, 4, 4]


@st.composite
def domain_and_pattern(draw, max_side=7):
    w = draw(st.integers(1, max_side))
    h = draw(st.integers(1, max_side))
    d = ImageDomain(w, h)
    m = draw(st.integers(0, d.full))
    return d, m


def test_domain_rejects_empty():
    with pytest.raises(ValueError):
        ImageDomain(0, 3)


def test_pixel_index_roundtrip():
    d = ImageDomain(5, 3)
    assert d.index(4, 2) == 14
    assert d.pixel(14) == (4, 2)
    with pytest.raises(ValueError):
        d.index(5, 0)


def test_shift_examples():
    d = ImageDomain(5, 7)
    p = pattern(d, [(3, 2)])
    assert shift_pattern(d, p, 0) == p
    d4 = ImageDomain(5, 4)
    assert pixels(d4, shift_pattern(d4, pattern(d4, [(3, 2)]), 5)) == {(3, 3)}


def test_shift_of_f4_line_matches_figure():
    d = ImageDomain(15, 8)
    p = shift_pattern(d, line_pattern(4, 0, d), 1)
    assert pixels(d, p) == {(x, y + 1) for x, y in enumerate(F4_W15)}
    assert p == line_pattern(4, 1, d)


@given(domain_and_pattern(), st.integers(-20, 20), st.integers(-20, 20))
def test_shift_is_a_group_action(dp, s, t):
    d, p = dp
    assert shift_pattern(d, shift_pattern(d, p, s), t) == shift_pattern(d, p, s + t)
    assert shift_pattern(d, shift_pattern(d, p, s), -s) == p
    assert bin(shift_pattern(d, p, s)).count("1") == bin(p).count("1")


@given(domain_and_pattern(), st.integers(-20, 20))
def test_projection_is_shift_invariant(dp, s):
    d, p = dp
    assert project(d, shift_pattern(d, p, s)) == project(d, p)


def test_project_examples():
    d = ImageDomain(3, 4)
    assert project(d, 0) == 0
    assert project(d, pattern(d, [(0, 1), (0, 3), (2, 0)])) == 0b101
    assert project(d, line_pattern(2, 1, d)) == 0b111


def test_base_function_tables():
    d = ImageDomain(15, 100)
    assert base_function(0, d).values == (0,) * 15
    f5 = base_function(5, d)
    assert f5(0) == 0 and f5(14) == 5
    assert list(f5.values) == [0, 0, 1, 1, 1, 2, 2, 3, 3, 3, 4, 4, 4, 5, 5]
    assert list(base_function(4, d).values) == F4_W15


def test_base_function_wraps_mod_h():
    d = ImageDomain(5, 3)
    assert base_function(4, d).values == (0, 1, 2, 0, 1)


def test_base_function_needs_two_columns():
    with pytest.raises(ValueError):
        base_function(1, ImageDomain(1, 4))


def test_line_examples():
    d = ImageDomain(6, 5)
    assert pixels(d, line_pattern(0, 0, d)) == {(x, 0) for x in range(6)}
    assert pixels(d, line_pattern(0, 2, d)) == {(x, 2) for x in range(6)}
    d15 = ImageDomain(15, 7)
    assert pixels(d15, line_pattern(4, 1, d15)) == {(x, y + 1) for x, y in enumerate(F4_W15)}


@given(st.integers(2, 9), st.integers(1, 9), st.integers(0, 12), st.integers(-9, 9))
def test_lines_are_function_graphs(w, h, e, s):
    d = ImageDomain(w, h)
    p = line_pattern(e, s, d)
    assert bin(p).count("1") == w
    assert project(d, p) == (1 << w) - 1


@given(st.integers(2, 9), st.integers(1, 9))
def test_distinct_lines_when_few_elevations(w, h):
    d = ImageDomain(w, h)
    lines = {line_pattern(e, s, d) for e in range(h) for s in range(h)}
    assert len(lines) == h * h


def test_orbit_examples():
    d = ImageDomain(3, 4)
    rows = orbit(d, line_pattern(0, 0, d))
    assert len(rows) == 4
    assert orbit(d, d.full) == [d.full]


@given(st.integers(2, 9), st.integers(1, 9), st.integers(0, 12))
def test_orbit_of_line_is_image_partition(w, h, e):
    d = ImageDomain(w, h)
    orb = orbit(d, line_pattern(e, 0, d))
    assert len(orb) == h
    assert is_partition(Ensemble.of(d.size, orb))


def test_transpose():
    assert transpose_image(np.ones((1, 1))).shape == (1, 1)
    img = np.arange(6).reshape(3, 2)
    t = transpose_image(img)
    assert t.shape == (2, 3) and t[1, 2] == img[2, 1]
    assert np.array_equal(transpose_image(t), img)
