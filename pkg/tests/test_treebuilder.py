import itertools
import json
import math
from functools import reduce

import pytest
from hypothesis import given, settings, strategies as st

from hcf.grid import ImageDomain, base_function, mask_of
from hcf.partition import Partition, common_refinement, equality_partition, meet_card, span_partition
from hcf.treebuilder import (
    BoundViolation,
    build_fht_tree,
    build_hough_tree,
    build_tree_fixed,
    build_tree_greedy,
    check_bounds,
    check_tree,
    weight_bound,
    fixed_schedule,
    level_counts,
    naive_weight,
    pset_bound,
    tree_metrics,
)


def part(n, *classes):
    return Partition.from_masks(n, [mask_of(c) for c in classes])


def hough_leaves(d, E):
    whole = Partition.whole(d.w)
    return [span_partition(d, base_function(e, d), whole) for e in range(E)]


@st.composite
def distinct_partitions(draw, n=8, max_m=7):
    m = draw(st.integers(1, max_m))
    seen, out = set(), []
    for _ in range(m):
        p = Partition(draw(st.lists(st.integers(0, 3), min_size=n, max_size=n)))
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out


def test_empty_inputs_rejected():
    with pytest.raises(ValueError):
        build_tree_greedy([])
    with pytest.raises(ValueError):
        build_tree_fixed([])


def test_duplicate_inputs_rejected():
    p = part(4, [0, 1], [2, 3])
    with pytest.raises(ValueError):
        build_tree_greedy([p, p])


@pytest.mark.parametrize("builder", [build_tree_greedy, build_tree_fixed])
def test_single_input_is_a_chain(builder):
    lam = part(6, [0, 1, 2], [3, 4, 5])
    t = builder([lam])
    assert len(t.nodes) == 2 and t.depth == 1
    assert tree_metrics(t).weight == 6 - 2


@pytest.mark.parametrize("builder", [build_tree_greedy, build_tree_fixed])
def test_two_inputs_one_merge(builder):
    a, b = part(4, [0, 1], [2, 3]), part(4, [0, 2], [1, 3])
    t = builder([a, b])
    top = t.nodes[t.root].children[0]
    assert t.partition(top) == common_refinement(a, b)
    assert sorted(t.nodes[top].children) == sorted(t.leaves)
    check_tree(t)


def test_fixed_m6_matches_figure():
    parts = hough_leaves(ImageDomain(8, 8), 6)
    t = build_tree_fixed(parts)
    assert t.depth == math.ceil(math.log2(6)) + 1
    by_level = {}
    for n in t.nodes:
        if n.id != t.root:
            by_level.setdefault(n.level, []).append(n)
    assert [len(by_level[k]) for k in range(4)] == [6, 3, 2, 1]
    singles = [n for n in t.nodes if len(n.children) == 1 and n.id != t.root]
    assert len(singles) == 1 and (singles[0].level, singles[0].index) == (2, 1)
    # L^2_1 passes L^1_2 = L_4 v L_5 up unchanged
    assert t.nodes[singles[0].children[0]].children == [t.leaves[4], t.leaves[5]]


def test_level_counts_m5():
    assert level_counts(5) == ([3, 2, 1], [2, 1, 1])


@pytest.mark.parametrize("m", range(1, 65))
def test_level_counts_formula(m):
    nodes, pairs = level_counts(m)
    K = math.ceil(math.log2(m)) if m > 1 else 0
    assert nodes == [math.ceil(m / 2**k) for k in range(1, K + 1)]
    # two-children counts follow g_k = floor(l_{k-1} / 2); floor(m / 2^k) undercounts
    # whenever a carried single node later gets paired (m = 3, 5, ...)
    assert pairs == [math.ceil(m / 2 ** (k - 1)) // 2 for k in range(1, K + 1)]
    assert sum(pairs) == m - 1
    if m & (m - 1) == 0:
        assert pairs == [m // 2**k for k in range(1, K + 1)]


def test_schedule_children_are_consecutive():
    assert list(fixed_schedule(3)) == [(1, 0, (0, 1)), (1, 1, (2,)), (2, 0, (0, 1))]
    assert list(fixed_schedule(1)) == []


def test_depth4_example_weight(depth4_tree):
    t, ids = depth4_tree()
    check_tree(t)
    assert t.depth == 4
    m = tree_metrics(t)
    assert m.weight == m.closed_form == 20


def test_leaf_count_rule_enforced(depth4_tree):
    t, _ = depth4_tree()
    t.leaves = t.leaves[:-1]
    with pytest.raises(BoundViolation):
        check_tree(t)


def test_greedy_first_merge_is_cheapest_pair():
    d = ImageDomain(6, 4)
    rows = span_partition(d, base_function(0, d), Partition.whole(6))
    halves = Partition([x // 3 for x in range(6)])
    inputs = [rows, span_partition(d, base_function(0, d), halves)]
    inputs += [span_partition(d, base_function(e, d), Partition.whole(6)) for e in range(1, 5)]
    t = build_tree_greedy(inputs)
    first = t.nodes[len(inputs)]
    assert first.children == [t.leaves[0], t.leaves[1]]
    _replay_greedy(t, inputs)


def _replay_greedy(t, inputs):
    """Every merge must take a pair of minimal |A v B| among the live nodes."""
    live = {t.leaves[i]: p for i, p in enumerate(inputs)}
    for n in t.nodes[len(inputs):]:
        if n.id == t.root:
            break
        a, b = n.children
        best = min(meet_card(live[x], live[y]) for x, y in itertools.combinations(sorted(live), 2))
        assert meet_card(live[a], live[b]) == best
        live[n.id] = common_refinement(live.pop(a), live.pop(b))
    assert len(live) == 1


@settings(max_examples=60, deadline=None)
@given(distinct_partitions())
def test_greedy_replay_random(inputs):
    t = build_tree_greedy(inputs)
    check_tree(t)
    _replay_greedy(t, inputs)
    m = tree_metrics(t)
    assert m.weight == m.closed_form >= 0


@settings(max_examples=60, deadline=None)
@given(distinct_partitions())
def test_fixed_tree_invariants(inputs):
    t = build_tree_fixed(inputs)
    check_tree(t)
    assert [t.partition(i) for i in t.leaves] == inputs
    m = len(inputs)
    assert t.depth == (math.ceil(math.log2(m)) + 1 if m > 1 else 1)


def test_hough_e1_is_trivial():
    d = ImageDomain(5, 4)
    t = build_hough_tree(d, 1)
    assert tree_metrics(t).weight == 5 * 4 - 4
    check_bounds(t, d, 1)


def test_hough_rejects_narrow_domain():
    with pytest.raises(ValueError):
        build_hough_tree(ImageDomain(1, 4), 2)


def test_hough_w15_e2_uses_equality_partition():
    d = ImageDomain(15, 6)
    t = build_hough_tree(d, 2)
    top = t.nodes[t.nodes[t.root].children[0]]
    assert top.pset == equality_partition(base_function(0, d), base_function(1, d)).partition()
    assert top.pset.card <= 2


@pytest.mark.parametrize(
    "w,h,E",
    [(4, 4, 4), (8, 8, 8), (15, 6, 5), (6, 3, 8), (16, 16, 8), (9, 2, 7), (16, 5, 3), (2, 2, 8)],
)
def test_hough_nodes_equal_image_level_meet(w, h, E):
    d = ImageDomain(w, h)
    t = build_hough_tree(d, E)
    leaves = hough_leaves(d, E)
    for n in t.nodes:
        if n.id == t.root:
            continue
        lo, hi = n.cover
        assert t.partition(n.id) == reduce(common_refinement, leaves[lo : hi + 1])
        assert n.card == t.partition(n.id).card
    check_tree(t)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(1, 12), st.integers(1, 8))
def test_hough_tree_weight_at_most_naive(w, h, E):
    d = ImageDomain(w, h)
    m = tree_metrics(build_hough_tree(d, E))
    assert m.weight == m.closed_form
    assert m.weight <= naive_weight(w, h, E)


def test_hough_8_bounds():
    d = ImageDomain(8, 8)
    t = build_hough_tree(d, 8)
    assert weight_bound(8, 8, 8) == pytest.approx(768.0)
    rep = check_bounds(t, d, 8)
    assert rep.weight < 768 and rep.naive == 448
    assert rep.comp_depth <= 12


def test_hough_16_closed_form_agrees():
    m = tree_metrics(build_hough_tree(ImageDomain(16, 16), 16))
    assert m.weight == m.closed_form


def test_pset_bound_sequence():
    assert [pset_bound(k, 1000) for k in (0, 1, 2, 3)] == [1, 2, 8, 128]
    assert pset_bound(4, 64) == 64 and pset_bound(10, 64) == 64


def test_check_bounds_flags_overweight_tree():
    d = ImageDomain(4, 4)
    t = build_hough_tree(d, 4)
    t.nodes[t.root].card += 1000
    t.size += 1000
    with pytest.raises(BoundViolation):
        check_bounds(t, d, 4)


@pytest.mark.parametrize("n", [2, 4, 8, 16, 32])
def test_fht_weight(n):
    assert tree_metrics(build_fht_tree(n)).weight == n * n * int(math.log2(n))


def test_fht_8_level_psets():
    assert tree_metrics(build_fht_tree(8)).level_cards == (1, 2, 4, 8)


def test_fht_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        build_fht_tree(6)


def test_tree_json_and_dot():
    t = build_fht_tree(4)
    d = json.loads(json.dumps(t.to_json()))
    assert len(d["nodes"]) == 8 and d["root"] == t.root
    assert t.to_dot().count("->") == 7


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 19), st.integers(1, 11), st.integers(1, 11))
def test_bounds_hold_on_small_domains(w, h, E):
    d = ImageDomain(w, h)
    rep = check_bounds(build_hough_tree(d, E), d, E)
    assert rep.n_lines <= E * h
    assert json.loads(json.dumps(rep.to_json()))["weight"] == rep.weight
