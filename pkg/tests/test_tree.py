import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rscompress.tree import build_tree, nodes_on_level


def test_depth_three_partition_of_400():
    t = build_tree(400, 50)
    assert t.depth == 3
    assert t.interval(8) == (0, 50)
    assert t.interval(9) == (50, 100)
    assert [t.interval(l) for l in nodes_on_level(t, 3)][0] == (0, 50)


def test_single_node_tree():
    t = build_tree(1, 1)
    assert t.depth == 0
    assert t.node_count == 1
    assert t.is_leaf(1)
    assert t.interval(1) == (0, 1)


def test_uneven_threshold_splits_twice():
    t = build_tree(100, 30)
    assert t.depth == 2
    leaves = t.leaves()
    assert len(leaves) == 4
    assert all(t.size(l) == 25 for l in leaves)
    lvl1 = nodes_on_level(t, 1)
    assert [t.interval(x) for x in lvl1] == [(0, 50), (50, 100)]


def test_nodes_on_level():
    t = build_tree(400, 50)
    assert nodes_on_level(t, 0) == [1]
    assert len(nodes_on_level(t, 3)) == 8
    with pytest.raises(ValueError):
        nodes_on_level(t, 4)
    with pytest.raises(ValueError):
        nodes_on_level(t, -1)


def test_breadth_first_numbering():
    t = build_tree(256, 32)
    for tau in range(1, t.node_count + 1):
        if not t.is_leaf(tau):
            assert t.children(tau) == (2 * tau, 2 * tau + 1)


def test_rejects_degenerate_inputs():
    with pytest.raises(ValueError):
        build_tree(0, 4)
    with pytest.raises(ValueError):
        build_tree(10, 0)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 100_000), m_frac=st.floats(0.0, 1.0))
def test_leaves_partition_and_sizes(n, m_frac):
    m = max(1, int(round(1 + m_frac * (n - 1))))
    t = build_tree(n, m)
    leaves = t.leaves()
    intervals = sorted(t.interval(l) for l in leaves)
    assert intervals[0][0] == 0 and intervals[-1][1] == n
    for (a0, a1), (b0, b1) in zip(intervals, intervals[1:]):
        assert a1 == b0
    if n > m:
        assert max(t.size(l) for l in leaves) <= m
        assert min(t.size(l) for l in leaves) >= m // 2
    limit = int(np.ceil(np.log2(max(1.0, n / max(1, m // 2))))) + 1
    assert t.depth <= limit


@settings(max_examples=100, deadline=None)
@given(n=st.integers(2, 5000), m=st.integers(1, 64))
def test_sibling_balance_and_ordering(n, m):
    t = build_tree(n, m)
    for tau in range(1, t.node_count + 1):
        if t.is_leaf(tau):
            continue
        a, b = t.children(tau)
        assert t.interval(a)[0] == t.interval(tau)[0]
        assert t.interval(a)[1] == t.interval(b)[0]
        assert t.interval(b)[1] == t.interval(tau)[1]
        assert abs(t.size(a) - t.size(b)) <= 1
        assert t.size(tau) > m
