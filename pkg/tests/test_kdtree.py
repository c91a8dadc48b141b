import numpy as np
import pytest
from hypothesis import given, strategies as st

from fidreg.kdtree import KdTree
from fidreg.rng import SplitMix64

from reference_impls import brute_force_knn

coord = st.integers(-4, 4)  # small integer grid forces distance ties


@given(
    st.lists(st.tuples(coord, coord), min_size=0, max_size=40),
    st.tuples(coord, coord),
    st.integers(1, 8),
)
def test_matches_brute_force_with_ties(points, query, k):
    tree = KdTree(dim=2)
    stored = []
    for p in points:
        arr = np.array(p, dtype=np.float64)
        tree.insert(arr, payload=len(stored))
        stored.append(arr)
    q = np.array(query, dtype=np.float64)
    got = tree.nearest(q, k=k)
    want = brute_force_knn(stored, q, k)
    assert [(payload, round(dist, 12)) for payload, dist in got] == [
        (i, round(d, 12)) for d, i in want
    ]


def test_empty_tree():
    assert KdTree(dim=3).nearest(np.zeros(3), k=5) == []


def test_k_larger_than_size_returns_all_sorted():
    tree = KdTree(dim=1)
    for i, x in enumerate([5.0, 1.0, 9.0]):
        tree.insert(np.array([x]), payload=i)
    assert [p for p, _ in tree.nearest(np.array([0.0]), k=10)] == [1, 0, 2]


def test_duplicate_points_tie_break_by_insertion_order():
    tree = KdTree(dim=2)
    for i in range(5):
        tree.insert(np.array([1.0, 2.0]), payload=i)
    assert [p for p, _ in tree.nearest(np.array([1.0, 2.0]), k=3)] == [0, 1, 2]


def test_interleaved_inserts_and_queries_stay_exact():
    rng = SplitMix64(77)
    tree = KdTree(dim=3)
    stored = []
    for step in range(500):
        p = (rng.uniforms(3) - 0.5) * 20.0
        tree.insert(p, payload=step)
        stored.append(p)
        if step % 17 == 0:
            q = (rng.uniforms(3) - 0.5) * 20.0
            got = tree.nearest(q, k=4)
            want = brute_force_knn(stored, q, 4)
            assert [payload for payload, _ in got] == [i for _, i in want]


def test_rebuild_preserves_contents():
    # crossing the 2x growth threshold several times must lose nothing
    tree = KdTree(dim=1)
    n = 100
    for i in range(n):
        tree.insert(np.array([float(i)]), payload=i)
    assert [p for p, _ in tree.nearest(np.array([-1.0]), k=n)] == list(range(n))


def test_dimension_checked():
    tree = KdTree(dim=2)
    with pytest.raises(ValueError):
        tree.insert(np.zeros(3), payload=0)
    with pytest.raises(ValueError):
        tree.nearest(np.zeros(3), k=1)
    with pytest.raises(ValueError):
        tree.nearest(np.zeros(2), k=0)
