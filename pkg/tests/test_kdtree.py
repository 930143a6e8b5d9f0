import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from ubknn import kdtree
from ubknn.oracle import brute_knn


def check_structure(tree):
    counts = np.zeros(tree.n, dtype=np.int64)
    for v in tree.leaves():
        counts[tree.perm[tree.start[v]:tree.end[v]]] += 1
        assert tree.end[v] - tree.start[v] <= tree.leaf_size
    assert np.all(counts == 1)
    for v in np.flatnonzero(tree.left >= 0):
        dim, val = tree.split_dim[v], tree.split_val[v]
        lo_ids = tree.perm[tree.start[tree.left[v]]:tree.end[tree.left[v]]]
        hi_ids = tree.perm[tree.start[tree.right[v]]:tree.end[tree.right[v]]]
        assert np.all(tree.points[lo_ids, dim] <= val)
        assert np.all(tree.points[hi_ids, dim] >= val)


def test_single_point():
    tree = kdtree.build(np.array([[1.5, -2.0]]))
    assert tree.n_nodes == 1 and tree.leaves().tolist() == [0]
    nl = kdtree.knn_query(tree, [0.0, 0.0], 1)
    assert nl.indices.tolist() == [0]
    assert nl.distances[0] == pytest.approx(math.hypot(1.5, 2.0))


def test_points_on_a_line():
    tree = kdtree.build(np.arange(4.0)[:, None], leaf_size=1)
    check_structure(tree)
    assert tree.split_val[0] in (1.0, 2.0)
    for i in range(4):
        assert kdtree.knn_query(tree, [float(i)], 1).indices.tolist() == [i]


def test_hand_geometry():
    tree = kdtree.build(np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]]))
    nl = kdtree.knn_query(tree, [0.0, 0.0], 2)
    assert nl.indices.tolist() == [0, 1]
    assert nl.distances.tolist() == [0.0, 3.0]


def test_self_query(rng):
    P = rng.random((1000, 3))
    tree = kdtree.build(P)
    idx, dist = kdtree.knn_query_batch(tree, P, 1)
    assert np.array_equal(idx[:, 0], np.arange(1000))
    assert np.all(dist == 0)


def test_matches_brute_force_5d(rng):
    P = rng.random((500, 5))
    Q = rng.random((100, 5))
    tree = kdtree.build(P)
    idx, dist = kdtree.knn_query_batch(tree, Q, 10)
    for q in range(100):
        ref = brute_knn(P, Q[q], 10)
        assert np.array_equal(idx[q], ref.indices)
        assert np.array_equal(dist[q], ref.distances)


def test_ties_go_to_smaller_index():
    P = np.array([[1.0], [-1.0], [1.0], [-1.0], [0.0]])
    tree = kdtree.build(P, leaf_size=1)
    assert kdtree.knn_query(tree, [0.0], 3).indices.tolist() == [4, 0, 1]
    # duplicates everywhere
    P = np.zeros((40, 2))
    tree = kdtree.build(P, leaf_size=3)
    assert kdtree.knn_query(tree, [5.0, 5.0], 7).indices.tolist() == list(range(7))


def test_structure_and_depth(rng):
    for n, leaf in [(1, 16), (17, 16), (1000, 16), (4097, 4), (300, 1)]:
        tree = kdtree.build(rng.random((n, 3)), leaf)
        check_structure(tree)
        assert tree.depth() <= max(1, math.ceil(math.log2(n / leaf))) + 1


def test_errors():
    with pytest.raises(ValueError):
        kdtree.build(np.zeros((0, 2)))
    tree = kdtree.build(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        kdtree.knn_query(tree, [0.0, 0.0], 4)
    with pytest.raises(ValueError):
        kdtree.knn_query(tree, [0.0, 0.0], 0)


points = hnp.arrays(np.float64, st.tuples(st.integers(1, 120), st.integers(1, 4)),
                    elements=st.integers(-5, 5).map(float))


@settings(max_examples=60, deadline=None)
@given(points, st.integers(1, 20), st.integers(1, 25), st.data())
def test_exact_against_oracle(P, leaf, k, data):
    k = min(k, P.shape[0])
    x = np.array(data.draw(st.lists(st.floats(-6, 6), min_size=P.shape[1], max_size=P.shape[1])))
    tree = kdtree.build(P, leaf)
    got = kdtree.knn_query(tree, x, k)
    ref = brute_knn(P, x, k)
    assert np.array_equal(got.indices, ref.indices)
    assert np.array_equal(got.distances, ref.distances)
    assert np.all(np.diff(got.distances) >= 0)
    # prefix property
    if k > 1:
        assert np.array_equal(kdtree.knn_query(tree, x, k - 1).indices, got.indices[:-1])
