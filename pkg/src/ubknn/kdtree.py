"""Exact Euclidean k-nearest-neighbour search with a static k-d tree.

The tree is stored as flat arrays so that construction and search can run
under numba without the GIL.  Nodes split the widest-spread dimension at the
median; every node keeps its bounding box, which is what the search uses for
pruning.

Neighbours are ordered by ``(distance, point index)``; equal distances are
resolved towards the smaller index so results are deterministic and can be
compared bit-for-bit with a brute-force scan.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

DEFAULT_LEAF_SIZE = 16
_STACK_SIZE = 256


@dataclass(frozen=True)
class NeighborList:
    indices: np.ndarray
    distances: np.ndarray


@dataclass(frozen=True, eq=False)
class KdTree:
    """Static k-d tree over the rows of ``points``.

    ``perm`` holds point ids grouped so that node ``v`` owns
    ``perm[start[v]:end[v]]``.  ``left[v] == -1`` marks a leaf.
    """

    points: np.ndarray
    perm: np.ndarray
    start: np.ndarray
    end: np.ndarray
    left: np.ndarray
    right: np.ndarray
    split_dim: np.ndarray
    split_val: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    leaf_size: int

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.start.shape[0]

    def depth(self) -> int:
        """Number of levels on the longest root-to-leaf path."""
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        depth[0] = 1
        # children always receive larger ids than their parent
        for v in range(self.n_nodes):
            if self.left[v] >= 0:
                depth[self.left[v]] = depth[v] + 1
                depth[self.right[v]] = depth[v] + 1
        return int(depth.max())

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.left < 0)


@lru_cache(maxsize=None)
def _node_count(n: int, leaf_size: int) -> int:
    if n <= leaf_size:
        return 1
    half = n // 2
    return 1 + _node_count(half, leaf_size) + _node_count(n - half, leaf_size)


@numba.njit(cache=True, nogil=True)
def _select(perm, points, dim, lo, hi, kth):
    # Three-way quickselect on perm[lo:hi] keyed by points[perm[i], dim].
    while hi - lo > 1:
        a = points[perm[lo], dim]
        b = points[perm[(lo + hi - 1) // 2], dim]
        c = points[perm[hi - 1], dim]
        if a > b:
            a, b = b, a
        if b > c:
            b, c = c, b
        if a > b:
            a, b = b, a
        pivot = b
        lt = lo
        i = lo
        gt = hi - 1
        while i <= gt:
            v = points[perm[i], dim]
            if v < pivot:
                t = perm[lt]
                perm[lt] = perm[i]
                perm[i] = t
                lt += 1
                i += 1
            elif v > pivot:
                t = perm[gt]
                perm[gt] = perm[i]
                perm[i] = t
                gt -= 1
            else:
                i += 1
        if kth < lt:
            hi = lt
        elif kth > gt:
            lo = gt + 1
        else:
            return


@numba.njit(cache=True, nogil=True)
def _build(points, leaf_size, n_nodes):
    n, d = points.shape
    perm = np.arange(n)
    start = np.empty(n_nodes, dtype=np.int64)
    end = np.empty(n_nodes, dtype=np.int64)
    left = np.full(n_nodes, -1, dtype=np.int64)
    right = np.full(n_nodes, -1, dtype=np.int64)
    split_dim = np.full(n_nodes, -1, dtype=np.int64)
    split_val = np.zeros(n_nodes)
    lo = np.empty((n_nodes, d))
    hi = np.empty((n_nodes, d))

    start[0] = 0
    end[0] = n
    next_id = 1
    stack = np.empty(n_nodes, dtype=np.int64)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        v = stack[top]
        s = start[v]
        e = end[v]
        for j in range(d):
            lo[v, j] = points[perm[s], j]
            hi[v, j] = points[perm[s], j]
        for i in range(s + 1, e):
            p = perm[i]
            for j in range(d):
                x = points[p, j]
                if x < lo[v, j]:
                    lo[v, j] = x
                elif x > hi[v, j]:
                    hi[v, j] = x
        if e - s <= leaf_size:
            continue
        dim = 0
        spread = hi[v, 0] - lo[v, 0]
        for j in range(1, d):
            if hi[v, j] - lo[v, j] > spread:
                spread = hi[v, j] - lo[v, j]
                dim = j
        mid = s + (e - s) // 2
        _select(perm, points, dim, s, e, mid)
        split_dim[v] = dim
        split_val[v] = points[perm[mid], dim]
        l_id = next_id
        r_id = next_id + 1
        next_id += 2
        left[v] = l_id
        right[v] = r_id
        start[l_id] = s
        end[l_id] = mid
        start[r_id] = mid
        end[r_id] = e
        stack[top] = r_id
        stack[top + 1] = l_id
        top += 2
    return perm, start, end, left, right, split_dim, split_val, lo, hi


@numba.njit(cache=True, nogil=True, inline="always")
def _before(d_a, i_a, d_b, i_b):
    return d_a < d_b or (d_a == d_b and i_a < i_b)


@numba.njit(cache=True, nogil=True)
def _sift_down(hd, hi_, size, pos):
    while True:
        l = 2 * pos + 1
        if l >= size:
            return
        big = l
        r = l + 1
        if r < size and _before(hd[l], hi_[l], hd[r], hi_[r]):
            big = r
        if _before(hd[pos], hi_[pos], hd[big], hi_[big]):
            t = hd[pos]
            hd[pos] = hd[big]
            hd[big] = t
            ti = hi_[pos]
            hi_[pos] = hi_[big]
            hi_[big] = ti
            pos = big
        else:
            return


@numba.njit(cache=True, nogil=True)
def _query_one(points, perm, start, end, left, right, lo, hi, q, k, out_idx, out_d2):
    # Max-heap of the k best candidates, ordered by (d2, index).
    d = points.shape[1]
    hd = np.empty(k)
    hi_ = np.empty(k, dtype=np.int64)
    size = 0
    stack = np.empty(_STACK_SIZE, dtype=np.int64)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        v = stack[top]
        if size == k:
            md = 0.0
            for j in range(d):
                if q[j] < lo[v, j]:
                    t = lo[v, j] - q[j]
                    md += t * t
                elif q[j] > hi[v, j]:
                    t = q[j] - hi[v, j]
                    md += t * t
            if md > hd[0]:
                continue
        if left[v] < 0:
            for i in range(start[v], end[v]):
                p = perm[i]
                d2 = 0.0
                for j in range(d):
                    t = points[p, j] - q[j]
                    d2 += t * t
                if size < k:
                    # sift up
                    pos = size
                    size += 1
                    hd[pos] = d2
                    hi_[pos] = p
                    while pos > 0:
                        parent = (pos - 1) // 2
                        if _before(hd[parent], hi_[parent], hd[pos], hi_[pos]):
                            t2 = hd[parent]
                            hd[parent] = hd[pos]
                            hd[pos] = t2
                            ti = hi_[parent]
                            hi_[parent] = hi_[pos]
                            hi_[pos] = ti
                            pos = parent
                        else:
                            break
                elif _before(d2, p, hd[0], hi_[0]):
                    hd[0] = d2
                    hi_[0] = p
                    _sift_down(hd, hi_, size, 0)
        else:
            l_id = left[v]
            r_id = right[v]
            # visit the child whose box is nearer first
            dl = 0.0
            dr = 0.0
            for j in range(d):
                if q[j] < lo[l_id, j]:
                    t = lo[l_id, j] - q[j]
                    dl += t * t
                elif q[j] > hi[l_id, j]:
                    t = q[j] - hi[l_id, j]
                    dl += t * t
                if q[j] < lo[r_id, j]:
                    t = lo[r_id, j] - q[j]
                    dr += t * t
                elif q[j] > hi[r_id, j]:
                    t = q[j] - hi[r_id, j]
                    dr += t * t
            if dl <= dr:
                stack[top] = r_id
                stack[top + 1] = l_id
            else:
                stack[top] = l_id
                stack[top + 1] = r_id
            top += 2
    # heap sort into ascending (d2, index) order
    while size > 0:
        size -= 1
        out_d2[size] = hd[0]
        out_idx[size] = hi_[0]
        hd[0] = hd[size]
        hi_[0] = hi_[size]
        _sift_down(hd, hi_, size, 0)


@numba.njit(cache=True, nogil=True, parallel=True)
def _query_batch(points, perm, start, end, left, right, lo, hi, X, k):
    q = X.shape[0]
    out_idx = np.empty((q, k), dtype=np.int64)
    out_d2 = np.empty((q, k))
    for r in numba.prange(q):
        _query_one(points, perm, start, end, left, right, lo, hi,
                   X[r], k, out_idx[r], out_d2[r])
    return out_idx, out_d2


def build(points, leaf_size: int = DEFAULT_LEAF_SIZE) -> KdTree:
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2 or points.shape[0] == 0 or points.shape[1] == 0:
        raise ValueError(f"cannot build a k-d tree over an array of shape {points.shape}")
    if leaf_size < 1:
        raise ValueError("leaf_size must be at least 1")
    n_nodes = _node_count(points.shape[0], int(leaf_size))
    arrays = _build(points, int(leaf_size), n_nodes)
    return KdTree(points, *arrays, leaf_size=int(leaf_size))


def _check_k(tree: KdTree, k: int) -> None:
    if k < 1 or k > tree.n:
        raise ValueError(f"k={k} outside [1, {tree.n}]")


def knn_query_batch(tree: KdTree, X, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(indices, distances)``, each of shape ``(q, k)``."""
    _check_k(tree, k)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != tree.d:
        raise ValueError(f"query dimension {X.shape[1]} != tree dimension {tree.d}")
    idx, d2 = _query_batch(tree.points, tree.perm, tree.start, tree.end, tree.left,
                           tree.right, tree.lo, tree.hi, X, int(k))
    return idx, np.sqrt(d2)


def knn_query(tree: KdTree, x, k: int) -> NeighborList:
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    idx, dist = knn_query_batch(tree, x, k)
    return NeighborList(idx[0], dist[0])
