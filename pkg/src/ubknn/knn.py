"""k-NN posterior estimation and classification over a subset of a dataset.

When the indexed subset holds fewer than ``k`` rows, every available
neighbour still carries weight ``1/k`` and the posterior is left deficient
(total mass ``size / k``) instead of being renormalised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kdtree
from .dataset import Dataset


@dataclass(frozen=True, eq=False)
class KnnModel:
    tree: kdtree.KdTree
    indices: np.ndarray
    labels: np.ndarray
    k: int
    n_classes: int

    @property
    def size(self) -> int:
        return int(self.indices.size)

    @property
    def k_eff(self) -> int:
        return min(self.k, self.size)


def fit(ds: Dataset, indices=None, k: int = 1, leaf_size: int = kdtree.DEFAULT_LEAF_SIZE) -> KnnModel:
    if k < 1:
        raise ValueError("k must be at least 1")
    if indices is None:
        indices = np.arange(ds.n)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ValueError("cannot fit k-NN on an empty index set")
    tree = kdtree.build(ds.features[indices], leaf_size)
    return KnnModel(tree, indices, ds.labels[indices], int(k), ds.n_classes)


def _as_queries(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return X.reshape(1, -1) if X.ndim == 1 else X


def neighbor_labels(model: KnnModel, X, k: int | None = None) -> np.ndarray:
    """Labels of the first ``min(k, size)`` neighbours, nearest first, shape ``(q, k_eff)``."""
    k = model.k if k is None else k
    idx, _ = kdtree.knn_query_batch(model.tree, _as_queries(X), min(k, model.size))
    return model.labels[idx]


def label_counts(nbr_labels: np.ndarray, n_classes: int) -> np.ndarray:
    return np.stack([(nbr_labels == m).sum(axis=1) for m in range(1, n_classes + 1)], axis=1)


def posterior_batch(model: KnnModel, X) -> np.ndarray:
    counts = label_counts(neighbor_labels(model, X), model.n_classes)
    return counts / model.k


def posterior(model: KnnModel, x) -> np.ndarray:
    return posterior_batch(model, x)[0]


def count_path(model: KnnModel, X, ks) -> np.ndarray:
    """Neighbour label counts for several ``k`` from one search, shape ``(len(ks), q, M)``.

    Relies on the k-neighbour list being a prefix of the (k+1)-neighbour list.
    """
    ks = [int(k) for k in ks]
    nbr = neighbor_labels(model, X, max(ks))
    onehot = np.stack([nbr == m for m in range(1, model.n_classes + 1)], axis=2)
    cum = np.cumsum(onehot, axis=1, dtype=np.int64)
    return np.stack([cum[:, min(k, model.size) - 1, :] for k in ks])


def posterior_path(model: KnnModel, X, ks) -> np.ndarray:
    ks = np.asarray(ks, dtype=np.float64)
    return count_path(model, X, ks.astype(np.int64)) / ks[:, None, None]


def argmax_class(probs: np.ndarray) -> np.ndarray:
    """Class id (1-based) of the largest entry; ties go to the smallest id."""
    return np.argmax(probs, axis=-1) + 1


def classify_batch(model: KnnModel, X) -> np.ndarray:
    return argmax_class(posterior_batch(model, X))


def classify(model: KnnModel, x) -> int:
    return int(classify_batch(model, x)[0])
