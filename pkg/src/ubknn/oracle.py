"""Independent reference computations used to check the fast paths.

* brute-force nearest neighbours (full scan, same tie rule as the k-d tree);
* the Generalized Pascal distribution, i.e. the trial index of the j-th
  success in independent Bernoulli trials with unequal success probabilities,
  computed by a forward recursion over partial success counts;
* the exact infinite-bagging neighbour weights it induces;
* posteriors and Bayes rules for synthetic distributions with known ``eta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .dataset import Dataset
from .kdtree import NeighborList
from .sampler import AcceptanceRule


def squared_distances(points, x) -> np.ndarray:
    """Squared Euclidean distances, summed coordinate by coordinate in order."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    x = np.asarray(x, dtype=np.float64).ravel()
    d2 = np.zeros(points.shape[0])
    for j in range(points.shape[1]):
        diff = points[:, j] - x[j]
        d2 = d2 + diff * diff
    return d2


def neighbor_order(points, x) -> tuple[np.ndarray, np.ndarray]:
    """All point ids sorted by ``(distance, id)`` together with their squared distances."""
    d2 = squared_distances(points, x)
    order = np.lexsort((np.arange(d2.size), d2))
    return order, d2[order]


def brute_knn(points, x, k: int) -> NeighborList:
    n = np.asarray(points).shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    order, d2 = neighbor_order(points, x)
    return NeighborList(order[:k], np.sqrt(d2[:k]))


# -- Generalized Pascal distribution ----------------------------------------

@dataclass(frozen=True, eq=False)
class GPParams:
    probs: np.ndarray
    j: int

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or not np.all((p > 0) & (p <= 1)):
            raise ValueError("success probabilities must lie in (0, 1]")
        if self.j < 1:
            raise ValueError("j must be at least 1")
        object.__setattr__(self, "probs", p)


def count_distribution(probs, max_count: int) -> np.ndarray:
    """``out[i, c] = P(first i trials give exactly c successes)`` for ``c < max_count``.

    Shape ``(n + 1, max_count)``; row 0 is the empty prefix.
    """
    probs = np.asarray(probs, dtype=np.float64)
    out = np.zeros((probs.size + 1, max_count))
    out[0, 0] = 1.0
    for i, p in enumerate(probs):
        prev = out[i]
        cur = out[i + 1]
        cur[:] = prev * (1.0 - p)
        cur[1:] += prev[:-1] * p
    return out


def gp_pmf_all(params: GPParams) -> np.ndarray:
    """``f[i - 1] = P(j-th success at trial i)`` for ``i = 1..n``."""
    j = params.j
    dist = count_distribution(params.probs, j)
    # j-th success at trial i  <=>  trial i succeeds and exactly j-1 of the first i-1 did
    f = params.probs * dist[:-1, j - 1]
    f[: j - 1] = 0.0
    return f


def gp_pmf(params: GPParams, i: int) -> float:
    """Probability that the ``j``-th success happens at trial ``i`` (1-based)."""
    n = params.probs.size
    if i < params.j:
        return 0.0
    if i > n:
        raise ValueError(f"trial index {i} beyond the {n} given probabilities")
    return float(gp_pmf_all(params)[i - 1])


def gp_tail(params: GPParams, ell: int) -> float:
    """``P(trial of the j-th success > ell) = P(fewer than j successes in ell trials)``."""
    dist = count_distribution(params.probs[:ell], params.j)
    return float(dist[ell].sum())


def gp_tail_bound(params: GPParams, ell: int) -> float:
    """``exp(-(sum_{i<=ell} p_i - j)^2 / (2 ell))``; only valid when the prefix sum is at least ``j``."""
    total = float(params.probs[:ell].sum())
    if total < params.j:
        raise ValueError("tail bound requires sum of the first ell probabilities >= j")
    return math.exp(-((total - params.j) ** 2) / (2 * ell))


def negative_binomial_pmf(i: int, j: int, p: float) -> float:
    """Closed form for equal success probabilities: ``C(i-1, j-1) p^j (1-p)^(i-j)``."""
    if i < j:
        return 0.0
    return math.comb(i - 1, j - 1) * p ** j * (1 - p) ** (i - j)


# -- infinite bagging ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BaggedWeights:
    """Expected neighbour weights over the sampling randomness.

    ``vbar[i]`` belongs to the (i+1)-th nearest point, whose dataset row is
    ``order[i]``.  ``deficiency`` is ``1 - vbar.sum()`` computed without
    cancellation.
    """

    vbar: np.ndarray
    order: np.ndarray
    deficiency: float


def bagged_weights_from_probs(probs, k: int) -> tuple[np.ndarray, float]:
    probs = np.asarray(probs, dtype=np.float64)
    n = probs.size
    dist = count_distribution(probs, k)
    # sum_j f_GP(i; j) = p_i * P(S_{i-1} <= k-1); factoring p_i out keeps vbar_i <= p_i / k in floats
    below_k = np.minimum(dist[:-1].sum(axis=1), 1.0)
    vbar = probs * below_k / k
    # 1 - sum(vbar) = (1/k) sum_j P(S_n < j) = sum_c (k - c)/k P(S_n = c)
    c = np.arange(k)
    deficiency = float(((k - c) / k * dist[n]).sum())
    return vbar, deficiency


def exact_bagged_weights(ds: Dataset, rule: AcceptanceRule, x, k: int) -> BaggedWeights:
    if not 1 <= k <= ds.n:
        raise ValueError(f"k={k} outside [1, {ds.n}]")
    order, _ = neighbor_order(ds.features, x)
    probs = rule.row_probs(ds.labels[order])
    vbar, deficiency = bagged_weights_from_probs(probs, k)
    return BaggedWeights(vbar, order, deficiency)


def infinite_bag_posterior(ds: Dataset, rule: AcceptanceRule, x, k: int) -> np.ndarray:
    """Limit of the under-bagging posterior as the number of rounds grows without bound."""
    w = exact_bagged_weights(ds, rule, x, k)
    labels = ds.labels[w.order]
    return np.array([w.vbar[labels == m].sum() for m in range(1, ds.n_classes + 1)])


def weighted_round_posterior(ds: Dataset, accepted, x, k: int) -> np.ndarray:
    """One round's posterior written as a weighted k-NN over the full dataset.

    The i-th nearest point of the full data gets weight ``1/k`` when it was
    accepted and at most ``k`` accepted points are at least as near, and 0
    otherwise.  Arithmetic is exact (rationals) and rounded once at the end.
    """
    accepted_mask = np.zeros(ds.n, dtype=bool)
    accepted_mask[np.asarray(accepted, dtype=np.int64)] = True
    order, _ = neighbor_order(ds.features, x)
    z = accepted_mask[order]
    running = np.cumsum(z)
    weight = Fraction(1, k)
    total = [Fraction(0)] * ds.n_classes
    for i in range(ds.n):
        if z[i] and running[i] <= k:
            total[ds.labels[order[i]] - 1] += weight
    return np.array([float(t) for t in total])


def simulate_bagged_weights(probs, k: int, rounds: int, rng: np.random.Generator,
                            chunk: int = 20000) -> tuple[np.ndarray, np.ndarray]:
    """Monte-Carlo mean and standard error of the round weights ``V_i``."""
    probs = np.asarray(probs, dtype=np.float64)
    total = np.zeros(probs.size)
    total_sq = np.zeros(probs.size)
    done = 0
    while done < rounds:
        m = min(chunk, rounds - done)
        z = rng.random((m, probs.size)) < probs
        v = (z & (np.cumsum(z, axis=1) <= k)) / k
        total += v.sum(axis=0)
        total_sq += (v * v).sum(axis=0)
        done += m
    mean = total / rounds
    var = np.maximum(total_sq / rounds - mean ** 2, 0.0)
    return mean, np.sqrt(var / rounds)


# -- synthetic ground truth -------------------------------------------------------

def weighted_posterior(eta, pi) -> np.ndarray:
    """Prior-reweighted posterior ``(eta_m / pi_m) / sum_j (eta_j / pi_j)``, along the last axis."""
    r = np.asarray(eta, dtype=np.float64) / np.asarray(pi, dtype=np.float64)
    return r / r.sum(axis=-1, keepdims=True)


def undersampled_posterior(eta, class_counts) -> np.ndarray:
    """Posterior after thinning each class to the minority count."""
    r = np.asarray(eta, dtype=np.float64) / np.asarray(class_counts, dtype=np.float64)
    return r / r.sum(axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class SyntheticTruth:
    """Known posterior ``eta`` (vectorised over rows of ``X``) and class priors ``pi``."""

    eta: Callable[[np.ndarray], np.ndarray]
    pi: np.ndarray

    @property
    def n_classes(self) -> int:
        return len(self.pi)

    def eta_w(self, X) -> np.ndarray:
        return weighted_posterior(self.eta(np.atleast_2d(X)), self.pi)

    def bayes_balanced(self, X) -> np.ndarray:
        """Minimiser of the balanced risk: argmax of ``eta_m / pi_m``, ties to the smallest id."""
        ratios = self.eta(np.atleast_2d(X)) / np.asarray(self.pi)
        return np.argmax(ratios, axis=-1) + 1


def bayes_balanced_classify(truth: SyntheticTruth, x) -> int:
    return int(truth.bayes_balanced(np.atleast_2d(x))[0])


def am_regret(truth: SyntheticTruth, classifier, X) -> tuple[float, float]:
    """AM regret of ``classifier`` against the balanced Bayes rule, with its standard error.

    ``X`` is a sample from the feature marginal.  Recall of class ``m`` is
    ``E[eta_m(X) 1{f(X) = m}] / pi_m``, so the regret is the mean over ``X`` of
    ``(eta_f*(x) / pi_f*(x) - eta_f(x) / pi_f(x)) / M``, a non-negative
    per-point quantity that uses the known ``eta`` instead of sampled labels.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    ratios = truth.eta(X) / np.asarray(truth.pi)
    rows = np.arange(X.shape[0])
    best = ratios[rows, truth.bayes_balanced(X) - 1]
    got = ratios[rows, np.asarray(classifier(X), dtype=np.int64) - 1]
    gap = (best - got) / truth.n_classes
    return float(gap.mean()), float(gap.std(ddof=1) / math.sqrt(gap.size))
