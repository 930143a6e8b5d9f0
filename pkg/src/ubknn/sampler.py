"""Per-class Bernoulli acceptance sampling for under-sampling and under-bagging."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset

RNG_NAME = "numpy.PCG64"
SEED_MIXER = "splitmix64"

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def round_seed(master_seed: int, round_index: int) -> int:
    """64-bit seed for one bagging round, independent of every other round's stream."""
    return _mix64(_mix64(master_seed) + (round_index + 1) * _GOLDEN)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class AcceptanceRule:
    """Acceptance probability ``per_class_prob[m - 1]`` for rows of class ``m``."""

    per_class_prob: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.per_class_prob, dtype=np.float64)
        if a.ndim != 1 or not np.all((a > 0) & (a <= 1)):
            raise ValueError(f"acceptance probabilities must lie in (0, 1], got {a}")
        object.__setattr__(self, "per_class_prob", a)

    def row_probs(self, labels: np.ndarray) -> np.ndarray:
        return self.per_class_prob[np.asarray(labels) - 1]

    def expected_size(self, ds: Dataset) -> float:
        return float(self.per_class_prob @ ds.class_counts)


@dataclass(frozen=True, eq=False)
class SubSample:
    indices: np.ndarray
    round_seed: int

    @property
    def size(self) -> int:
        return int(self.indices.size)


def undersample_rule(ds: Dataset) -> AcceptanceRule:
    """Keep every minority row; thin class ``m`` to ``n_min / n_m``."""
    counts = ds.class_counts.astype(np.float64)
    return AcceptanceRule(counts.min() / counts)


def underbag_rule(ds: Dataset, s: float) -> AcceptanceRule:
    """Acceptance ``s / (M n_m)``: each class contributes ``s / M`` rows in expectation."""
    M = ds.n_classes
    upper = M * ds.minority_count
    if not 1 <= s <= upper:
        raise ValueError(f"expected subsample size s={s} outside [1, {upper}]")
    return AcceptanceRule(s / (M * ds.class_counts.astype(np.float64)))


def draw(ds: Dataset, rule: AcceptanceRule, seed: int) -> SubSample:
    """Accept row ``i`` independently with probability ``a[label_i]``.

    One uniform variate is consumed per row in row order, so the accepted set
    depends only on ``(labels, rule, seed)``.  An empty result is legal.
    """
    if rule.per_class_prob.size != ds.n_classes:
        raise ValueError("rule and dataset disagree on the number of classes")
    u = make_rng(seed).random(ds.n)
    keep = np.flatnonzero(u < rule.row_probs(ds.labels))
    return SubSample(keep, int(seed))
