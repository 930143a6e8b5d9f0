"""Under-bagging k-NN: B under-sampled rounds with uniformly averaged posteriors."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import knn, kdtree
from .dataset import Dataset
from .sampler import (RNG_NAME, SEED_MIXER, AcceptanceRule, SubSample, draw, round_seed,
                      underbag_rule)

FORMAT_VERSION = 1
_MAGIC = "ubknn-model"


@dataclass(frozen=True)
class UnderBagConfig:
    """``s=None`` means the largest admissible value ``M * n_min``."""

    B: int = 10
    k: int = 5
    s: float | None = None
    master_seed: int = 0
    parallel: bool = False
    leaf_size: int = kdtree.DEFAULT_LEAF_SIZE

    def resolve_s(self, ds: Dataset) -> float:
        return float(ds.n_classes * ds.minority_count) if self.s is None else float(self.s)

    def validate(self, ds: Dataset) -> None:
        if self.B < 1:
            raise ValueError("B must be at least 1")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        s = self.resolve_s(ds)
        upper = ds.n_classes * ds.minority_count
        if not 1 <= s <= upper:
            raise ValueError(f"s={s} outside [1, {upper}]")


@dataclass(frozen=True, eq=False)
class UnderBagModel:
    config: UnderBagConfig
    rule: AcceptanceRule
    samples: tuple[SubSample, ...]
    models: tuple[knn.KnnModel | None, ...]
    n_classes: int
    d: int
    fingerprint: str

    @property
    def B(self) -> int:
        return len(self.samples)

    @property
    def k(self) -> int:
        return self.config.k

    @property
    def round_sizes(self) -> np.ndarray:
        return np.array([s.size for s in self.samples], dtype=np.int64)

    def deficiency(self) -> float:
        """Missing posterior mass, identical at every query point."""
        k = self.k
        return float(np.maximum(0, k - self.round_sizes).sum() / (self.B * k))


def _fit_round(ds: Dataset, rule: AcceptanceRule, cfg: UnderBagConfig, b: int):
    sample = draw(ds, rule, round_seed(cfg.master_seed, b))
    if sample.size == 0:
        return sample, None
    return sample, knn.fit(ds, sample.indices, cfg.k, cfg.leaf_size)


def fit(ds: Dataset, cfg: UnderBagConfig) -> UnderBagModel:
    cfg.validate(ds)
    rule = underbag_rule(ds, cfg.resolve_s(ds))
    if cfg.parallel and cfg.B > 1:
        with ThreadPoolExecutor() as pool:
            fitted = list(pool.map(lambda b: _fit_round(ds, rule, cfg, b), range(cfg.B)))
    else:
        fitted = [_fit_round(ds, rule, cfg, b) for b in range(cfg.B)]
    if all(m is None for _, m in fitted):
        raise RuntimeError(f"all {cfg.B} under-sampling rounds came out empty")
    samples, models = zip(*fitted)
    return UnderBagModel(cfg, rule, tuple(samples), tuple(models), ds.n_classes, ds.d,
                         ds.fingerprint())


def vote_counts(model: UnderBagModel, X) -> np.ndarray:
    """Neighbour label counts summed over rounds, shape ``(q, M)``, integer valued."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    total = np.zeros((X.shape[0], model.n_classes), dtype=np.int64)
    for m in model.models:
        if m is not None:
            total += knn.label_counts(knn.neighbor_labels(m, X), model.n_classes)
    return total


def posterior_batch(model: UnderBagModel, X) -> np.ndarray:
    # Integer vote totals make the average exact and independent of round order.
    return vote_counts(model, X) / (model.B * model.k)


def posterior(model: UnderBagModel, x) -> np.ndarray:
    return posterior_batch(model, x)[0]


def classify_batch(model: UnderBagModel, X) -> np.ndarray:
    return knn.argmax_class(posterior_batch(model, X))


def classify(model: UnderBagModel, x) -> int:
    return int(classify_batch(model, x)[0])


def predict_batch(model: UnderBagModel, X) -> tuple[np.ndarray, np.ndarray]:
    probs = posterior_batch(model, X)
    return knn.argmax_class(probs), probs


def posterior_path(model: UnderBagModel, X, ks) -> np.ndarray:
    """Averaged posteriors for each ``k`` in ``ks`` using the rounds of ``model``.

    Every round is searched once with ``max(ks)`` neighbours; the model's own
    ``k`` is ignored.  Shape ``(len(ks), q, M)``.
    """
    ks = [int(k) for k in ks]
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    acc = np.zeros((len(ks), X.shape[0], model.n_classes), dtype=np.int64)
    for m in model.models:
        if m is not None:
            acc += knn.count_path(m, X, ks)
    return acc / (model.B * np.array(ks, dtype=np.float64))[:, None, None]


def save(model: UnderBagModel, path) -> None:
    """Write a replayable model: config, dataset fingerprint and round subsamples."""
    sizes = model.round_sizes
    meta = {
        "magic": _MAGIC,
        "format_version": FORMAT_VERSION,
        "config": asdict(model.config),
        "fingerprint": model.fingerprint,
        "n_classes": model.n_classes,
        "d": model.d,
        "rng": RNG_NAME,
        "seed_mixer": SEED_MIXER,
    }
    with open(path, "wb") as fh:
        np.savez_compressed(
            fh,
            meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
            seeds=np.array([s.round_seed for s in model.samples], dtype=np.uint64),
            sizes=sizes,
            indices=np.concatenate([s.indices for s in model.samples]) if sizes.sum()
            else np.zeros(0, dtype=np.int64),
        )


def load(path, ds: Dataset) -> UnderBagModel:
    """Rebuild a saved model against the dataset it was fitted on."""
    with np.load(Path(path)) as z:
        meta = json.loads(z["meta"].tobytes().decode())
        if meta.get("magic") != _MAGIC:
            raise ValueError(f"{path} is not a saved under-bagging model")
        if meta["format_version"] != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {meta['format_version']}")
        seeds, sizes, flat = z["seeds"], z["sizes"], z["indices"]
    if meta["fingerprint"] != ds.fingerprint():
        raise ValueError("dataset fingerprint does not match the saved model")
    cfg = UnderBagConfig(**meta["config"])
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    samples, models = [], []
    for b in range(len(sizes)):
        sample = SubSample(flat[bounds[b]:bounds[b + 1]].astype(np.int64), int(seeds[b]))
        samples.append(sample)
        models.append(knn.fit(ds, sample.indices, cfg.k, cfg.leaf_size) if sample.size else None)
    rule = underbag_rule(ds, cfg.resolve_s(ds))
    return UnderBagModel(cfg, rule, tuple(samples), tuple(models), ds.n_classes, ds.d,
                         meta["fingerprint"])
