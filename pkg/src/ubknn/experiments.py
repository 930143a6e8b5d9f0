"""Experiment protocols shared by the CLI and the acceptance suite.

Three methods are compared:

``knn``
    standard k-NN on all training rows;
``undersample-knn``
    one under-sampled round keeping every minority row (``B = 1``, ``s = M n_min``);
``underbag-knn``
    ``B`` rounds with expected subsample size ``s = s_frac * M n_min``.

``k`` is either given or tuned by stratified cross-validation on the
training rows, maximising the AM measure.  A single neighbour search with the
largest candidate ``k`` serves every candidate because neighbour lists are
nested.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import ensemble, knn, params
from .dataset import Dataset, imbalance_ratio, minmax_apply, minmax_fit, stratified_kfold
from .metrics import EvalReport, evaluate, stopwatch
from .sampler import RNG_NAME, SEED_MIXER, draw, round_seed, undersample_rule

METHODS = ("knn", "undersample-knn", "underbag-knn")
DEFAULT_K_GRID = tuple(range(1, 31))


# Keeps experiment-level seeds apart from the bagging round seeds of the same master.
_DERIVE_DOMAIN = 0x6A09E667F3BCC909


def derive_seed(seed: int, *tags: int) -> int:
    for t in tags:
        seed = round_seed(seed ^ _DERIVE_DOMAIN, t)
    return seed


@dataclass(frozen=True)
class MethodSpec:
    """How to fit one method.  ``k=None`` tunes ``k`` over ``k_grid``."""

    method: str = "underbag-knn"
    k: int | None = None
    B: int = 5
    s_frac: float = 1.0
    s: float | None = None
    k_grid: tuple[int, ...] = DEFAULT_K_GRID
    tune_folds: int = 5
    auto_params: bool = False
    alpha: float = 1.0
    parallel: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not 0 < self.s_frac <= 1:
            raise ValueError(f"s_frac must lie in (0, 1], got {self.s_frac}")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be at least 1")
        if self.B < 1:
            raise ValueError("B must be at least 1")
        if not self.k_grid or min(self.k_grid) < 1:
            raise ValueError("k_grid must hold positive integers")


class Fitted:
    """Uniform prediction interface over a plain k-NN model or an under-bagging model."""

    def __init__(self, model, n_classes: int):
        self.model = model
        self.n_classes = n_classes

    @property
    def k(self) -> int:
        return self.model.k

    def posterior_path(self, X, ks) -> np.ndarray:
        if isinstance(self.model, knn.KnnModel):
            return knn.posterior_path(self.model, X, ks)
        return ensemble.posterior_path(self.model, X, ks)

    def posterior(self, X) -> np.ndarray:
        if isinstance(self.model, knn.KnnModel):
            return knn.posterior_batch(self.model, X)
        return ensemble.posterior_batch(self.model, X)

    def predict(self, X) -> np.ndarray:
        return knn.argmax_class(self.posterior(X))


def _s_of(ds: Dataset, spec: MethodSpec) -> float:
    upper = ds.n_classes * ds.minority_count
    if spec.s is not None:
        return float(spec.s)
    return max(1.0, spec.s_frac * upper)


def auto_choice(ds: Dataset, spec: MethodSpec, seed: int) -> params.ParamChoice:
    """Theory-driven ``(k, s, B)`` for ``ds``; constants taken as 1."""
    smooth = params.SmoothnessSpec(ds.d, spec.alpha)
    upper = ds.n_classes * ds.minority_count
    if spec.method == "knn":
        return params.ParamChoice(params.choose_undersampling_k(ds.n, smooth), ds.n, 1, "standard")
    if spec.method == "undersample-knn":
        accepted = draw(ds, undersample_rule(ds), round_seed(seed, 0)).size
        return params.ParamChoice(params.choose_undersampling_k(max(accepted, 3), smooth), upper, 1,
                                  params.UNDERSAMPLING)
    return params.choose_underbagging(ds.n, imbalance_ratio(ds), smooth)


def fit_method(ds: Dataset, spec: MethodSpec, k: int, seed: int) -> Fitted:
    if spec.method == "knn":
        return Fitted(knn.fit(ds, None, k), ds.n_classes)
    if spec.method == "undersample-knn":
        cfg = ensemble.UnderBagConfig(B=1, k=k, s=None, master_seed=seed)
    else:
        cfg = ensemble.UnderBagConfig(B=spec.B, k=k, s=_s_of(ds, spec), master_seed=seed,
                                      parallel=spec.parallel)
    return Fitted(ensemble.fit(ds, cfg), ds.n_classes)


def tune_k(ds: Dataset, spec: MethodSpec, seed: int) -> tuple[int, dict[int, float]]:
    """Pick ``k`` from ``spec.k_grid`` by mean validation AM; ties go to the smaller ``k``."""
    ks = sorted(set(int(k) for k in spec.k_grid))
    folds = stratified_kfold(ds, spec.tune_folds, derive_seed(seed, 101))
    am = np.zeros(len(ks))
    for f, (tr, va) in enumerate(folds):
        train = ds.subset(tr)
        fitted = fit_method(train, spec, max(ks), derive_seed(seed, 102, f))
        path = fitted.posterior_path(ds.features[va], ks)
        y = ds.labels[va]
        for t in range(len(ks)):
            am[t] += evaluate(y, knn.argmax_class(path[t]), ds.n_classes).am
    am /= len(folds)
    best = int(np.argmax(am))
    return ks[best], dict(zip(ks, am.tolist()))


def run_method(train: Dataset, test: Dataset, spec: MethodSpec, seed: int) -> EvalReport:
    """Tune (if asked), fit on ``train``, evaluate on ``test``; timings cover fit and predict only."""
    extra: dict = {"method": spec.method}
    fit_spec = spec
    with stopwatch() as tune_time:
        if spec.auto_params:
            choice = auto_choice(train, spec, seed)
            k = choice.k
            if spec.method == "underbag-knn":
                fit_spec = replace(spec, B=choice.B, s=float(choice.s))
            extra["auto_params"] = asdict(choice)
        elif spec.k is None:
            k, curve = tune_k(train, spec, seed)
            extra["tuning_am"] = {str(kk): v for kk, v in curve.items()}
        else:
            k = spec.k
    with stopwatch() as fit_time:
        fitted = fit_method(train, fit_spec, k, seed)
    with stopwatch() as predict_time:
        pred = fitted.predict(test.features)
    report = evaluate(test.labels, pred, test.n_classes)
    report.fit_seconds = fit_time[0]
    report.predict_seconds = predict_time[0]
    extra["k"] = int(k)
    if spec.method != "knn":
        model = fitted.model
        extra["B"] = model.B
        extra["s"] = float(model.config.resolve_s(train))
    extra["tune_seconds"] = tune_time[0]
    report.extra = extra
    return report


def scaled_split(ds: Dataset, train_idx, test_idx, scale: bool) -> tuple[Dataset, Dataset]:
    """Split rows; with ``scale`` the min-max statistics come from the training rows only."""
    train = ds.subset(train_idx)
    test = ds.subset(test_idx)
    if scale:
        stats = minmax_fit(train.features)
        train = Dataset(minmax_apply(train.features, stats), train.labels, ds.n_classes,
                        ds.label_names, ds.feature_names)
        test = Dataset(minmax_apply(test.features, stats), test.labels, ds.n_classes,
                       ds.label_names, ds.feature_names)
    return train, test


@dataclass
class CVResult:
    reports: list[EvalReport]
    rows: list[dict] = field(default_factory=list)

    def summary(self) -> dict:
        out = {}
        for key in ("am", "balanced_risk", "accuracy", "fit_seconds", "predict_seconds"):
            vals = np.array([getattr(r, key) for r in self.reports], dtype=np.float64)
            out[f"{key}_mean"] = float(vals.mean())
            out[f"{key}_sd"] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        return out


def cross_validate(ds: Dataset, spec: MethodSpec, folds: int = 10, repeats: int = 2,
                   seed: int = 0, scale: bool = True) -> CVResult:
    reports, rows = [], []
    for r in range(repeats):
        splits = stratified_kfold(ds, folds, derive_seed(seed, 1, r))
        for f, (tr, te) in enumerate(splits):
            train, test = scaled_split(ds, tr, te, scale)
            rep = run_method(train, test, spec, derive_seed(seed, 2, r, f))
            reports.append(rep)
            rows.append({"repeat": r, "fold": f, "method": spec.method, "k": rep.extra["k"],
                         **rep.csv_row()})
    return CVResult(reports, rows)


def bagging_sweep(train: Dataset, test: Dataset, Bs, ks, s: float | None, seed: int) -> np.ndarray:
    """Test AM for every ``(B, k)`` pair, shape ``(len(Bs), len(ks))``.

    Rounds are nested: the model with ``B`` rounds is the first ``B`` rounds of
    the model with ``max(Bs)`` rounds, so one fit serves the whole grid.
    """
    Bs = sorted(int(b) for b in Bs)
    ks = [int(k) for k in ks]
    cfg = ensemble.UnderBagConfig(B=max(Bs), k=max(ks), s=s, master_seed=seed)
    model = ensemble.fit(train, cfg)
    acc = np.zeros((len(ks), test.n, train.n_classes), dtype=np.int64)
    out = np.zeros((len(Bs), len(ks)))
    row = 0
    for b, m in enumerate(model.models, start=1):
        if m is not None:
            acc += knn.count_path(m, test.features, ks)
        if b in Bs:
            for t in range(len(ks)):
                out[row, t] = evaluate(test.labels, knn.argmax_class(acc[t]), train.n_classes).am
            row += 1
    return out


def fit_line(x, y) -> tuple[float, float]:
    """Least-squares slope and intercept."""
    slope, intercept = np.polyfit(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64), 1)
    return float(slope), float(intercept)


def time_fit_predict(train: Dataset, X_test, spec: MethodSpec, k: int, seed: int) -> tuple[float, float]:
    with stopwatch() as fit_time:
        fitted = fit_method(train, spec, k, seed)
    with stopwatch() as predict_time:
        fitted.predict(X_test)
    return fit_time[0], predict_time[0]


def provenance(extra: dict | None = None) -> dict:
    from . import __version__
    meta = {"package": "ubknn", "version": __version__, "rng": RNG_NAME, "seed_mixer": SEED_MIXER}
    if extra:
        meta.update(extra)
    return meta


def log_log_slope(ns, seconds) -> float:
    return fit_line([math.log(n) for n in ns], [math.log(max(t, 1e-9)) for t in seconds])[0]
