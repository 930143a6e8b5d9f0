"""Labelled tabular data, class statistics and CSV ingestion."""

from __future__ import annotations

import csv
import hashlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MISSING_TOKENS = frozenset({"", "?", "NA", "NaN", "nan", "null"})


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with dense integer labels in ``1..n_classes``.

    ``label_names[m - 1]`` is the original label string of class ``m``.
    """

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    label_names: tuple[str, ...] = ()
    feature_names: tuple[str, ...] = ()
    class_counts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        y = np.asarray(self.labels, dtype=np.int64).ravel()
        if y.shape[0] != X.shape[0]:
            raise DataError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        M = int(self.n_classes)
        if M < 1:
            raise DataError("n_classes must be at least 1")
        if y.size and (y.min() < 1 or y.max() > M):
            raise DataError(f"labels must lie in 1..{M}")
        counts = np.bincount(y, minlength=M + 1)[1:]
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            raise DataError(f"class {empty[0] + 1} has no samples")
        X.setflags(write=False)
        y.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "n_classes", M)
        object.__setattr__(self, "class_counts", counts)
        if not self.label_names:
            object.__setattr__(self, "label_names", tuple(str(m) for m in range(1, M + 1)))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def minority_class(self) -> int:
        return int(np.argmin(self.class_counts)) + 1

    @property
    def minority_count(self) -> int:
        return int(self.class_counts.min())

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[indices], self.labels[indices], self.n_classes,
                       self.label_names, self.feature_names)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.features.shape, dtype=np.int64).tobytes())
        h.update(self.features.tobytes())
        h.update(self.labels.tobytes())
        return h.hexdigest()


def imbalance_ratio(ds: Dataset) -> float:
    """``M * n_min / n``; equals 1 exactly when every class has ``n / M`` rows."""
    return ds.n_classes * ds.minority_count / ds.n


@dataclass(frozen=True)
class PreprocessSpec:
    numeric_impute: str = "mean"
    categorical_impute: str = "mode"
    categorical_encoding: str = "onehot"
    scaling: str = "minmax"
    # None: a column is categorical iff some non-missing cell is not a number
    categorical_columns: tuple | None = None

    def __post_init__(self):
        if self.numeric_impute != "mean":
            raise ValueError(f"unsupported numeric_impute {self.numeric_impute!r}")
        if self.categorical_impute != "mode":
            raise ValueError(f"unsupported categorical_impute {self.categorical_impute!r}")
        if self.categorical_encoding != "onehot":
            raise ValueError(f"unsupported categorical_encoding {self.categorical_encoding!r}")
        if self.scaling not in ("minmax", "none"):
            raise ValueError(f"unsupported scaling {self.scaling!r}")


def minmax_fit(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    return lo, span


def minmax_apply(X: np.ndarray, stats: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    """Scale with precomputed ``(min, max - min)``; constant columns map to 0."""
    lo, span = stats
    safe = np.where(span > 0, span, 1.0)
    out = (X - lo) / safe
    out[:, span <= 0] = 0.0
    return out


def _parse_float(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def _resolve_column(col, names: list[str], width: int) -> int:
    if isinstance(col, str) and not col.lstrip("-").isdigit():
        if col not in names:
            raise DataError(f"column {col!r} not found in header")
        return names.index(col)
    idx = int(col)
    if idx < 0:
        idx += width
    if not 0 <= idx < width:
        raise DataError(f"column index {col} out of range for {width} columns")
    return idx


def load_csv(path, label_column=-1, schema: PreprocessSpec = PreprocessSpec(),
             header: bool | None = None) -> Dataset:
    """Read a comma-separated file into a :class:`Dataset`.

    Labels are re-indexed to ``1..M`` in order of first appearance.  Missing
    numeric cells get the column mean, missing categorical cells the most
    frequent value; categorical columns are one-hot encoded and, with
    ``scaling="minmax"``, every resulting column is scaled to ``[0, 1]``.

    ``header=None`` treats the first row as a header when none of its cells
    parses as a number, or when ``label_column`` is given by name.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh)]
    # keep 1-based file line numbers for error messages
    numbered = [(i + 1, [c.strip() for c in r]) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    if not numbered:
        raise DataError(f"{path} is empty")

    first = numbered[0][1]
    if header is None:
        header = (isinstance(label_column, str) and not label_column.lstrip("-").isdigit()) or all(
            _parse_float(c) is None for c in first)
    width = len(first)
    if header:
        names = first
        body = numbered[1:]
    else:
        names = [f"x{j}" for j in range(width)]
        body = numbered
    for lineno, row in body:
        if len(row) != width:
            raise DataError(f"row {lineno}: expected {width} fields, got {len(row)}")
    if not body:
        raise DataError(f"{path} has no data rows")

    y_col = _resolve_column(label_column, names, width)
    raw_labels = []
    for lineno, row in body:
        if row[y_col] in MISSING_TOKENS:
            raise DataError(f"row {lineno}: missing label")
        raw_labels.append(row[y_col])
    label_names = tuple(dict.fromkeys(raw_labels))
    if len(label_names) < 2:
        raise DataError("need at least 2 distinct labels, found "
                        f"{len(label_names)}")
    code = {name: m for m, name in enumerate(label_names, start=1)}
    labels = np.array([code[v] for v in raw_labels], dtype=np.int64)

    forced_cat = None
    if schema.categorical_columns is not None:
        forced_cat = {_resolve_column(c, names, width) for c in schema.categorical_columns}

    blocks: list[np.ndarray] = []
    feature_names: list[str] = []
    for j in range(width):
        if j == y_col:
            continue
        cells = [(lineno, row[j]) for lineno, row in body]
        present = [(ln, c) for ln, c in cells if c not in MISSING_TOKENS]
        parsed = [(ln, _parse_float(c)) for ln, c in present]
        if forced_cat is not None:
            is_cat = j in forced_cat
            if not is_cat:
                for ln, v in parsed:
                    if v is None:
                        raise DataError(f"row {ln}: non-numeric value in numeric column {names[j]!r}")
        else:
            is_cat = any(v is None for _, v in parsed)

        if not is_cat:
            values = np.array([v for _, v in parsed], dtype=np.float64)
            fill = float(values.mean()) if values.size else 0.0
            col = np.array([fill if c in MISSING_TOKENS else float(c) for _, c in cells])
            if not np.all(np.isfinite(col)):
                bad = next(ln for (ln, _), v in zip(cells, col) if not np.isfinite(v))
                raise DataError(f"row {bad}: non-finite value in column {names[j]!r}")
            blocks.append(col[:, None])
            feature_names.append(names[j])
        else:
            counts = Counter(c for _, c in present)
            levels = list(dict.fromkeys(c for _, c in present))
            if not levels:
                continue
            # most frequent, ties to first appearance
            mode = max(levels, key=lambda v: (counts[v], -levels.index(v)))
            filled = [mode if c in MISSING_TOKENS else c for _, c in cells]
            onehot = np.zeros((len(filled), len(levels)))
            pos = {v: i for i, v in enumerate(levels)}
            for r, v in enumerate(filled):
                onehot[r, pos[v]] = 1.0
            blocks.append(onehot)
            feature_names.extend(f"{names[j]}={v}" for v in levels)

    X = np.hstack(blocks) if blocks else np.zeros((len(body), 0))
    if X.shape[1] == 0:
        raise DataError("no feature columns")
    if schema.scaling == "minmax":
        X = minmax_apply(X, minmax_fit(X))
    return Dataset(X, labels, len(label_names), label_names, tuple(feature_names))


def save_csv(ds: Dataset, path) -> None:
    """Write features plus a trailing ``label`` column holding original label names."""
    path = Path(path)
    names = list(ds.feature_names) or [f"x{j}" for j in range(ds.d)]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*names, "label"])
        for row, y in zip(ds.features, ds.labels):
            w.writerow([*(repr(float(v)) for v in row), ds.label_names[y - 1]])


def stratified_kfold(ds: Dataset, folds: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Partition row indices into ``folds`` class-stratified test folds.

    Each class is shuffled and dealt round-robin, so per-class fold sizes
    differ by at most one.
    """
    if folds < 2:
        raise ValueError("folds must be at least 2")
    small = np.flatnonzero(ds.class_counts < folds)
    if small.size:
        m = small[0] + 1
        raise DataError(f"class {m} has {ds.class_counts[m - 1]} samples, fewer than {folds} folds")
    rng = np.random.Generator(np.random.PCG64(seed))
    fold_of = np.empty(ds.n, dtype=np.int64)
    offset = 0
    for m in range(1, ds.n_classes + 1):
        members = np.flatnonzero(ds.labels == m)
        members = members[rng.permutation(members.size)]
        # rotate the dealing start so small folds are not always the last ones
        fold_of[members] = (np.arange(members.size) + offset) % folds
        offset += members.size
    out = []
    for f in range(folds):
        test = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        out.append((train, test))
    return out

