"""Tabular dataset ingestion, normalization and stratified splitting."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

NORMALIZATION_MODES = ("min-max-symmetric", "z-score-clipped")

# z-score mode clips at this many standard deviations before rescaling to [-1, 1]
ZSCORE_CLIP = 3.0


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class NormStats:
    """Per-column affine normalization ``(x - shift) / scale``.

    A ``scale`` of zero marks a constant column, which always maps to 0.
    """

    mode: str
    shift: np.ndarray
    scale: np.ndarray

    def apply(self, X, clip=True):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.shift.shape[0]:
            raise DatasetError(
                f"expected {self.shift.shape[0]} input columns, got {X.shape[-1]}"
            )
        safe = np.where(self.scale == 0.0, 1.0, self.scale)
        Z = (X - self.shift) / safe
        Z = np.where(self.scale == 0.0, 0.0, Z)
        if clip:
            Z = np.clip(Z, -1.0, 1.0)
        return Z

    def to_dict(self):
        return {
            "mode": self.mode,
            "shift": [float(v) for v in self.shift],
            "scale": [float(v) for v in self.scale],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            mode=d["mode"],
            shift=np.asarray(d["shift"], dtype=float),
            scale=np.asarray(d["scale"], dtype=float),
        )


@dataclass(frozen=True)
class Dataset:
    """Labeled samples, ``N`` rows by ``d`` columns.

    ``index`` holds the row ids of the samples in the file they were loaded
    from, so that splits and subsamples can always be traced back.
    """

    samples: np.ndarray
    labels: np.ndarray
    column_names: tuple = ()
    norm_stats: NormStats | None = None
    index: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.asarray(self.samples, dtype=float)
        y = np.asarray(self.labels, dtype=int)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DatasetError(f"samples must be a non-empty 2-D matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DatasetError("labels must have one entry per sample row")
        idx = np.arange(X.shape[0]) if self.index is None else np.asarray(self.index, dtype=int)
        if idx.shape != y.shape:
            raise DatasetError("index must have one entry per sample row")
        X.setflags(write=False)
        y.setflags(write=False)
        idx.setflags(write=False)
        object.__setattr__(self, "samples", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "index", idx)
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def n_features(self):
        return self.samples.shape[1]

    @property
    def classes(self):
        return np.unique(self.labels)

    def class_counts(self):
        classes, counts = np.unique(self.labels, return_counts=True)
        return {int(c): int(n) for c, n in zip(classes, counts)}

    def take(self, rows):
        rows = np.asarray(rows, dtype=int)
        return replace(
            self, samples=self.samples[rows], labels=self.labels[rows], index=self.index[rows]
        )


def load_dataset(path, label_column) -> Dataset:
    """Read a comma-separated numeric table with one header row.

    ``label_column`` is either a header name or a zero-based column position.
    Label values must be integers (``"1"`` and ``"1.0"`` are both accepted).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DatasetError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DatasetError(f"{path}: no data rows after the header")

    if isinstance(label_column, int) or (isinstance(label_column, str) and label_column.isdigit()
                                         and label_column not in header):
        label_idx = int(label_column)
        if not 0 <= label_idx < len(header):
            raise DatasetError(f"{path}: label column {label_idx} out of range")
    else:
        if label_column not in header:
            raise DatasetError(f"{path}: label column {label_column!r} not found in header {header}")
        label_idx = header.index(label_column)

    feature_idx = [j for j in range(len(header)) if j != label_idx]
    if not feature_idx:
        raise DatasetError(f"{path}: no feature columns besides the label")

    X = np.empty((len(body), len(feature_idx)))
    y = np.empty(len(body), dtype=int)
    for i, row in enumerate(body):
        # row numbers in messages are 1-based file lines, header is line 1
        line = i + 2
        if len(row) != len(header):
            raise DatasetError(
                f"{path}: line {line} has {len(row)} fields, header has {len(header)}"
            )
        for k, j in enumerate(feature_idx):
            try:
                X[i, k] = float(row[j])
            except ValueError:
                raise DatasetError(
                    f"{path}: non-numeric value {row[j]!r} at line {line}, column {header[j]!r}"
                ) from None
            if not np.isfinite(X[i, k]):
                raise DatasetError(
                    f"{path}: non-finite value at line {line}, column {header[j]!r}"
                )
        try:
            label = float(row[label_idx])
        except ValueError:
            raise DatasetError(
                f"{path}: non-numeric label {row[label_idx]!r} at line {line}"
            ) from None
        if label != int(label):
            raise DatasetError(f"{path}: label {row[label_idx]!r} at line {line} is not an integer")
        y[i] = int(label)

    return Dataset(X, y, column_names=tuple(header[j] for j in feature_idx))


def save_dataset(ds: Dataset, path, label_name="label"):
    names = ds.column_names or tuple(f"x{j}" for j in range(ds.n_features))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, label_name])
        for x, y in zip(ds.samples, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def fit_norm_stats(X, mode="min-max-symmetric") -> NormStats:
    X = np.asarray(X, dtype=float)
    if mode == "min-max-symmetric":
        lo, hi = X.min(axis=0), X.max(axis=0)
        shift = (hi + lo) / 2.0
        scale = (hi - lo) / 2.0
    elif mode == "z-score-clipped":
        shift = X.mean(axis=0)
        scale = ZSCORE_CLIP * X.std(axis=0)
    else:
        raise ValueError(f"unknown normalization mode {mode!r}; expected one of {NORMALIZATION_MODES}")
    # exact-constant columns only; anything with spread keeps its scale
    scale = np.where(X.max(axis=0) == X.min(axis=0), 0.0, scale)
    return NormStats(mode, shift, scale)


def normalize(ds: Dataset, mode="min-max-symmetric") -> Dataset:
    """Map every column into [-1, 1] and record the transform.

    min-max-symmetric sends the column minimum to -1 and maximum to +1.
    z-score-clipped standardizes (population std), clips at +-3 sigma and
    divides by 3. Constant columns become 0 in both modes. A dataset that
    already carries normalization stats is returned unchanged.
    """
    if ds.norm_stats is not None:
        return ds
    stats = fit_norm_stats(ds.samples, mode)
    return replace(ds, samples=stats.apply(ds.samples), norm_stats=stats)


def apply_normalization(ds: Dataset, stats: NormStats) -> Dataset:
    """Normalize unseen raw samples with previously fitted stats."""
    if ds.norm_stats is not None:
        return ds
    return replace(ds, samples=stats.apply(ds.samples), norm_stats=stats)


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie strictly between 0 and 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


class SplitWarning(UserWarning):
    pass


def split(ds: Dataset, spec: SplitSpec):
    """Stratified train/test split; returns ``(train, test)``.

    Each class with at least two samples contributes ``round(f * N_c)``
    test rows, clamped so that train and test both get at least one. A class
    with a single sample is kept in train and reported through a
    :class:`SplitWarning`.
    """
    if ds.n_samples < 2:
        raise DatasetError("split needs at least two samples")
    rng = np.random.default_rng(spec.seed)
    train_rows, test_rows = [], []
    for c in ds.classes:
        rows = np.flatnonzero(ds.labels == c)
        rows = rows[rng.permutation(rows.size)]
        if rows.size == 1:
            warnings.warn(f"class {int(c)} has a single sample; kept in train", SplitWarning)
            train_rows.append(rows)
            continue
        n_test = int(np.floor(spec.test_fraction * rows.size + 0.5))
        n_test = min(max(n_test, 1), rows.size - 1)
        test_rows.append(rows[:n_test])
        train_rows.append(rows[n_test:])
    train = np.sort(np.concatenate(train_rows))
    test = np.sort(np.concatenate(test_rows)) if test_rows else np.array([], dtype=int)
    if test.size == 0:
        raise DatasetError("no class has enough samples to populate a test split")
    return ds.take(train), ds.take(test)


def make_parity_dataset(n_samples=500, n_features=8, parity_sets=((0, 1),), seed=0,
                        margin=0.05):
    """Synthetic binary task whose label is a product of input signs.

    Label is 1 when the product of ``sign(x_i)`` taken over all the sets in
    ``parity_sets`` is positive, 0 otherwise. Inputs are uniform on
    [-1, 1] with ``|x_i| >= margin`` so that signs are well defined. A linear
    model on the raw inputs cannot beat chance on such labels.
    """
    rng = np.random.default_rng(seed)
    mag = rng.uniform(margin, 1.0, size=(n_samples, n_features))
    sgn = rng.choice([-1.0, 1.0], size=(n_samples, n_features))
    X = mag * sgn
    prod = np.ones(n_samples)
    for S in parity_sets:
        prod *= np.prod(sgn[:, list(S)], axis=1)
    y = (prod > 0).astype(int)
    names = tuple(f"x{j}" for j in range(n_features))
    return Dataset(X, y, column_names=names)
