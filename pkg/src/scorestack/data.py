"""Dataset container, CSV ingestion, stratified splitting and synthetic benchmarks.

All operations are pure given their inputs and seeds. ``Dataset`` values are
frozen after construction (the backing arrays are made read-only) so they can
be shared freely across worker processes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class IngestionError(ValueError):
    """Raised when a CSV file cannot be turned into a Dataset."""


@dataclass(frozen=True)
class Dataset:
    """An n x d real feature matrix with optional binary outlier labels.

    labels, when present, are 0/1 with 1 marking outliers. All feature
    entries must be finite; rows with missing values are rejected upstream,
    never imputed.
    """

    features: np.ndarray
    labels: np.ndarray | None = None
    feature_names: list[str] | None = None
    name: str = "dataset"

    def __post_init__(self) -> None:
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if n < 2 or d < 1:
            raise ValueError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN/Inf entries")
        y = self.labels
        if y is not None:
            y = np.asarray(y, dtype=np.int64)
            if y.shape != (n,):
                raise ValueError(f"labels length {y.shape} does not match n={n}")
            if not np.all((y == 0) | (y == 1)):
                raise ValueError("labels must contain only 0/1")
            y.setflags(write=False)
        if self.feature_names is not None and len(self.feature_names) != d:
            raise ValueError("feature_names length does not match d")
        X.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_outliers(self) -> int:
        if self.labels is None:
            raise ValueError(f"dataset {self.name!r} has no labels")
        return int(self.labels.sum())


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a Gaussian benchmark with shift outliers.

    Inliers are standard multivariate normal. Outliers are drawn from the
    same distribution and then shifted by ``separation`` (in units of the
    inlier standard deviation) along ``informative_dims`` randomly chosen
    axes, with a uniform random sign per axis. Exactly
    floor(n * outlier_fraction) rows are outliers.
    """

    n: int
    d: int
    outlier_fraction: float
    separation: float = 3.0
    informative_dims: int = 1
    seed: int = 0
    name: str = "synthetic"

    def __post_init__(self) -> None:
        if self.n < 2 or self.d < 1:
            raise ValueError("need n >= 2 and d >= 1")
        if not (0.0 < self.outlier_fraction < 0.5):
            raise ValueError("outlier_fraction must lie in (0, 0.5)")
        if math.floor(self.n * self.outlier_fraction) < 1:
            raise ValueError("outlier_fraction too small: no outlier row")
        if not (1 <= self.informative_dims <= self.d):
            raise ValueError("informative_dims must lie in [1, d]")
        if self.separation < 0:
            raise ValueError("separation must be >= 0")


def load_csv(path: str | Path, label_column: str | None = None) -> Dataset:
    """Load an RFC-4180 style CSV (UTF-8, header row) into a Dataset.

    Every cell outside the label column must parse as a finite real; the
    label column, when named, must contain exactly "0" or "1". Unparseable
    or non-finite cells raise ``IngestionError`` naming the offending
    row and column. Row order is preserved.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        label_idx: int | None = None
        if label_column is not None:
            if label_column not in header:
                raise IngestionError(
                    f"{path}: label column {label_column!r} not in header {header}"
                )
            label_idx = header.index(label_column)
        feature_names = [h for i, h in enumerate(header) if i != label_idx]

        rows: list[list[float]] = []
        labels: list[int] = []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise IngestionError(
                    f"{path}: row {row_no} has {len(row)} cells, expected {len(header)}"
                )
            values = []
            for i, cell in enumerate(row):
                col = header[i]
                if i == label_idx:
                    if cell not in ("0", "1"):
                        raise IngestionError(
                            f"{path}: row {row_no}, column {col!r}: "
                            f"label must be 0 or 1, got {cell!r}"
                        )
                    labels.append(int(cell))
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise IngestionError(
                        f"{path}: row {row_no}, column {col!r}: "
                        f"cannot parse {cell!r} as a real number"
                    ) from None
                if not math.isfinite(v):
                    raise IngestionError(
                        f"{path}: row {row_no}, column {col!r}: "
                        f"non-finite value {cell!r} rejected (no imputation)"
                    )
                values.append(v)
            rows.append(values)

    features = np.array(rows, dtype=np.float64)
    return Dataset(
        features=features,
        labels=np.array(labels, dtype=np.int64) if label_idx is not None else None,
        feature_names=feature_names,
        name=path.stem,
    )


def save_csv(ds: Dataset, path: str | Path, label_column: str = "label") -> None:
    """Write a Dataset as CSV; labels, when present, go into ``label_column``."""
    path = Path(path)
    names = ds.feature_names or [f"f{i}" for i in range(ds.d)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(names) + ([label_column] if ds.labels is not None else [])
        writer.writerow(header)
        for i in range(ds.n):
            row = [repr(float(v)) for v in ds.features[i]]
            if ds.labels is not None:
                row.append(str(int(ds.labels[i])))
            writer.writerow(row)


def split_train_test(
    ds: Dataset, train_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Stratified train/test split, deterministic given ``seed``.

    The outlier proportion is preserved up to rounding in both parts; the
    train size is round(n * train_fraction) adjusted so each class keeps at
    least one member on each side. The two parts partition the rows exactly.
    """
    if ds.labels is None:
        raise ValueError("split_train_test requires labels")
    if not (0.0 < train_fraction < 1.0):
        raise ValueError("train_fraction must lie in (0, 1)")
    y = ds.labels
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("both classes must be present to split")
    for cls, idx in (("outlier", pos), ("inlier", neg)):
        if len(idx) < 2:
            raise ValueError(
                f"{cls} class has a single member and cannot appear in both "
                f"parts; provide more data"
            )

    # Per-class half-up rounding: the train size then equals
    # round(n * train_fraction) up to the one-row rounding drift, and the
    # outlier rates of the two parts stay within 1/min(|train|, |test|).
    t_pos = int(math.floor(len(pos) * train_fraction + 0.5))
    t_pos = min(max(t_pos, 1), len(pos) - 1)
    t_neg = int(math.floor(len(neg) * train_fraction + 0.5))
    t_neg = min(max(t_neg, 1), len(neg) - 1)

    rng = np.random.default_rng(seed)
    pos_perm = pos[rng.permutation(len(pos))]
    neg_perm = neg[rng.permutation(len(neg))]
    train_idx = np.sort(np.concatenate([pos_perm[:t_pos], neg_perm[:t_neg]]))
    test_idx = np.sort(np.concatenate([pos_perm[t_pos:], neg_perm[t_neg:]]))

    def take(idx: np.ndarray) -> Dataset:
        return Dataset(
            features=ds.features[idx].copy(),
            labels=y[idx].copy(),
            feature_names=ds.feature_names,
            name=ds.name,
        )

    return take(train_idx), take(test_idx)


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw the benchmark described by ``spec``; bitwise deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    n_out = int(math.floor(spec.n * spec.outlier_fraction))
    X = rng.standard_normal((spec.n, spec.d))
    axes = rng.choice(spec.d, size=spec.informative_dims, replace=False)
    # each outlier draws its own sign per informative axis, scattering the
    # outliers over the 2^informative_dims shifted corners
    signs = rng.choice(np.array([-1.0, 1.0]),
                       size=(n_out, spec.informative_dims))
    X[np.ix_(np.arange(n_out), axes)] += signs * spec.separation
    y = np.zeros(spec.n, dtype=np.int64)
    y[:n_out] = 1
    perm = rng.permutation(spec.n)
    return Dataset(
        features=X[perm],
        labels=y[perm],
        feature_names=[f"f{i}" for i in range(spec.d)],
        name=spec.name,
    )


# Benchmark presets. Shapes and outlier rates track the seven public outlier
# benchmarks commonly used in the ensemble literature (largest one scaled to
# desk size); separation/informative_dims are tuned so detector grids contain
# both accurate and inaccurate scorers.
PRESETS: dict[str, SyntheticSpec] = {
    "synth-arrhythmia-like": SyntheticSpec(
        n=452, d=274, outlier_fraction=0.1461, separation=1.2,
        informative_dims=18, seed=101, name="synth-arrhythmia-like",
    ),
    "synth-letter-like": SyntheticSpec(
        n=1600, d=32, outlier_fraction=0.0625, separation=1.2,
        informative_dims=6, seed=102, name="synth-letter-like",
    ),
    "synth-cardio-like": SyntheticSpec(
        n=1831, d=21, outlier_fraction=0.0962, separation=1.1,
        informative_dims=6, seed=103, name="synth-cardio-like",
    ),
    "synth-speech-like": SyntheticSpec(
        n=3686, d=600, outlier_fraction=0.01656, separation=1.1,
        informative_dims=25, seed=104, name="synth-speech-like",
    ),
    "synth-satellite-like": SyntheticSpec(
        n=6435, d=36, outlier_fraction=0.3165, separation=0.8,
        informative_dims=24, seed=105, name="synth-satellite-like",
    ),
    "synth-mnist-like": SyntheticSpec(
        n=7603, d=100, outlier_fraction=0.0921, separation=0.9,
        informative_dims=25, seed=106, name="synth-mnist-like",
    ),
    "synth-mammography-like": SyntheticSpec(
        n=7600, d=6, outlier_fraction=0.0232, separation=1.4,
        informative_dims=4, seed=107, name="synth-mammography-like",
    ),
}


def preset(name: str) -> SyntheticSpec:
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise ValueError(f"unknown preset {name!r}; known presets: {known}") from None
