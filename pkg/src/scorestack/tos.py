"""Building the transformed-outlier-score matrix and its unsupervised baselines.

Each detector is fitted on training features only and then scores both the
train and test rows, so nothing about the test set can leak into the
representation. Each column carries its spec as provenance plus its ROC
against the training labels.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset
from .detectors import (
    NEIGHBOR_KINDS,
    DetectorSpec,
    NeighborIndex,
    SkippedDetector,
    fit_detector,
    spec_to_string,
)
from .evaluation import roc_auc

log = logging.getLogger(__name__)


class DetectorFitError(RuntimeError):
    """A detector failed to fit; the message names the offending column."""


@dataclass(frozen=True)
class TosMatrix:
    """Transformed outlier scores over the train and test sides.

    Column j of both score blocks was produced by ``specs[j]``;
    ``train_roc[j]`` is that column's ROC against the training labels.
    """

    train_scores: np.ndarray
    test_scores: np.ndarray
    specs: list[DetectorSpec]
    train_roc: np.ndarray

    def __post_init__(self) -> None:
        k = len(self.specs)
        if not (self.train_scores.shape[1] == self.test_scores.shape[1]
                == len(self.train_roc) == k):
            raise ValueError("column counts disagree across TosMatrix fields")
        if not (np.all(np.isfinite(self.train_scores))
                and np.all(np.isfinite(self.test_scores))):
            raise ValueError("TOS entries must be finite")
        if np.any((self.train_roc < 0) | (self.train_roc > 1)):
            raise ValueError("train_roc entries must lie in [0, 1]")
        self.train_scores.setflags(write=False)
        self.test_scores.setflags(write=False)
        self.train_roc.setflags(write=False)

    @property
    def k(self) -> int:
        return len(self.specs)

    def column_labels(self) -> list[str]:
        return [spec_to_string(s) for s in self.specs]


def build_tos(specs: list[DetectorSpec], train: Dataset, test: Dataset) -> TosMatrix:
    """Fit every spec on the training features and score both sides.

    Specs whose k is too large for the training set are omitted with a
    warning; if every spec is skipped this raises. The training set must be
    labeled (column ROCs are part of the matrix).
    """
    if not specs:
        raise ValueError("specs must be non-empty")
    if train.labels is None:
        raise ValueError("build_tos needs training labels for per-column ROC")
    if train.d != test.d:
        raise ValueError(f"dimension mismatch: train d={train.d}, test d={test.d}")

    n = train.n
    neighbor_ks = [s.k for s in specs if s.kind in NEIGHBOR_KINDS and s.k < n]
    index = NeighborIndex(train.features, max(neighbor_ks)) if neighbor_ks else None
    # one shared neighbour query of the test matrix serves every
    # neighbour-based spec; per-spec queries would re-sort identical rows
    test_tables = index.query(test.features) if index is not None else None

    train_cols: list[np.ndarray] = []
    test_cols: list[np.ndarray] = []
    kept: list[DetectorSpec] = []
    for spec in specs:
        shared = index if spec.kind in NEIGHBOR_KINDS else None
        try:
            fitted = fit_detector(spec, train, index=shared)
        except Exception as exc:
            raise DetectorFitError(
                f"detector {spec_to_string(spec)} failed to fit: {exc}"
            ) from exc
        if isinstance(fitted, SkippedDetector):
            continue
        train_cols.append(fitted.score_training())
        if spec.kind in NEIGHBOR_KINDS:
            test_cols.append(fitted.score_query_tables(*test_tables))
        else:
            test_cols.append(fitted.score_points(test.features))
        kept.append(spec)

    if not kept:
        raise ValueError("every detector spec was skipped; no TOS produced")

    train_scores = np.column_stack(train_cols)
    test_scores = np.column_stack(test_cols)
    train_roc = np.array([roc_auc(col, train.labels) for col in train_cols])
    return TosMatrix(
        train_scores=train_scores,
        test_scores=test_scores,
        specs=kept,
        train_roc=train_roc,
    )


def normalize_column(v: np.ndarray) -> np.ndarray:
    """z-score by mean and population standard deviation; constant -> zeros."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot normalize an empty vector")
    std = float(v.std())
    if std == 0.0:
        return np.zeros_like(v)
    return (v - v.mean()) / std


def full_tos(T: TosMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Equal-weight average of all columns after per-column z-normalization.

    Normalization statistics come from the train column and are applied to
    the test column as well, preserving the no-leakage contract.
    """
    train_parts = []
    test_parts = []
    for j in range(T.k):
        col = T.train_scores[:, j]
        mean = float(col.mean())
        std = float(col.std())
        if std == 0.0:
            train_parts.append(np.zeros(T.train_scores.shape[0]))
            test_parts.append(np.zeros(T.test_scores.shape[0]))
        else:
            train_parts.append((col - mean) / std)
            test_parts.append((T.test_scores[:, j] - mean) / std)
    return (
        np.mean(train_parts, axis=0),
        np.mean(test_parts, axis=0),
    )


def best_tos(
    T: TosMatrix, y_eval: np.ndarray, which: str = "test"
) -> tuple[int, np.ndarray]:
    """The single column with the highest ROC on the chosen side.

    This baseline consults evaluation labels, so it is an oracle upper bound
    among the individual columns; reports must flag it as such. Ties break
    toward the lowest column index.
    """
    if which not in ("train", "test"):
        raise ValueError(f"which must be 'train' or 'test', got {which!r}")
    scores = T.train_scores if which == "train" else T.test_scores
    y_eval = np.asarray(y_eval)
    if len(y_eval) != scores.shape[0]:
        raise ValueError("labels length does not match the chosen side")
    rocs = np.array([roc_auc(scores[:, j], y_eval) for j in range(T.k)])
    best = int(np.argmax(rocs))
    return best, scores[:, best].copy()


def export_csv(T: TosMatrix, train_path: str | Path, test_path: str | Path,
               roc_path: str | Path) -> None:
    """Write score blocks as CSV (one column per TOS) plus a ROC sidecar."""
    import csv

    labels = T.column_labels()
    for path, block in ((train_path, T.train_scores), (test_path, T.test_scores)):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(labels)
            for row in block:
                writer.writerow([repr(float(v)) for v in row])
    with open(roc_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["spec", "train_roc"])
        for label, roc in zip(labels, T.train_roc):
            writer.writerow([label, repr(float(roc))])
