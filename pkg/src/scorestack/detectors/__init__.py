"""The seven unsupervised outlier scoring functions and their grid.

Kinds: KNN, AVG_KNN, K_MEDIAN (distance to / mean of / median of the k
nearest training distances), LOF, LOOP, OCSVM and IFOREST. Every fitted
detector is deterministic, immutable and oriented so that higher scores mean
more outlying.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .iforest import IsolationForestDetector, average_path_length
from .neighbors import NeighborDetector, NeighborIndex
from .ocsvm import ConvergenceError, OneClassSVMDetector
from .specs import (
    DEFAULT_K_RANGE,
    KINDS,
    NEIGHBOR_KINDS,
    DetectorSpec,
    GridConfig,
    build_grid,
    spec_from_string,
    spec_to_string,
)

__all__ = [
    "KINDS",
    "NEIGHBOR_KINDS",
    "DEFAULT_K_RANGE",
    "DetectorSpec",
    "GridConfig",
    "build_grid",
    "spec_to_string",
    "spec_from_string",
    "SkippedDetector",
    "FittedDetector",
    "NeighborIndex",
    "ConvergenceError",
    "average_path_length",
    "fit_detector",
    "score_points",
    "score_training",
]

log = logging.getLogger(__name__)

FittedDetector = NeighborDetector | OneClassSVMDetector | IsolationForestDetector


@dataclass(frozen=True)
class SkippedDetector:
    """Sentinel for a spec that cannot be fitted on a given training set."""

    spec: DetectorSpec
    reason: str


def fit_detector(
    spec: DetectorSpec,
    train,
    index: NeighborIndex | None = None,
) -> FittedDetector | SkippedDetector:
    """Fit one detector on training features (labels, if any, are ignored).

    ``train`` may be a Dataset or a plain (n, d) array. Neighbour-based
    specs with k >= n are skipped with a warning rather than fitted. A
    prebuilt :class:`NeighborIndex` over the same training matrix may be
    supplied to share distance computations across specs; results are
    identical with or without it.
    """
    X = getattr(train, "features", train)
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if spec.kind in NEIGHBOR_KINDS:
        if spec.k >= n:
            reason = f"k={spec.k} >= training size n={n}"
            log.warning("skipping %s: %s", spec_to_string(spec), reason)
            return SkippedDetector(spec=spec, reason=reason)
        if index is None:
            index = NeighborIndex(X, max_k=spec.k)
        return NeighborDetector(spec, index)
    if spec.kind == "OCSVM":
        return OneClassSVMDetector(spec, X)
    if spec.kind == "IFOREST":
        return IsolationForestDetector(spec, X)
    raise ValueError(f"unknown detector kind {spec.kind!r}")


def score_points(fitted: FittedDetector, eval_points: np.ndarray) -> np.ndarray:
    """Score arbitrary points; training rows get no self-exclusion here."""
    return fitted.score_points(eval_points)


def score_training(fitted: FittedDetector) -> np.ndarray:
    """Score the detector's own training set.

    For the neighbour-based kinds each training point is excluded from its
    own neighbour set (at k=1 a point would otherwise be its own nearest
    neighbour at distance zero).
    """
    return fitted.score_training()
