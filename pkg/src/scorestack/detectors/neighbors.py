"""Neighbour-based outlier scorers: KNN, AVG_KNN, K_MEDIAN, LOF and LOOP.

All five kinds share a :class:`NeighborIndex` over the training points.
Neighbour ties are broken by lower point index, which makes every score
deterministic. When a training point is scored, the point itself is
excluded from its own neighbour set (``score_training``); arbitrary query
points are scored against the full training set (``score_points``).
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from ._distances import pairwise_distances

from .specs import DetectorSpec

# Guard against zero reachability sums in duplicate clusters; part of the
# documented LOF semantics (both the fast path and any oracle must apply it).
LRD_EPS = 1e-10

LOOP_LAMBDA = 3.0


def _sorted_neighbors(dist: np.ndarray, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Stable argsort of each distance row, truncated to ``width`` columns."""
    order = np.argsort(dist, axis=1, kind="stable")[:, :width]
    return order, np.take_along_axis(dist, order, axis=1)


class NeighborIndex:
    """Exact k-nearest-neighbour tables over a training matrix.

    Precomputes the self-excluded neighbour lists of every training point up
    to ``max_k`` neighbours so that several detector specs can share one
    distance computation. Sharing never changes results: the first k columns
    of a wider table equal the k-column table exactly.
    """

    def __init__(self, train: np.ndarray, max_k: int):
        train = np.asarray(train, dtype=np.float64)
        n = train.shape[0]
        if not (1 <= max_k <= n - 1):
            raise ValueError(f"max_k must lie in [1, n-1], got {max_k} for n={n}")
        self.train = train
        self.max_k = max_k
        dist = pairwise_distances(train, train)
        # Stable sort keeps equal distances in index order; drop each row's
        # own entry, which may sit anywhere inside a run of zero distances.
        order = np.argsort(dist, axis=1, kind="stable")[:, : max_k + 2]
        not_self = order != np.arange(n)[:, None]
        shuffle = np.argsort(~not_self, axis=1, kind="stable")
        order = np.take_along_axis(order, shuffle, axis=1)[:, :max_k]
        self.train_idx = order
        self.train_dist = np.take_along_axis(dist, order, axis=1)

    def query(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Neighbour indices/distances of arbitrary points (no exclusion)."""
        points = np.asarray(points, dtype=np.float64)
        if points.shape[1] != self.train.shape[1]:
            raise ValueError(
                f"dimension mismatch: query d={points.shape[1]}, "
                f"train d={self.train.shape[1]}"
            )
        dist = pairwise_distances(points, self.train)
        return _sorted_neighbors(dist, self.max_k)


class NeighborDetector:
    """A fitted KNN/AVG_KNN/K_MEDIAN/LOF/LOOP scorer. Higher = more outlying."""

    def __init__(self, spec: DetectorSpec, index: NeighborIndex):
        if spec.k is None or spec.k > index.max_k:
            raise ValueError("index is too narrow for this spec")
        self.spec = spec
        self.index = index
        self.d = index.train.shape[1]
        k = spec.k
        if spec.kind == "LOF":
            # k-distance and local reachability density of every training
            # point, with self-exclusion, reused for train and query scoring.
            self.kdist = index.train_dist[:, k - 1]
            reach = np.maximum(self.kdist[index.train_idx[:, :k]],
                               index.train_dist[:, :k])
            self.lrd = 1.0 / (reach.mean(axis=1) + LRD_EPS)
        elif spec.kind == "LOOP":
            sigma = np.sqrt(np.mean(index.train_dist[:, :k] ** 2, axis=1))
            self.pdist = LOOP_LAMBDA * sigma
            plof = self._plof(self.pdist, index.train_idx[:, :k])
            self.nplof = LOOP_LAMBDA * np.sqrt(np.mean(plof ** 2))

    def _plof(self, pdist_points: np.ndarray, nbr_idx: np.ndarray) -> np.ndarray:
        expected = self.pdist[nbr_idx].mean(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            plof = pdist_points / expected - 1.0
        plof = np.where(expected > 0, plof,
                        np.where(pdist_points > 0, np.inf, 0.0))
        return plof

    def _score(self, nbr_idx: np.ndarray, nbr_dist: np.ndarray) -> np.ndarray:
        k = self.spec.k
        kind = self.spec.kind
        if kind == "KNN":
            return nbr_dist[:, k - 1].copy()
        if kind == "AVG_KNN":
            return nbr_dist[:, :k].mean(axis=1)
        if kind == "K_MEDIAN":
            return np.median(nbr_dist[:, :k], axis=1)
        if kind == "LOF":
            reach = np.maximum(self.kdist[nbr_idx[:, :k]], nbr_dist[:, :k])
            lrd_p = 1.0 / (reach.mean(axis=1) + LRD_EPS)
            return self.lrd[nbr_idx[:, :k]].mean(axis=1) / lrd_p
        if kind == "LOOP":
            sigma = np.sqrt(np.mean(nbr_dist[:, :k] ** 2, axis=1))
            plof = self._plof(LOOP_LAMBDA * sigma, nbr_idx[:, :k])
            if self.nplof == 0.0:
                return np.zeros(len(plof))
            with np.errstate(invalid="ignore"):
                z = plof / (self.nplof * np.sqrt(2.0))
            return np.maximum(0.0, erf(z))
        raise AssertionError(kind)

    def score_training(self) -> np.ndarray:
        """Scores of the training points themselves (self-excluded)."""
        return self._score(self.index.train_idx, self.index.train_dist)

    def score_points(self, points: np.ndarray) -> np.ndarray:
        """Scores of arbitrary points against the full training set."""
        nbr_idx, nbr_dist = self.index.query(points)
        return self._score(nbr_idx, nbr_dist)

    def score_query_tables(self, nbr_idx: np.ndarray,
                           nbr_dist: np.ndarray) -> np.ndarray:
        """Score from a precomputed :meth:`NeighborIndex.query` result.

        Lets many specs share one query over the same evaluation matrix;
        results equal :meth:`score_points` on those points exactly.
        """
        if nbr_idx.shape[1] < self.spec.k:
            raise ValueError("query tables are narrower than this spec's k")
        return self._score(nbr_idx, nbr_dist)
