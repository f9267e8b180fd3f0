"""Isolation forest with the standard path-length anomaly score.

Each tree isolates a without-replacement subsample of the training data by
recursive uniform splits; the anomaly score of a point is 2^(-E[h]/c(psi)),
where h is the path length, psi the per-tree sample size and c(.) the
average path length of an unsuccessful binary search. Scores lie in (0, 1),
higher = more outlying.
"""

from __future__ import annotations

import math

import numpy as np

from .specs import DetectorSpec

_EULER_GAMMA = 0.5772156649015329


def average_path_length(m: int | np.ndarray) -> np.ndarray:
    """c(m): expected path length of an unsuccessful search in a BST of m keys."""
    m = np.asarray(m, dtype=np.float64)
    out = np.zeros_like(m)
    out = np.where(m == 2, 1.0, out)
    big = m > 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(
            big,
            2.0 * (np.log(np.maximum(m - 1.0, 1.0)) + _EULER_GAMMA)
            - 2.0 * (m - 1.0) / np.maximum(m, 1.0),
            out,
        )
    return out


class _Tree:
    __slots__ = ("feature", "threshold", "left", "right", "size", "depth")

    def __init__(self) -> None:
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.size: list[int] = []
        self.depth: list[int] = []

    def add_node(self, depth: int, size: int) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.size.append(size)
        self.depth.append(depth)
        return len(self.size) - 1


def _grow(tree: _Tree, X: np.ndarray, depth: int, cap: int,
          rng: np.random.Generator) -> int:
    node = tree.add_node(depth, X.shape[0])
    if depth >= cap or X.shape[0] <= 1:
        return node
    mins = X.min(axis=0)
    maxs = X.max(axis=0)
    usable = np.flatnonzero(maxs > mins)
    if len(usable) == 0:
        return node
    f = int(usable[rng.integers(len(usable))])
    thr = float(rng.uniform(mins[f], maxs[f]))
    if thr <= mins[f]:
        thr = float(np.nextafter(mins[f], maxs[f]))
    mask = X[:, f] < thr
    tree.feature[node] = f
    tree.threshold[node] = thr
    tree.left[node] = _grow(tree, X[mask], depth + 1, cap, rng)
    tree.right[node] = _grow(tree, X[~mask], depth + 1, cap, rng)
    return node


def _path_lengths(tree: _Tree, X: np.ndarray) -> np.ndarray:
    out = np.zeros(X.shape[0])
    stack: list[tuple[int, np.ndarray]] = [(0, np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if len(idx) == 0:
            continue
        f = tree.feature[node]
        if f < 0:
            out[idx] = tree.depth[node] + average_path_length(tree.size[node])
            continue
        mask = X[idx, f] < tree.threshold[node]
        stack.append((tree.left[node], idx[mask]))
        stack.append((tree.right[node], idx[~mask]))
    return out


class IsolationForestDetector:
    """A fitted isolation forest; deterministic given ``spec.seed``."""

    def __init__(self, spec: DetectorSpec, train: np.ndarray):
        train = np.asarray(train, dtype=np.float64)
        self.spec = spec
        self.train = train
        self.d = train.shape[1]
        n = train.shape[0]
        self.psi = min(spec.subsample or 256, n)
        cap = max(1, math.ceil(math.log2(self.psi))) if self.psi > 1 else 1
        rng = np.random.default_rng(spec.seed)
        self.trees: list[_Tree] = []
        for _ in range(spec.n_trees):
            rows = rng.choice(n, size=self.psi, replace=False)
            tree = _Tree()
            _grow(tree, train[rows], 0, cap, rng)
            self.trees.append(tree)
        self._norm = float(average_path_length(self.psi))

    def score_points(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        if points.shape[1] != self.d:
            raise ValueError(
                f"dimension mismatch: query d={points.shape[1]}, train d={self.d}"
            )
        total = np.zeros(points.shape[0])
        for tree in self.trees:
            total += _path_lengths(tree, points)
        mean_h = total / len(self.trees)
        return np.power(2.0, -mean_h / self._norm)

    def score_training(self) -> np.ndarray:
        return self.score_points(self.train)
