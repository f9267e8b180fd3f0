"""Second-order regularized gradient boosted trees for binary targets.

Trees are grown by exact greedy split search over midpoint thresholds,
maximising 0.5*[GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] - gamma with leaf
weights -G/(H+l), under the logistic loss (g = p - y, h = p(1-p)). Split
ties break toward the lowest feature index, then the lowest threshold, so
training is deterministic given the input order.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numba import njit
from scipy.special import expit


@dataclass(frozen=True)
class BoostParams:
    n_rounds: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    base_score: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_rounds < 0:
            raise ValueError("n_rounds must be >= 0")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if not (0.0 < self.learning_rate <= 1.0):
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.reg_lambda < 0 or self.gamma < 0 or self.min_child_weight < 0:
            raise ValueError("regularizers must be >= 0")
        if not (0.0 < self.base_score < 1.0):
            raise ValueError("base_score must lie in (0, 1)")


class Tree:
    """One regression tree as parallel node arrays; feature -1 marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "value", "gain", "depth")

    def __init__(self) -> None:
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.gain: list[float] = []
        self.depth: list[int] = []

    def add_leaf(self, depth: int, value: float) -> int:
        return self._add(depth, -1, 0.0, value, 0.0)

    def _add(self, depth: int, feature: int, threshold: float,
             value: float, gain: float) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        self.gain.append(gain)
        self.depth.append(depth)
        return len(self.feature) - 1

    @property
    def n_internal(self) -> int:
        return sum(1 for f in self.feature if f >= 0)

    def predict_raw(self, X: np.ndarray) -> np.ndarray:
        """Unscaled leaf values for every row."""
        out = np.zeros(X.shape[0])
        stack: list[tuple[int, np.ndarray]] = [(0, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if len(idx) == 0:
                continue
            f = self.feature[node]
            if f < 0:
                out[idx] = self.value[node]
                continue
            mask = X[idx, f] < self.threshold[node]
            stack.append((self.left[node], idx[mask]))
            stack.append((self.right[node], idx[~mask]))
        return out


@dataclass
class BoostedModel:
    trees: list[Tree]
    learning_rate: float
    base_logit: float
    feature_count: int
    params: BoostParams
    loss_trace: list[float] = field(default_factory=list)


def _logistic_grad_hess(margin: np.ndarray, y: np.ndarray
                        ) -> tuple[np.ndarray, np.ndarray]:
    p = expit(margin)
    return p - y, p * (1.0 - p)


def _log_loss(margin: np.ndarray, y: np.ndarray) -> float:
    # log(1 + exp(m)) - y*m, stable for large |m|
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


@njit(cache=True, error_model="numpy")
def _scan_splits(order: np.ndarray, XT: np.ndarray, g: np.ndarray,
                 h: np.ndarray, G: float, H: float, lam: float, gamma: float,
                 min_child_weight: float) -> tuple[float, int, int]:
    """Sequential exact-greedy scan over every feature of one node.

    ``order`` is (m, size): row f holds the node's members sorted by
    feature f; ``XT`` is the (m, n) transposed feature matrix. Returns
    (gain, feature, position); ties resolve to the lowest feature index,
    then the lowest position (strict improvement comparisons in scan
    order). Prefix sums accumulate left to right, matching cumsum.
    """
    m, size = order.shape
    parent = G * G / (H + lam)
    best_gain = -np.inf
    best_f = -1
    best_pos = -1
    for f in range(m):
        gl = 0.0
        hl = 0.0
        for i in range(size - 1):
            gl += g[order[f, i]]
            hl += h[order[f, i]]
            if XT[f, order[f, i + 1]] <= XT[f, order[f, i]]:
                continue
            hr = H - hl
            if hl < min_child_weight or hr < min_child_weight:
                continue
            gr = G - gl
            gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam)
                          - parent) - gamma
            if gain > best_gain:
                best_gain = gain
                best_f = f
                best_pos = i
    return best_gain, best_f, best_pos


def _best_split_all_features(order: np.ndarray, XT: np.ndarray, g: np.ndarray,
                             h: np.ndarray, G: float, H: float,
                             params: BoostParams
                             ) -> tuple[float, int, int, float] | None:
    """Best (gain, feature, position, threshold) of one node.

    G and H are the node totals computed over a canonical row order, so the
    gain of a column does not depend on where that column sits in the
    feature matrix.
    """
    gain, f, pos = _scan_splits(
        order, XT, g, h, G, H,
        params.reg_lambda, params.gamma, params.min_child_weight,
    )
    if f < 0 or not np.isfinite(gain):
        return None
    a, b = XT[f, order[f, pos]], XT[f, order[f, pos + 1]]
    thr = (a + b) / 2.0
    if not thr > a:
        # midpoint rounded onto an endpoint; b keeps the partition intact
        thr = b
    return float(gain), int(f), int(pos), float(thr)


def _grow_tree(XT: np.ndarray, g: np.ndarray, h: np.ndarray,
               root_order: np.ndarray, params: BoostParams,
               raw_out: np.ndarray) -> Tree:
    """Grow one tree; writes each row's raw leaf value into ``raw_out``."""
    tree = Tree()
    lam = params.reg_lambda
    n = XT.shape[1]

    def build(order: np.ndarray, rows: np.ndarray, depth: int) -> int:
        # rows is the node membership in ascending index order: summing g/h
        # over it keeps node stats independent of any column permutation.
        G = g[rows].sum()
        H = h[rows].sum()
        if depth >= params.max_depth or len(rows) < 2:
            return make_leaf(rows, G, H, depth)

        best = _best_split_all_features(order, XT, g, h, G, H, params)
        if best is None or best[0] <= 0.0:
            return make_leaf(rows, G, H, depth)

        gain, f, pos, thr = best
        is_left = np.zeros(n, dtype=bool)
        is_left[order[f, : pos + 1]] = True
        mask = is_left[order]
        left_order = order[mask].reshape(order.shape[0], -1)
        right_order = order[~mask].reshape(order.shape[0], -1)
        node = tree._add(depth, f, thr, 0.0, gain)
        tree.left[node] = build(left_order, rows[is_left[rows]], depth + 1)
        tree.right[node] = build(right_order, rows[~is_left[rows]], depth + 1)
        return node

    def make_leaf(rows: np.ndarray, G: float, H: float, depth: int) -> int:
        w = -G / (H + lam)
        raw_out[rows] = w
        return tree.add_leaf(depth, w)

    build(root_order, np.arange(n), 0)
    return tree


def train_gbt(features: np.ndarray, labels: np.ndarray,
              params: BoostParams | None = None) -> BoostedModel:
    """Boosted ensemble under logistic loss; deterministic given inputs.

    Single-class labels are allowed: the model converges toward a constant
    probability. Records the training log-loss after every round in
    ``loss_trace``.
    """
    params = params or BoostParams()
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("features must be (n, d) with one label per row")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain NaN/Inf entries")
    if len(y) == 0:
        raise ValueError("need at least one training example")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must contain only 0/1")

    n, m = X.shape
    base_logit = float(np.log(params.base_score / (1.0 - params.base_score)))
    # transposed features keep the per-feature gathers row-contiguous;
    # row f of the root order holds all rows sorted by feature f
    XT = np.ascontiguousarray(X.T)
    root_order = np.argsort(XT, axis=1, kind="stable")

    margin = np.full(n, base_logit)
    trees: list[Tree] = []
    trace: list[float] = []
    raw = np.zeros(n)
    for _ in range(params.n_rounds):
        g, h = _logistic_grad_hess(margin, y)
        tree = _grow_tree(XT, g, h, root_order, params, raw)
        trees.append(tree)
        margin = margin + params.learning_rate * raw
        trace.append(_log_loss(margin, y))

    return BoostedModel(
        trees=trees,
        learning_rate=params.learning_rate,
        base_logit=base_logit,
        feature_count=m,
        params=params,
        loss_trace=trace,
    )


def predict_margin(model: BoostedModel, features: np.ndarray) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.feature_count:
        raise ValueError(
            f"feature width {X.shape[1] if X.ndim == 2 else X.shape} does not "
            f"match model width {model.feature_count}"
        )
    margin = np.full(X.shape[0], model.base_logit)
    for tree in model.trees:
        margin += model.learning_rate * tree.predict_raw(X)
    return margin


def predict_proba(model: BoostedModel, features: np.ndarray) -> np.ndarray:
    """Outlier probability per row, used directly as a ranking score."""
    return expit(predict_margin(model, features))


def feature_importance(model: BoostedModel) -> np.ndarray:
    """Split counts per feature, summed over all trees."""
    counts = np.zeros(model.feature_count, dtype=np.int64)
    for tree in model.trees:
        for f in tree.feature:
            if f >= 0:
                counts[f] += 1
    return counts


def post_prune_top_q(model: BoostedModel, S, q: int):
    """Keep the q TOS columns of S with the highest split counts.

    Only the TOS block is ranked; original features are never pruned. The
    model must have been trained on the combined space whose trailing
    columns correspond to S, in order. Ties break toward the earlier
    position in S. The result is meant for a retrain on the reduced space.
    """
    from .selection import SelectionResult

    p = len(S.indices)
    if q > p:
        raise ValueError(f"q={q} exceeds |S|={p}")
    d_original = model.feature_count - p
    if d_original < 0:
        raise ValueError("model is narrower than the selection it claims")
    counts = feature_importance(model)[d_original:]
    positions = np.lexsort((np.arange(p), -counts))[:q]
    return SelectionResult(
        indices=tuple(int(S.indices[i]) for i in positions),
        method=S.method,
    )


def save_model(model: BoostedModel, path: str | Path) -> None:
    """Structured text serialization (stable across platforms)."""
    payload = {
        "kind": "gbt",
        "learning_rate": model.learning_rate,
        "base_logit": model.base_logit,
        "feature_count": model.feature_count,
        "params": asdict(model.params),
        "loss_trace": model.loss_trace,
        "trees": [
            {
                "feature": tree.feature,
                "threshold": tree.threshold,
                "left": tree.left,
                "right": tree.right,
                "value": tree.value,
                "gain": tree.gain,
                "depth": tree.depth,
            }
            for tree in model.trees
        ],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> BoostedModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("kind") != "gbt":
        raise ValueError(f"{path}: not a boosted-tree model file")
    trees = []
    for raw in payload["trees"]:
        tree = Tree()
        tree.feature = list(raw["feature"])
        tree.threshold = list(raw["threshold"])
        tree.left = list(raw["left"])
        tree.right = list(raw["right"])
        tree.value = list(raw["value"])
        tree.gain = list(raw["gain"])
        tree.depth = list(raw["depth"])
        trees.append(tree)
    return BoostedModel(
        trees=trees,
        learning_rate=payload["learning_rate"],
        base_logit=payload["base_logit"],
        feature_count=payload["feature_count"],
        params=BoostParams(**payload["params"]),
        loss_trace=list(payload["loss_trace"]),
    )
