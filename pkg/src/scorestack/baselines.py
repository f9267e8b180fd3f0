"""Logistic-regression baselines wrapped in balanced-bag ensembles.

These are the comparison systems: L1/L2 regularized logistic regression
applied to class-balanced bags (all minority rows plus an equal-size
majority subsample per bag), predictions averaged over bags. Unlike the
boosted-tree paths, the linear models z-scale their inputs internally.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .seeding import stable_seed

log = logging.getLogger(__name__)

GRAD_TOL = 1e-6
NEWTON_MAX_ITER = 200
FISTA_MAX_ITER = 20_000


class ConvergenceError(RuntimeError):
    """The solver failed to reach the gradient tolerance."""


@dataclass(frozen=True)
class Scaler:
    """Per-feature (mean, std) fitted on training rows; constant features
    are flagged and scale to exactly 0."""

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Scaler":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        constant = std == 0.0
        return cls(mean=mean, std=np.where(constant, 1.0, std), constant=constant)

    def transform(self, X: np.ndarray) -> np.ndarray:
        Z = (X - self.mean) / self.std
        if self.constant.any():
            Z[:, self.constant] = 0.0
        return Z


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    intercept: float
    penalty: str
    strength: float
    scaler: Scaler


@dataclass(frozen=True)
class EnsembleModel:
    members: tuple[LinearModel, ...]

    @property
    def n_bags(self) -> int:
        return len(self.members)


def _loss_grad(Z: np.ndarray, y: np.ndarray, w: np.ndarray, b: float
               ) -> tuple[float, np.ndarray, float, np.ndarray]:
    margin = Z @ w + b
    p = expit(margin)
    loss = float(np.sum(np.logaddexp(0.0, margin) - y * margin))
    resid = p - y
    return loss, Z.T @ resid, float(resid.sum()), p


def _train_l2(Z: np.ndarray, y: np.ndarray, strength: float
              ) -> tuple[np.ndarray, float]:
    """Damped Newton for the L2-penalized objective (intercept unpenalized)."""
    n, d = Z.shape
    w = np.zeros(d)
    b = 0.0
    for _ in range(NEWTON_MAX_ITER):
        loss, gw, gb, p = _loss_grad(Z, y, w, b)
        obj = loss + 0.5 * strength * float(w @ w)
        gw = gw + strength * w
        if max(np.abs(gw).max(initial=0.0), abs(gb)) <= GRAD_TOL:
            return w, b
        D = p * (1.0 - p)
        # Hessian over [w, b] with the ridge only on the weight block
        A = np.empty((d + 1, d + 1))
        A[:d, :d] = (Z * D[:, None]).T @ Z + strength * np.eye(d)
        A[:d, d] = Z.T @ D
        A[d, :d] = A[:d, d]
        A[d, d] = D.sum() + 1e-12
        g = np.concatenate([gw, [gb]])
        try:
            step = np.linalg.solve(A, g)
        except np.linalg.LinAlgError:
            step = g / (np.abs(np.diag(A)).max() + 1.0)
        t = 1.0
        for _ in range(60):
            w2 = w - t * step[:d]
            b2 = b - t * step[d]
            loss2, _, _, _ = _loss_grad(Z, y, w2, b2)
            if loss2 + 0.5 * strength * float(w2 @ w2) <= obj:
                break
            t *= 0.5
        w, b = w2, b2
    raise ConvergenceError(
        f"L2 Newton did not reach grad tol {GRAD_TOL} in {NEWTON_MAX_ITER} "
        f"iterations (n={n}, d={d}, strength={strength})"
    )


def _l1_optimal(gw: np.ndarray, gb: float, w: np.ndarray, strength: float) -> float:
    """Max violation of the L1 subgradient optimality conditions."""
    at_zero = w == 0.0
    viol = np.where(
        at_zero,
        np.maximum(0.0, np.abs(gw) - strength),
        np.abs(gw + strength * np.sign(w)),
    )
    return max(float(viol.max(initial=0.0)), abs(gb))


def _train_l1(Z: np.ndarray, y: np.ndarray, strength: float
              ) -> tuple[np.ndarray, float]:
    """FISTA with soft-thresholding; zeros are exact."""
    n, d = Z.shape
    # Lipschitz bound for the logistic gradient: 0.25 * ||[Z 1]||_2^2
    aug = np.hstack([Z, np.ones((n, 1))])
    L = 0.25 * float(np.linalg.norm(aug, 2)) ** 2
    step = 1.0 / max(L, 1e-12)

    w = np.zeros(d)
    b = 0.0
    vw, vb = w.copy(), b
    t_mom = 1.0
    prev_obj = np.inf
    for _ in range(FISTA_MAX_ITER):
        loss, gw, gb, _ = _loss_grad(Z, y, vw, vb)
        w2 = vw - step * gw
        w2 = np.sign(w2) * np.maximum(np.abs(w2) - step * strength, 0.0)
        b2 = vb - step * gb
        t2 = (1.0 + np.sqrt(1.0 + 4.0 * t_mom**2)) / 2.0
        vw = w2 + (t_mom - 1.0) / t2 * (w2 - w)
        vb = b2 + (t_mom - 1.0) / t2 * (b2 - b)
        w, b, t_mom = w2, b2, t2

        loss_w, gw_w, gb_w, _ = _loss_grad(Z, y, w, b)
        if _l1_optimal(gw_w, gb_w, w, strength) <= GRAD_TOL:
            return w, b
        obj = loss_w + strength * float(np.abs(w).sum())
        if obj > prev_obj:
            # function-value restart keeps the momentum from overshooting
            vw, vb, t_mom = w.copy(), b, 1.0
        prev_obj = obj
    raise ConvergenceError(
        f"L1 proximal gradient did not reach tol {GRAD_TOL} in "
        f"{FISTA_MAX_ITER} iterations (n={n}, d={d}, strength={strength})"
    )


def train_logreg(features: np.ndarray, labels: np.ndarray, penalty: str,
                 strength: float = 1.0, seed: int = 0) -> LinearModel:
    """Fit one regularized logistic regression on internally z-scaled features.

    L2 is solved by damped Newton, L1 by proximal gradient with
    soft-thresholding, both to gradient norm <= 1e-6. The solvers are
    deterministic; ``seed`` is accepted for interface uniformity.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if penalty not in ("L1", "L2"):
        raise ValueError(f"penalty must be 'L1' or 'L2', got {penalty!r}")
    if strength <= 0:
        raise ValueError("strength must be > 0")
    if not (np.any(y == 1) and np.any(y == 0)):
        raise ValueError("both classes must be present")
    scaler = Scaler.fit(X)
    Z = scaler.transform(X)
    if penalty == "L2":
        w, b = _train_l2(Z, y, strength)
    else:
        w, b = _train_l1(Z, y, strength)
    return LinearModel(weights=w, intercept=b, penalty=penalty,
                       strength=strength, scaler=scaler)


def easy_ensemble(features: np.ndarray, labels: np.ndarray, n_bags: int,
                  penalty: str, strength: float = 1.0, seed: int = 0
                  ) -> EnsembleModel:
    """One linear model per class-balanced bag.

    Each bag keeps every minority example plus a uniform without-replacement
    majority subsample of equal size; the scaler of each member is fitted on
    its own bag rows.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if n_bags < 1:
        raise ValueError("n_bags must be >= 1")
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("both classes must be present")
    minority, majority = (pos, neg) if len(pos) <= len(neg) else (neg, pos)

    members = []
    for bag in range(n_bags):
        rng = np.random.default_rng(stable_seed(seed, "bag", bag))
        if len(majority) >= len(minority):
            picked = rng.choice(majority, size=len(minority), replace=False)
        else:
            log.warning("majority smaller than minority; sampling with replacement")
            picked = rng.choice(majority, size=len(minority), replace=True)
        rows = np.concatenate([minority, picked])
        members.append(
            train_logreg(X[rows], y[rows], penalty, strength,
                         seed=stable_seed(seed, "member", bag))
        )
    return EnsembleModel(members=tuple(members))


def predict_proba_linear(model: LinearModel | EnsembleModel,
                         features: np.ndarray) -> np.ndarray:
    """sigmoid(w . scaled_x + b); for ensembles the unweighted member mean."""
    X = np.asarray(features, dtype=np.float64)
    if isinstance(model, EnsembleModel):
        probs = [predict_proba_linear(m, X) for m in model.members]
        return np.mean(probs, axis=0)
    if X.shape[1] != len(model.weights):
        raise ValueError(
            f"feature width {X.shape[1]} does not match model width "
            f"{len(model.weights)}"
        )
    Z = model.scaler.transform(X)
    return expit(Z @ model.weights + model.intercept)


def _linear_payload(model: LinearModel) -> dict:
    return {
        "penalty": model.penalty,
        "strength": model.strength,
        "weights": list(model.weights),
        "intercept": model.intercept,
        "scaler": {
            "mean": list(model.scaler.mean),
            "std": list(model.scaler.std),
            "constant": [bool(c) for c in model.scaler.constant],
        },
    }


def _linear_from_payload(raw: dict) -> LinearModel:
    scaler = Scaler(
        mean=np.array(raw["scaler"]["mean"]),
        std=np.array(raw["scaler"]["std"]),
        constant=np.array(raw["scaler"]["constant"], dtype=bool),
    )
    return LinearModel(
        weights=np.array(raw["weights"]),
        intercept=raw["intercept"],
        penalty=raw["penalty"],
        strength=raw["strength"],
        scaler=scaler,
    )


def save_linear_model(model: LinearModel | EnsembleModel, path) -> None:
    """Structured text serialization (weights + scaler records)."""
    import json
    from pathlib import Path

    if isinstance(model, EnsembleModel):
        payload = {
            "kind": "linear-ensemble",
            "members": [_linear_payload(m) for m in model.members],
        }
    else:
        payload = {"kind": "linear", **_linear_payload(model)}
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_linear_model(path) -> LinearModel | EnsembleModel:
    import json
    from pathlib import Path

    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = payload.get("kind")
    if kind == "linear":
        return _linear_from_payload(payload)
    if kind == "linear-ensemble":
        return EnsembleModel(
            members=tuple(_linear_from_payload(m) for m in payload["members"])
        )
    raise ValueError(f"{path}: not a linear model file")
