"""One-class SVM scored via an SMO solver on the nu-parameterised dual.

The dual solved here is: minimise 0.5 * a^T K a subject to 0 <= a_i <= 1 and
sum(a) = nu * n, with an RBF kernel. nu upper-bounds the fraction of training
points treated as margin errors. The outlier score of a point x is the
negated decision value rho - sum_j a_j K(x_j, x): higher = more outlying.
"""

from __future__ import annotations

import numpy as np

from ..seeding import stable_seed
from ._distances import pairwise_sq_distances
from .specs import DetectorSpec


class ConvergenceError(RuntimeError):
    """SMO failed to reach the requested tolerance within its work budget."""


SMO_TOL = 1e-3
# Work budget expressed in kernel evaluations; with the kernel matrix held
# in memory each pass touches 2n entries, and a floor keeps small problems
# from being starved.
KERNEL_EVAL_BUDGET = 10_000_000
MIN_ITERATIONS = 20_000

_BOUND_EPS = 1e-12


def _rbf(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * pairwise_sq_distances(a, b))


def _solve_smo(K: np.ndarray, nu: float, tol: float, max_iter: int
               ) -> tuple[np.ndarray, float, int]:
    """Return (alpha, rho, iterations) for the one-class dual."""
    n = K.shape[0]
    alpha = np.zeros(n)
    total = nu * n
    full = int(np.floor(total))
    alpha[:full] = 1.0
    if full < n:
        alpha[full] = total - full
    grad = K @ alpha

    for it in range(max_iter):
        can_up = alpha < 1.0 - _BOUND_EPS
        can_down = alpha > _BOUND_EPS
        # Maximal violating pair: raise the coordinate with the smallest
        # gradient, lower the one with the largest.
        up = np.where(can_up, grad, np.inf)
        down = np.where(can_down, grad, -np.inf)
        i = int(np.argmin(up))
        j = int(np.argmax(down))
        gap = grad[j] - grad[i]
        if gap <= tol:
            return alpha, _compute_rho(alpha, grad), it
        a = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if a > 0:
            step = gap / a
        else:
            step = np.inf
        step = min(step, 1.0 - alpha[i], alpha[j])
        alpha[i] += step
        alpha[j] -= step
        grad += step * (K[:, i] - K[:, j])

    raise ConvergenceError(
        f"one-class SMO did not converge: n={n}, nu={nu}, tol={tol}, "
        f"iterations={max_iter}, remaining KKT gap={gap:.3e}"
    )


def _compute_rho(alpha: np.ndarray, grad: np.ndarray) -> float:
    free = (alpha > _BOUND_EPS) & (alpha < 1.0 - _BOUND_EPS)
    if np.any(free):
        return float(grad[free].mean())
    lower = grad[alpha >= 1.0 - _BOUND_EPS]
    upper = grad[alpha <= _BOUND_EPS]
    lo = lower.max() if len(lower) else -np.inf
    hi = upper.min() if len(upper) else np.inf
    if np.isinf(lo) and np.isinf(hi):
        return 0.0
    if np.isinf(lo):
        return float(hi)
    if np.isinf(hi):
        return float(lo)
    return float((lo + hi) / 2.0)


class OneClassSVMDetector:
    """Fitted nu one-class SVM with RBF kernel."""

    def __init__(self, spec: DetectorSpec, train: np.ndarray):
        train = np.asarray(train, dtype=np.float64)
        self.spec = spec
        self.train = train
        self.d = train.shape[1]

        fit_rows = train
        self.capped = spec.subsample is not None and train.shape[0] > spec.subsample
        if self.capped:
            rng = np.random.default_rng(stable_seed(spec.seed, "ocsvm-cap"))
            keep = np.sort(rng.choice(train.shape[0], spec.subsample, replace=False))
            fit_rows = train[keep]
        n, d = fit_rows.shape

        if spec.gamma_mode == "scale":
            var = float(fit_rows.var())
            self.gamma = 1.0 / (d * var) if var > 0 else 1.0 / d
        else:
            self.gamma = float(spec.gamma_mode)

        K = _rbf(fit_rows, fit_rows, self.gamma)
        max_iter = max(MIN_ITERATIONS, KERNEL_EVAL_BUDGET // (2 * n))
        alpha, rho, self.iterations = _solve_smo(K, spec.nu, SMO_TOL, max_iter)
        keep_sv = alpha > _BOUND_EPS
        self.support = fit_rows[keep_sv]
        self.alpha = alpha[keep_sv]
        self.rho = rho

    def _decision(self, points: np.ndarray) -> np.ndarray:
        return _rbf(points, self.support, self.gamma) @ self.alpha - self.rho

    def score_points(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        if points.shape[1] != self.d:
            raise ValueError(
                f"dimension mismatch: query d={points.shape[1]}, train d={self.d}"
            )
        return -self._decision(points)

    def score_training(self) -> np.ndarray:
        return self.score_points(self.train)
