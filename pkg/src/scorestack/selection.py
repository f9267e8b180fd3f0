"""TOS selection strategies and construction of the combined feature space.

Three strategies pick p columns out of a TosMatrix: uniformly at random,
by training ROC alone, or greedily by ROC discounted by the absolute Pearson
correlation against the already selected columns. All ties break toward the
lowest column index so selections are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tos import TosMatrix

# Floor for the correlation sum in the discounted-accuracy ratio: a fully
# decorrelated candidate would otherwise divide by ~0.
PSI_DENOM_FLOOR = 1e-6

METHODS = ("RANDOM", "ACCURATE", "BALANCE", "ALL", "NONE")


@dataclass(frozen=True)
class SelectionStep:
    """One greedy step: the chosen column, its ROC, and the discounted
    accuracy of every candidate at that step (None for the seeding step)."""

    index: int
    acc: float
    psi: float | None = None
    candidate_psi: dict[int, float] | None = None


@dataclass(frozen=True)
class SelectionResult:
    indices: tuple[int, ...]
    method: str
    trace: tuple[SelectionStep, ...] = ()

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown selection method {self.method!r}")
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("selected indices must be distinct")

    @property
    def p(self) -> int:
        return len(self.indices)


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Sample Pearson correlation; zero-variance vectors correlate to 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise ValueError("need length >= 2")
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt((da ** 2).sum() * (db ** 2).sum())
    if denom == 0.0:
        return 0.0
    return float(np.clip((da * db).sum() / denom, -1.0, 1.0))


def _check_p(p: int, k: int) -> None:
    if not (0 <= p <= k):
        raise ValueError(f"p must lie in [0, k={k}], got {p}")


def random_select(T: TosMatrix, p: int, seed: int) -> SelectionResult:
    """p distinct column indices sampled uniformly, deterministic per seed."""
    _check_p(p, T.k)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(T.k, size=p, replace=False)
    return SelectionResult(indices=tuple(int(i) for i in chosen), method="RANDOM")


def accurate_select(T: TosMatrix, p: int) -> SelectionResult:
    """The p columns with the highest training ROC, best first."""
    _check_p(p, T.k)
    order = np.lexsort((np.arange(T.k), -T.train_roc))
    chosen = order[:p]
    trace = tuple(
        SelectionStep(index=int(i), acc=float(T.train_roc[i])) for i in chosen
    )
    return SelectionResult(indices=tuple(int(i) for i in chosen),
                           method="ACCURATE", trace=trace)


def balance_select(T: TosMatrix, p: int) -> SelectionResult:
    """Greedy accuracy/diversity selection.

    The first pick is the most accurate column. Each later step picks the
    candidate maximising ACC_i / max(sum_j |rho(i, j)|, floor) over the
    already selected columns j, with correlations computed on the train
    score columns only.
    """
    _check_p(p, T.k)
    if p == 0:
        return SelectionResult(indices=(), method="BALANCE")

    n, k = T.train_scores.shape
    # Population z-scored columns make each pairwise correlation a dot/n.
    means = T.train_scores.mean(axis=0)
    stds = T.train_scores.std(axis=0)
    Z = np.where(stds > 0, (T.train_scores - means) / np.where(stds > 0, stds, 1.0), 0.0)

    acc = T.train_roc
    remaining = list(range(k))
    first = int(np.argmax(acc))
    chosen = [first]
    trace = [SelectionStep(index=first, acc=float(acc[first]))]
    remaining.remove(first)
    corr_sum = np.abs(Z.T @ Z[:, first]) / n

    while len(chosen) < p:
        cand = np.array(remaining)
        denom = np.maximum(corr_sum[cand], PSI_DENOM_FLOOR)
        psi = acc[cand] / denom
        best_pos = int(np.argmax(psi))
        best = int(cand[best_pos])
        trace.append(
            SelectionStep(
                index=best,
                acc=float(acc[best]),
                psi=float(psi[best_pos]),
                candidate_psi={int(c): float(v) for c, v in zip(cand, psi)},
            )
        )
        chosen.append(best)
        remaining.remove(best)
        corr_sum += np.abs(Z.T @ Z[:, best]) / n

    return SelectionResult(indices=tuple(chosen), method="BALANCE",
                           trace=tuple(trace))


def select_all(T: TosMatrix) -> SelectionResult:
    return SelectionResult(indices=tuple(range(T.k)), method="ALL")


def select_none() -> SelectionResult:
    return SelectionResult(indices=(), method="NONE")


def selection_report_row(S: SelectionResult, specs) -> dict:
    """JSON-ready report row: method, p, ordered spec names, per-step trace."""
    labels = [spec.label() for spec in specs]
    return {
        "method": S.method,
        "p": S.p,
        "specs": [labels[i] for i in S.indices],
        "trace": [
            {
                "index": step.index,
                "spec": labels[step.index],
                "acc": step.acc,
                "psi": step.psi,
            }
            for step in S.trace
        ],
    }


@dataclass(frozen=True)
class CombinedFeatureSpace:
    """Original features horizontally concatenated with selected TOS columns.

    The first ``d_original`` columns are the untouched original features;
    the rest are the selected TOS columns in selection order. No scaling is
    applied to either block.
    """

    train: np.ndarray
    test: np.ndarray
    d_original: int
    selected: SelectionResult


def combine_features(
    train_X: np.ndarray,
    test_X: np.ndarray,
    T: TosMatrix,
    S: SelectionResult,
) -> CombinedFeatureSpace:
    train_X = np.asarray(train_X, dtype=np.float64)
    test_X = np.asarray(test_X, dtype=np.float64)
    if train_X.shape[0] != T.train_scores.shape[0]:
        raise ValueError("train row count does not match the TOS matrix")
    if test_X.shape[0] != T.test_scores.shape[0]:
        raise ValueError("test row count does not match the TOS matrix")
    idx = list(S.indices)
    train = np.hstack([train_X, T.train_scores[:, idx]])
    test = np.hstack([test_X, T.test_scores[:, idx]])
    return CombinedFeatureSpace(
        train=train, test=test, d_original=train_X.shape[1], selected=S
    )
