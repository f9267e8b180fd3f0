"""Ranking metrics and the nonparametric tests used to compare methods.

roc_auc counts tied score pairs as 1/2, matching the probability that a
random positive outranks a random negative. precision_at_n takes n to be
the number of true positives in the evaluated labels. The Friedman test
uses average ranks on ties with rank 1 = best (highest metric).
"""

from __future__ import annotations

import csv
import itertools
import math
from importlib import resources

import numpy as np
from scipy.stats import chi2, norm

# Studentized-range derived critical values q_0.05(k)/sqrt(2) for k = 2..10,
# the only alpha level embedded (verified against scipy.stats
# studentized_range in the test suite).
NEMENYI_Q_05 = {
    2: 1.960, 3: 2.343, 4: 2.569, 5: 2.728, 6: 2.850,
    7: 2.949, 8: 3.031, 9: 3.102, 10: 3.164,
}


def average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n of ``values`` in ascending order, ties get average ranks."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve with ties counted as 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes present")
    ranks = average_ranks(scores)
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def precision_at_n(scores: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of true positives among the top-n scored points.

    n is the number of positives in ``labels``; score ties are broken by
    lower index.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n = int((labels == 1).sum())
    if n == 0:
        raise ValueError("precision_at_n needs at least one positive")
    top = np.argsort(-scores, kind="stable")[:n]
    return float((labels[top] == 1).mean())


def friedman_test(metric_table: np.ndarray) -> tuple[float, float]:
    """Friedman chi-squared over a (methods x datasets) metric table.

    Methods are ranked per dataset with rank 1 for the highest metric and
    average ranks on ties; the p-value comes from the chi-squared
    distribution with k-1 degrees of freedom.
    """
    table = np.asarray(metric_table, dtype=np.float64)
    if table.ndim != 2:
        raise ValueError("metric_table must be 2-D (methods x datasets)")
    k, n = table.shape
    if k < 2 or n < 2:
        raise ValueError(f"need >= 2 methods and >= 2 datasets, got {k}x{n}")
    rank_sums = np.zeros(k)
    for j in range(n):
        rank_sums += average_ranks(-table[:, j])
    stat = 12.0 / (n * k * (k + 1)) * float((rank_sums ** 2).sum()) - 3.0 * n * (k + 1)
    p = float(chi2.sf(stat, df=k - 1))
    return float(stat), p


def friedman_mean_ranks(metric_table: np.ndarray) -> np.ndarray:
    """Per-method mean rank (1 = best) used alongside the Nemenyi CD."""
    table = np.asarray(metric_table, dtype=np.float64)
    k, n = table.shape
    rank_sums = np.zeros(k)
    for j in range(n):
        rank_sums += average_ranks(-table[:, j])
    return rank_sums / n


def nemenyi_cd(k: int, n: int, alpha: float = 0.05) -> float:
    """Critical difference of mean ranks at the given alpha (0.05 only)."""
    if alpha != 0.05:
        raise ValueError("only alpha = 0.05 is embedded")
    if k not in NEMENYI_Q_05:
        raise ValueError(f"k must lie in [2, 10], got {k}")
    if n < 1:
        raise ValueError("need n >= 1 datasets")
    return NEMENYI_Q_05[k] * math.sqrt(k * (k + 1) / (6.0 * n))


def load_benchmark_fixture(metric: str) -> tuple[list[str], list[str], np.ndarray]:
    """Bundled published benchmark means for the rank tests.

    Returns (methods, datasets, table) with table shaped methods x datasets,
    ready for :func:`friedman_test`. ``metric`` is "roc" or "pn".
    """
    if metric not in ("roc", "pn"):
        raise ValueError("metric must be 'roc' or 'pn'")
    name = f"benchmark_{metric}.csv"
    text = resources.files("scorestack.fixtures").joinpath(name).read_text("utf-8")
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    methods = rows[0][1:]
    datasets = [r[0] for r in rows[1:]]
    table = np.array([[float(v) for v in r[1:]] for r in rows[1:]]).T
    return methods, datasets, table


EXACT_LIMIT = 12


def wilcoxon_rank_sum(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sided rank-sum p-value.

    Exact permutation enumeration when len(a) + len(b) <= 12, otherwise a
    normal approximation with tie and continuity corrections.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 1 or len(b) < 1:
        raise ValueError("both samples must be non-empty")
    if len(a) + len(b) <= EXACT_LIMIT:
        return _wilcoxon_exact(a, b)
    return _wilcoxon_normal(a, b)


def _wilcoxon_exact(a: np.ndarray, b: np.ndarray) -> float:
    combined = np.concatenate([a, b])
    ranks = average_ranks(combined)
    n1 = len(a)
    observed = float(ranks[:n1].sum())
    # Average ranks are multiples of 1/2, so these sums compare exactly.
    total = math.comb(len(combined), n1)
    le = 0
    ge = 0
    for comb in itertools.combinations(range(len(combined)), n1):
        w = float(ranks[list(comb)].sum())
        if w <= observed:
            le += 1
        if w >= observed:
            ge += 1
    return min(1.0, 2.0 * min(le, ge) / total)


def _wilcoxon_normal(a: np.ndarray, b: np.ndarray) -> float:
    combined = np.concatenate([a, b])
    ranks = average_ranks(combined)
    n1, n2 = len(a), len(b)
    n = n1 + n2
    w = float(ranks[:n1].sum())
    mean = n1 * (n + 1) / 2.0
    _, counts = np.unique(combined, return_counts=True)
    tie_term = float(((counts ** 3) - counts).sum()) / (n * (n - 1))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return 1.0
    diff = w - mean
    if diff > 0:
        diff -= 0.5
    elif diff < 0:
        diff += 0.5
    z = diff / math.sqrt(var)
    return min(1.0, 2.0 * float(norm.sf(abs(z))))
