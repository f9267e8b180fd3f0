"""Seeded multi-trial experiment runner and report serialization.

Each trial re-splits its dataset 60/40 (stratified) with a seed derived by
stable hashing of (master seed, dataset name, trial index), rebuilds the
outlier-score matrix on the training side, runs every configured method and
scores ROC and precision-at-n on the test side. Per-trial wall times are
kept in memory for console diagnostics but never written to artifacts, so
every emitted file is byte-for-byte reproducible from (config, seed).
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .baselines import easy_ensemble, predict_proba_linear
from .boost import BoostParams, predict_proba, train_gbt
from .data import Dataset, split_train_test
from .detectors import GridConfig, build_grid
from .evaluation import (
    friedman_mean_ranks,
    friedman_test,
    nemenyi_cd,
    precision_at_n,
    roc_auc,
    wilcoxon_rank_sum,
)
from .seeding import stable_seed
from .selection import (
    SelectionResult,
    accurate_select,
    balance_select,
    combine_features,
    random_select,
    select_all,
    select_none,
)
from .tos import TosMatrix, best_tos, build_tos, full_tos

EXP1_METHODS = (
    "Best_TOS", "Full_TOS", "L1_Comb", "L2_Comb",
    "XGB_Orig", "XGB_New", "XGB_Comb",
)
ORACLE_METHODS = frozenset({"Best_TOS"})
SELECTION_METHODS = ("RANDOM", "ACCURATE", "BALANCE")


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple[tuple[str, Dataset], ...]
    mode: str = "exp1"
    methods: tuple[str, ...] = EXP1_METHODS
    trials: int = 30
    train_fraction: float = 0.6
    grid: GridConfig = field(default_factory=GridConfig)
    boost: BoostParams = field(default_factory=BoostParams)
    bags: int = 50
    strength: float = 1.0
    best_tos_side: str = "test"
    selection_methods: tuple[str, ...] = SELECTION_METHODS
    p_values: tuple[object, ...] = (0, 1, 5, "all")
    snapshot: dict | None = None

    def __post_init__(self) -> None:
        if not self.datasets:
            raise ValueError("need at least one dataset")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode not in ("exp1", "exp2"):
            raise ValueError(f"mode must be 'exp1' or 'exp2', got {self.mode!r}")
        if self.mode == "exp1" and not self.methods:
            raise ValueError("need at least one method")
        unknown = set(self.methods) - set(EXP1_METHODS)
        if self.mode == "exp1" and unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        unknown_sel = set(self.selection_methods) - set(SELECTION_METHODS)
        if self.mode == "exp2" and unknown_sel:
            raise ValueError(f"unknown selection methods: {sorted(unknown_sel)}")

    def method_names(self) -> list[str]:
        if self.mode == "exp1":
            return list(self.methods)
        return [f"{m}:p={p}" for m in self.selection_methods for p in self.p_values]


@dataclass(frozen=True)
class TrialResult:
    dataset: str
    method: str
    trial: int
    seed: int
    roc: float
    p_at_n: float
    wall_time: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.roc <= 1.0 and 0.0 <= self.p_at_n <= 1.0):
            raise ValueError("metrics out of range")


@dataclass(frozen=True)
class MethodFailure:
    dataset: str
    method: str
    trial: int
    error: str


@dataclass(frozen=True)
class MethodSummary:
    roc_mean: float
    roc_std: float
    p_at_n_mean: float
    p_at_n_std: float
    n_trials: int
    n_failures: int


@dataclass(frozen=True)
class StatTests:
    friedman_chi2: float
    friedman_p: float
    nemenyi_cd: float | None
    mean_ranks: dict[str, float]
    wilcoxon: dict[str, float]


@dataclass
class ExperimentReport:
    mode: str
    master_seed: int
    method_order: list[str]
    dataset_order: list[str]
    summaries: dict[str, dict[str, MethodSummary]]
    trials: list[TrialResult]
    failures: list[MethodFailure]
    tests: dict[str, StatTests]
    snapshot: dict


def _boosted_scores(train_X, train_y, test_X, params: BoostParams) -> np.ndarray:
    model = train_gbt(train_X, train_y, params)
    return predict_proba(model, test_X)


def _run_method(method: str, cfg: ExperimentConfig, trial_seed: int,
                train: Dataset, test: Dataset, T: TosMatrix | None) -> np.ndarray:
    """Test-side scores of one configured method."""
    if method == "XGB_Orig":
        return _boosted_scores(train.features, train.labels, test.features, cfg.boost)
    assert T is not None
    if method == "Best_TOS":
        if cfg.best_tos_side == "train":
            j = int(np.argmax(T.train_roc))
            return T.test_scores[:, j].copy()
        _, scores = best_tos(T, test.labels, which="test")
        return scores
    if method == "Full_TOS":
        _, test_vec = full_tos(T)
        return test_vec
    if method in ("L1_Comb", "L2_Comb"):
        comb = combine_features(train.features, test.features, T, select_all(T))
        penalty = "L1" if method == "L1_Comb" else "L2"
        model = easy_ensemble(
            comb.train, train.labels, cfg.bags, penalty, cfg.strength,
            seed=stable_seed(trial_seed, method),
        )
        return predict_proba_linear(model, comb.test)
    if method == "XGB_New":
        return _boosted_scores(T.train_scores, train.labels, T.test_scores, cfg.boost)
    if method == "XGB_Comb":
        comb = combine_features(train.features, test.features, T, select_all(T))
        return _boosted_scores(comb.train, train.labels, comb.test, cfg.boost)

    # exp2 sweep entries look like "BALANCE:p=5" or "ACCURATE:p=all"
    sel_name, _, p_label = method.partition(":p=")
    p = T.k if p_label == "all" else int(p_label)
    if p == 0:
        S = select_none()
    elif sel_name == "RANDOM":
        S = random_select(T, p, seed=stable_seed(trial_seed, "random-select", p_label))
    elif sel_name == "ACCURATE":
        S = accurate_select(T, p)
    elif sel_name == "BALANCE":
        S = balance_select(T, p)
    else:
        raise ValueError(f"unknown method {method!r}")
    # Tree training is deterministic given input order, so the runner feeds
    # the classifier a canonical column order: selecting all columns then
    # builds the exact XGB_Comb matrix whatever the selection order was.
    canonical = SelectionResult(indices=tuple(sorted(S.indices)), method=S.method)
    comb = combine_features(train.features, test.features, T, canonical)
    return _boosted_scores(comb.train, train.labels, comb.test, cfg.boost)


def _needs_tos(methods: list[str]) -> bool:
    return any(m != "XGB_Orig" for m in methods)


def run_trial(cfg: ExperimentConfig, ds_name: str, ds: Dataset, trial: int,
              master_seed: int) -> tuple[list[TrialResult], list[MethodFailure]]:
    trial_seed = stable_seed(master_seed, ds_name, trial)
    train, test = split_train_test(ds, cfg.train_fraction, trial_seed)
    methods = cfg.method_names()
    results: list[TrialResult] = []
    failures: list[MethodFailure] = []
    T = None
    tos_error: str | None = None
    if _needs_tos(methods):
        try:
            T = build_tos(build_grid(cfg.grid), train, test)
        except Exception as exc:
            # every score-dependent method of this trial fails, recorded
            tos_error = f"{type(exc).__name__}: {exc}"

    for method in methods:
        if method != "XGB_Orig" and tos_error is not None:
            failures.append(
                MethodFailure(dataset=ds_name, method=method, trial=trial,
                              error=tos_error)
            )
            continue
        start = time.perf_counter()
        try:
            scores = _run_method(method, cfg, trial_seed, train, test, T)
            results.append(
                TrialResult(
                    dataset=ds_name,
                    method=method,
                    trial=trial,
                    seed=trial_seed,
                    roc=roc_auc(scores, test.labels),
                    p_at_n=precision_at_n(scores, test.labels),
                    wall_time=time.perf_counter() - start,
                )
            )
        except Exception as exc:  # recorded, never silently dropped
            failures.append(
                MethodFailure(dataset=ds_name, method=method, trial=trial,
                              error=f"{type(exc).__name__}: {exc}")
            )
    return results, failures


def _trial_task(args):
    return args[0], args[3], run_trial(args[1], args[0], args[2], args[3], args[4])


def run_experiment(cfg: ExperimentConfig, master_seed: int,
                   workers: int = 1) -> ExperimentReport:
    """Run every (dataset, trial) cell and aggregate.

    Trials are independent; with ``workers`` > 1 they run in separate
    processes. Results are keyed and sorted deterministically, so the
    report is identical for any worker count.
    """
    tasks = [
        (name, cfg, ds, trial, master_seed)
        for name, ds in cfg.datasets
        for trial in range(cfg.trials)
    ]
    outcomes: dict[tuple[str, int], tuple[list[TrialResult], list[MethodFailure]]] = {}
    if workers <= 1:
        for task in tasks:
            name, trial, out = _trial_task(task)
            outcomes[(name, trial)] = out
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for name, trial, out in pool.map(_trial_task, tasks):
                outcomes[(name, trial)] = out

    trials: list[TrialResult] = []
    failures: list[MethodFailure] = []
    for name, _ in cfg.datasets:
        for trial in range(cfg.trials):
            results, fails = outcomes[(name, trial)]
            trials.extend(results)
            failures.extend(fails)

    method_order = cfg.method_names()
    dataset_order = [name for name, _ in cfg.datasets]
    summaries: dict[str, dict[str, MethodSummary]] = {}
    for name in dataset_order:
        per_method: dict[str, MethodSummary] = {}
        for method in method_order:
            rows = [t for t in trials if t.dataset == name and t.method == method]
            n_fail = sum(
                1 for f in failures if f.dataset == name and f.method == method
            )
            if rows:
                rocs = np.array([t.roc for t in rows])
                pns = np.array([t.p_at_n for t in rows])
                per_method[method] = MethodSummary(
                    roc_mean=float(rocs.mean()),
                    roc_std=float(rocs.std(ddof=1)) if len(rows) > 1 else 0.0,
                    p_at_n_mean=float(pns.mean()),
                    p_at_n_std=float(pns.std(ddof=1)) if len(rows) > 1 else 0.0,
                    n_trials=len(rows),
                    n_failures=n_fail,
                )
            else:
                per_method[method] = MethodSummary(
                    roc_mean=float("nan"), roc_std=float("nan"),
                    p_at_n_mean=float("nan"), p_at_n_std=float("nan"),
                    n_trials=0, n_failures=n_fail,
                )
        summaries[name] = per_method

    tests = _run_stat_tests(method_order, dataset_order, summaries)
    return ExperimentReport(
        mode=cfg.mode,
        master_seed=master_seed,
        method_order=method_order,
        dataset_order=dataset_order,
        summaries=summaries,
        trials=trials,
        failures=failures,
        tests=tests,
        snapshot=cfg.snapshot or {},
    )


def _run_stat_tests(method_order, dataset_order, summaries) -> dict[str, StatTests]:
    """Friedman/Nemenyi/Wilcoxon over the per-dataset method means."""
    out: dict[str, StatTests] = {}
    k = len(method_order)
    n = len(dataset_order)
    if k < 2 or n < 2:
        return out
    for metric, attr in (("roc", "roc_mean"), ("p_at_n", "p_at_n_mean")):
        table = np.array([
            [getattr(summaries[ds][m], attr) for ds in dataset_order]
            for m in method_order
        ])
        if not np.all(np.isfinite(table)):
            continue
        chi2, p = friedman_test(table)
        ranks = friedman_mean_ranks(table)
        cd = nemenyi_cd(k, n) if 2 <= k <= 10 else None
        pairwise = {
            f"{a} vs {b}": wilcoxon_rank_sum(
                table[method_order.index(a)], table[method_order.index(b)]
            )
            for a, b in combinations(method_order, 2)
        }
        out[metric] = StatTests(
            friedman_chi2=chi2,
            friedman_p=p,
            nemenyi_cd=cd,
            mean_ranks={m: float(r) for m, r in zip(method_order, ranks)},
            wilcoxon=pairwise,
        )
    return out


def _method_label(method: str) -> str:
    return f"{method} (oracle)" if method in ORACLE_METHODS else method


def _jsonable(x: float) -> float | None:
    return None if not np.isfinite(x) else x


def report_to_json(report: ExperimentReport) -> str:
    """Machine-readable report; deterministic bytes (no wall times)."""
    payload = {
        "mode": report.mode,
        "master_seed": report.master_seed,
        "method_order": report.method_order,
        "dataset_order": report.dataset_order,
        "oracle_methods": sorted(ORACLE_METHODS & set(report.method_order)),
        "config": report.snapshot,
        "summaries": {
            ds: {
                m: {
                    "roc_mean": _jsonable(s.roc_mean),
                    "roc_std": _jsonable(s.roc_std),
                    "p_at_n_mean": _jsonable(s.p_at_n_mean),
                    "p_at_n_std": _jsonable(s.p_at_n_std),
                    "n_trials": s.n_trials,
                    "n_failures": s.n_failures,
                }
                for m, s in per.items()
            }
            for ds, per in report.summaries.items()
        },
        "tests": {
            metric: {
                "friedman_chi2": t.friedman_chi2,
                "friedman_p": t.friedman_p,
                "nemenyi_cd": t.nemenyi_cd,
                "mean_ranks": t.mean_ranks,
                "wilcoxon": t.wilcoxon,
            }
            for metric, t in report.tests.items()
        },
        "failures": [
            {"dataset": f.dataset, "method": f.method, "trial": f.trial,
             "error": f.error}
            for f in report.failures
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def trials_to_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["dataset", "method", "trial", "seed", "roc", "p_at_n"])
    for t in report.trials:
        writer.writerow([
            t.dataset, t.method, t.trial, t.seed, repr(t.roc), repr(t.p_at_n)
        ])
    return buf.getvalue()


def sweep_to_csv(report: ExperimentReport) -> str:
    """Per (selection method, p, dataset) means: the data behind the p sweep."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow([
        "dataset", "selection", "p", "roc_mean", "p_at_n_mean", "n_trials"
    ])
    for ds in report.dataset_order:
        for method in report.method_order:
            sel, _, p_label = method.partition(":p=")
            s = report.summaries[ds][method]
            writer.writerow([
                ds, sel, p_label, repr(s.roc_mean), repr(s.p_at_n_mean), s.n_trials
            ])
    return buf.getvalue()


def summary_text(report: ExperimentReport) -> str:
    """Aligned human-readable table; means match report.json digits."""
    lines: list[str] = []
    lines.append(f"mode: {report.mode}    master_seed: {report.master_seed}")
    width = max(len(_method_label(m)) for m in report.method_order)
    for ds in report.dataset_order:
        lines.append("")
        lines.append(f"dataset: {ds}")
        header = (f"  {'method'.ljust(width)}  {'ROC mean':>10}  {'ROC std':>10}"
                  f"  {'P@N mean':>10}  {'P@N std':>10}  {'trials':>6}  {'fail':>4}")
        lines.append(header)
        for m in report.method_order:
            s = report.summaries[ds][m]
            lines.append(
                f"  {_method_label(m).ljust(width)}  {s.roc_mean:>10.6f}  "
                f"{s.roc_std:>10.6f}  {s.p_at_n_mean:>10.6f}  "
                f"{s.p_at_n_std:>10.6f}  {s.n_trials:>6d}  {s.n_failures:>4d}"
            )
    for metric, t in report.tests.items():
        lines.append("")
        lines.append(
            f"{metric}: Friedman chi2 = {t.friedman_chi2:.4f}, "
            f"p = {t.friedman_p:.6g}"
            + (f", Nemenyi CD(alpha=0.05) = {t.nemenyi_cd:.4f}"
               if t.nemenyi_cd is not None else "")
        )
        for m in report.method_order:
            lines.append(f"  mean rank {_method_label(m).ljust(width)} "
                         f"{t.mean_ranks[m]:.4f}")
        for pair, p in t.wilcoxon.items():
            lines.append(f"  wilcoxon {pair}: p = {p:.6g}")
    if report.failures:
        lines.append("")
        lines.append(f"failures: {len(report.failures)}")
        for f in report.failures:
            lines.append(
                f"  {f.dataset} {f.method} trial {f.trial}: {f.error}"
            )
    return "\n".join(lines) + "\n"
