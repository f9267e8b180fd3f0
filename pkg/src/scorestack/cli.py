"""Config-driven command surface.

Commands: ``synth`` (write a synthetic benchmark CSV), ``tos`` (export the
outlier-score matrix of one dataset), ``experiment --mode exp1|exp2`` (the
multi-trial comparison runs), and ``report --render`` (re-render a stored
report.json as text). Exit codes: 0 = ran, 1 = ran with method failures,
2 = config error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import yaml

from .boost import BoostParams
from .data import (
    Dataset,
    PRESETS,
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    preset,
    save_csv,
    split_train_test,
)
from .detectors import GridConfig, build_grid
from .experiment import (
    EXP1_METHODS,
    ExperimentConfig,
    ExperimentReport,
    MethodFailure,
    MethodSummary,
    StatTests,
    report_to_json,
    run_experiment,
    summary_text,
    sweep_to_csv,
    trials_to_csv,
)
from .seeding import stable_seed
from .tos import build_tos, export_csv


class ConfigError(click.ClickException):
    exit_code = 2


def _load_yaml(path: str) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return raw


def _resolve_datasets(raw: dict) -> tuple[tuple[str, Dataset], ...]:
    entries = raw.get("datasets")
    if not entries:
        raise ConfigError("config field 'datasets' must list at least one dataset")
    resolved = []
    for i, entry in enumerate(entries):
        if isinstance(entry, str):
            entry = {"preset": entry}
        if not isinstance(entry, dict):
            raise ConfigError(f"datasets[{i}]: expected a mapping or preset name")
        if "preset" in entry:
            try:
                spec = preset(entry["preset"])
            except ValueError as exc:
                raise ConfigError(f"datasets[{i}]: {exc}") from None
            name = entry.get("name", spec.name)
            ds = generate_synthetic(spec)
        elif "path" in entry:
            label = entry.get("label_column", "label")
            try:
                ds = load_csv(entry["path"], label_column=label)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"datasets[{i}]: {exc}") from None
            name = entry.get("name", ds.name)
        else:
            raise ConfigError(f"datasets[{i}]: needs 'preset' or 'path'")
        if ds.labels is None:
            raise ConfigError(f"datasets[{i}] ({name}): labels are required")
        resolved.append((name, ds))
    names = [n for n, _ in resolved]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate dataset names: {names}")
    return tuple(resolved)


def _boost_params(raw: dict) -> BoostParams:
    section = raw.get("boost", {}) or {}
    mapping = {
        "rounds": "n_rounds",
        "depth": "max_depth",
        "learning_rate": "learning_rate",
        "lambda": "reg_lambda",
        "reg_lambda": "reg_lambda",
        "gamma": "gamma",
        "min_child_weight": "min_child_weight",
        "base_score": "base_score",
        "seed": "seed",
    }
    kwargs = {}
    for key, value in section.items():
        if key not in mapping:
            raise ConfigError(f"boost: unknown key {key!r}")
        kwargs[mapping[key]] = value
    try:
        return BoostParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"boost: {exc}") from None


def build_experiment_config(raw: dict, mode: str,
                            seed_override: int | None = None) -> tuple[ExperimentConfig, int]:
    """Validate a parsed YAML mapping into an ExperimentConfig + master seed."""
    known = {
        "datasets", "trials", "train_fraction", "master_seed", "workers",
        "output_dir", "grid", "methods", "boost", "baselines",
        "best_tos_side", "selection",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")

    datasets = _resolve_datasets(raw)
    master_seed = int(raw.get("master_seed", 0))
    if seed_override is not None:
        master_seed = seed_override

    try:
        grid = GridConfig.from_dict(raw.get("grid", {}) or {},
                                    seed=stable_seed(master_seed, "grid"))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None

    baselines = raw.get("baselines", {}) or {}
    unknown_b = set(baselines) - {"bags", "strength"}
    if unknown_b:
        raise ConfigError(f"baselines: unknown keys {sorted(unknown_b)}")

    selection = raw.get("selection", {}) or {}
    unknown_s = set(selection) - {"methods", "p"}
    if unknown_s:
        raise ConfigError(f"selection: unknown keys {sorted(unknown_s)}")
    p_values = tuple(
        "all" if p == "all" else int(p) for p in selection.get("p", (0, 1, 5, "all"))
    )

    try:
        cfg = ExperimentConfig(
            datasets=datasets,
            mode=mode,
            methods=tuple(raw.get("methods", EXP1_METHODS)),
            trials=int(raw.get("trials", 30)),
            train_fraction=float(raw.get("train_fraction", 0.6)),
            grid=grid,
            boost=_boost_params(raw),
            bags=int(baselines.get("bags", 50)),
            strength=float(baselines.get("strength", 1.0)),
            best_tos_side=str(raw.get("best_tos_side", "test")),
            selection_methods=tuple(
                selection.get("methods", ("RANDOM", "ACCURATE", "BALANCE"))
            ),
            p_values=p_values,
            snapshot=_snapshot(raw, master_seed, mode),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg, master_seed


def _snapshot(raw: dict, master_seed: int, mode: str) -> dict:
    snap = json.loads(json.dumps(raw, sort_keys=True))
    snap["master_seed"] = master_seed
    snap["mode"] = mode
    return snap


@click.group()
def main() -> None:
    """Outlier-score stacking toolkit."""


@main.command()
@click.option("--preset", "preset_name", type=click.Choice(sorted(PRESETS)),
              default=None, help="Named benchmark preset.")
@click.option("--n", type=int, default=None, help="Point count.")
@click.option("--d", type=int, default=None, help="Feature count.")
@click.option("--fraction", type=float, default=None, help="Outlier fraction.")
@click.option("--separation", type=float, default=3.0)
@click.option("--informative", type=int, default=1)
@click.option("--seed", type=int, default=None,
              help="Override the preset seed / seed an explicit spec.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def synth(preset_name, n, d, fraction, separation, informative, seed, out):
    """Generate a synthetic benchmark and write it as CSV."""
    if preset_name is not None:
        spec = preset(preset_name)
        if seed is not None:
            from dataclasses import replace
            spec = replace(spec, seed=seed)
    else:
        if n is None or d is None or fraction is None:
            raise ConfigError("either --preset or all of --n/--d/--fraction")
        try:
            spec = SyntheticSpec(n=n, d=d, outlier_fraction=fraction,
                                 separation=separation,
                                 informative_dims=informative,
                                 seed=seed if seed is not None else 0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    ds = generate_synthetic(spec)
    try:
        save_csv(ds, out)
    except OSError as exc:
        click.echo(f"error: cannot write {out}: {exc}", err=True)
        sys.exit(1)
    click.echo(f"{out}: n={ds.n} d={ds.d} outliers={ds.n_outliers} "
               f"({100.0 * ds.n_outliers / ds.n:.2f}%)")


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=False))
@click.option("--seed", type=int, default=None, help="Override master_seed.")
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False))
def tos(config_path, seed, out_dir):
    """Export the train/test TOS matrices of the configured dataset."""
    raw = _load_yaml(config_path)
    cfg, master_seed = build_experiment_config(raw, mode="exp1",
                                               seed_override=seed)
    if len(cfg.datasets) != 1:
        raise ConfigError("the tos command needs exactly one dataset")
    name, ds = cfg.datasets[0]
    out = Path(out_dir or raw.get("output_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    train, test = split_train_test(ds, cfg.train_fraction,
                                   stable_seed(master_seed, name, 0))
    try:
        T = build_tos(build_grid(cfg.grid), train, test)
    except ValueError as exc:
        click.echo(f"error: no TOS produced: {exc}", err=True)
        sys.exit(1)
    export_csv(T, out / "train_tos.csv", out / "test_tos.csv",
               out / "train_roc.csv")
    click.echo(f"wrote {T.k} TOS columns for {name} to {out}/")


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=False))
@click.option("--mode", type=click.Choice(["exp1", "exp2"]), default="exp1")
@click.option("--seed", type=int, default=None, help="Override master_seed.")
@click.option("--workers", type=int, default=None)
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False))
def experiment(config_path, mode, seed, workers, out_dir):
    """Run the configured experiment and write report files."""
    raw = _load_yaml(config_path)
    cfg, master_seed = build_experiment_config(raw, mode=mode,
                                               seed_override=seed)
    n_workers = workers if workers is not None else int(raw.get("workers", 1))
    out = Path(out_dir or raw.get("output_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)

    report = run_experiment(cfg, master_seed, workers=n_workers)

    (out / "report.json").write_text(report_to_json(report), encoding="utf-8")
    (out / "trials.csv").write_text(trials_to_csv(report), encoding="utf-8")
    (out / "summary.txt").write_text(summary_text(report), encoding="utf-8")
    if mode == "exp2":
        (out / "sweep.csv").write_text(sweep_to_csv(report), encoding="utf-8")
    click.echo(summary_text(report))
    click.echo(f"report written to {out}/")
    if report.failures:
        click.echo(f"{len(report.failures)} method failures (see summary.txt)",
                   err=True)
        sys.exit(1)


@main.command()
@click.option("--render", "report_path", required=True,
              type=click.Path(exists=False))
def report(report_path):
    """Re-render a stored report.json as the aligned text summary."""
    try:
        payload = json.loads(Path(report_path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"report file not found: {report_path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse {report_path}: {exc}") from None
    click.echo(summary_text(_report_from_payload(payload)), nl=False)


def _report_from_payload(payload: dict) -> ExperimentReport:
    def num(x):
        return float("nan") if x is None else float(x)

    summaries = {
        ds: {
            m: MethodSummary(
                roc_mean=num(s["roc_mean"]), roc_std=num(s["roc_std"]),
                p_at_n_mean=num(s["p_at_n_mean"]), p_at_n_std=num(s["p_at_n_std"]),
                n_trials=s["n_trials"], n_failures=s["n_failures"],
            )
            for m, s in per.items()
        }
        for ds, per in payload["summaries"].items()
    }
    tests = {
        metric: StatTests(
            friedman_chi2=t["friedman_chi2"], friedman_p=t["friedman_p"],
            nemenyi_cd=t["nemenyi_cd"], mean_ranks=t["mean_ranks"],
            wilcoxon=t["wilcoxon"],
        )
        for metric, t in payload["tests"].items()
    }
    failures = [
        MethodFailure(dataset=f["dataset"], method=f["method"],
                      trial=f["trial"], error=f["error"])
        for f in payload["failures"]
    ]
    return ExperimentReport(
        mode=payload["mode"],
        master_seed=payload["master_seed"],
        method_order=payload["method_order"],
        dataset_order=payload["dataset_order"],
        summaries=summaries,
        trials=[],
        failures=failures,
        tests=tests,
        snapshot=payload.get("config", {}),
    )


if __name__ == "__main__":
    main()
