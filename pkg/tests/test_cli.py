import csv
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from scorestack.cli import main
from scorestack.detectors import spec_from_string


@pytest.fixture
def runner():
    return CliRunner()


def write_config(tmp_path, text, name="config.yaml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


SMALL_EXPERIMENT = """
master_seed: 21
trials: 2
datasets:
  - name: tiny
    preset: synth-cardio-like
methods: [XGB_Orig, XGB_Comb]
grid:
  knn_k: [3]
  avg_knn_k: [3]
  k_median_k: []
  lof_k: []
  loop_k: []
  ocsvm_nu: []
  iforest_trees: [10]
boost:
  rounds: 10
  depth: 2
selection:
  p: [0, 1, all]
"""


class TestSynth:
    def test_preset_shape(self, runner, tmp_path):
        out = tmp_path / "cardio.csv"
        result = runner.invoke(main, ["synth", "--preset", "synth-cardio-like",
                                      "--out", str(out)])
        assert result.exit_code == 0, result.output
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        header, data = rows[0], rows[1:]
        assert len(data) == 1831
        assert len(header) == 22 and header[-1] == "label"
        assert sum(1 for r in data if r[-1] == "1") == 176
        assert "n=1831" in result.output and "d=21" in result.output

    def test_explicit_spec(self, runner, tmp_path):
        out = tmp_path / "s.csv"
        result = runner.invoke(main, [
            "synth", "--n", "100", "--d", "5", "--fraction", "0.1",
            "--seed", "4", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        assert sum(1 for r in rows if r[-1] == "1") == 10

    def test_unwritable_path_exits_nonzero(self, runner):
        bad = "/nonexistent-dir/file.csv"
        result = runner.invoke(main, ["synth", "--preset", "synth-cardio-like",
                                      "--out", bad])
        assert result.exit_code == 1
        assert bad in result.output

    def test_missing_spec_is_config_error(self, runner, tmp_path):
        result = runner.invoke(main, ["synth", "--out", str(tmp_path / "x.csv")])
        assert result.exit_code == 2


class TestTos:
    def test_exports_columns_and_sidecar(self, runner, tmp_path):
        cfg = write_config(tmp_path, """
master_seed: 3
datasets: [{name: t, preset: synth-cardio-like}]
grid:
  knn_k: []
  avg_knn_k: []
  k_median_k: []
  lof_k: []
  loop_k: []
  ocsvm_nu: []
  iforest_trees: [10, 30, 50, 70, 100, 150, 200, 250]
""")
        result = runner.invoke(main, ["tos", "--config", cfg,
                                      "--out", str(tmp_path / "o")])
        assert result.exit_code == 0, result.output
        with open(tmp_path / "o" / "train_tos.csv", newline="") as fh:
            header = next(csv.reader(fh))
        assert len(header) == 8
        for h in header:
            assert spec_from_string(h).kind == "IFOREST"
        roc_rows = (tmp_path / "o" / "train_roc.csv").read_text().splitlines()
        assert len(roc_rows) == 9

    def test_all_skipped_exits_one(self, runner, tmp_path):
        cfg = write_config(tmp_path, """
master_seed: 3
datasets:
  - name: t
    preset: synth-cardio-like
grid:
  knn_k: [5000]
  avg_knn_k: []
  k_median_k: []
  lof_k: []
  loop_k: []
  ocsvm_nu: []
  iforest_trees: []
""")
        result = runner.invoke(main, ["tos", "--config", cfg,
                                      "--out", str(tmp_path / "o")])
        assert result.exit_code == 1
        assert "no TOS produced" in result.output

    def test_rerun_byte_identical(self, runner, tmp_path):
        cfg = write_config(tmp_path, """
master_seed: 5
datasets: [{name: t, preset: synth-cardio-like}]
grid: {knn_k: [3], avg_knn_k: [], k_median_k: [], lof_k: [], loop_k: [],
       ocsvm_nu: [], iforest_trees: [10]}
""")
        for d in ("a", "b"):
            result = runner.invoke(main, ["tos", "--config", cfg,
                                          "--out", str(tmp_path / d)])
            assert result.exit_code == 0, result.output
        for name in ("train_tos.csv", "test_tos.csv", "train_roc.csv"):
            assert ((tmp_path / "a" / name).read_bytes()
                    == (tmp_path / "b" / name).read_bytes())


class TestExperiment:
    def test_exp1_outputs(self, runner, tmp_path):
        cfg = write_config(tmp_path, SMALL_EXPERIMENT)
        out = tmp_path / "run"
        result = runner.invoke(main, ["experiment", "--config", cfg,
                                      "--mode", "exp1", "--out", str(out)])
        assert result.exit_code == 0, result.output
        payload = json.loads((out / "report.json").read_text())
        assert payload["method_order"] == ["XGB_Orig", "XGB_Comb"]
        for m in payload["method_order"]:
            assert payload["summaries"]["tiny"][m]["n_trials"] == 2
        assert (out / "trials.csv").exists()
        assert (out / "summary.txt").exists()
        assert not (out / "sweep.csv").exists()

    def test_exp1_rerun_byte_identical(self, runner, tmp_path):
        cfg = write_config(tmp_path, SMALL_EXPERIMENT)
        blobs = []
        for d in ("r1", "r2"):
            result = runner.invoke(main, ["experiment", "--config", cfg,
                                          "--out", str(tmp_path / d)])
            assert result.exit_code == 0, result.output
            blobs.append((tmp_path / d / "report.json").read_bytes())
        assert blobs[0] == blobs[1]

    def test_exp2_sweep_rows(self, runner, tmp_path):
        cfg = write_config(tmp_path, SMALL_EXPERIMENT)
        out = tmp_path / "run2"
        result = runner.invoke(main, ["experiment", "--config", cfg,
                                      "--mode", "exp2", "--out", str(out)])
        assert result.exit_code == 0, result.output
        lines = (out / "sweep.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 3 * 3  # three selections x p in {0,1,all}
        payload = json.loads((out / "report.json").read_text())
        # p=0 rows equal XGB_Orig metrics from the exp1 run with same seed
        exp1 = tmp_path / "ref"
        assert runner.invoke(main, ["experiment", "--config", cfg,
                                    "--out", str(exp1)]).exit_code == 0
        ref = json.loads((exp1 / "report.json").read_text())
        orig = ref["summaries"]["tiny"]["XGB_Orig"]["roc_mean"]
        for sel in ("RANDOM", "ACCURATE", "BALANCE"):
            got = payload["summaries"]["tiny"][f"{sel}:p=0"]["roc_mean"]
            assert got == orig

    def test_seed_override_changes_report(self, runner, tmp_path):
        cfg = write_config(tmp_path, SMALL_EXPERIMENT)
        r1 = runner.invoke(main, ["experiment", "--config", cfg,
                                  "--out", str(tmp_path / "s1")])
        r2 = runner.invoke(main, ["experiment", "--config", cfg, "--seed", "99",
                                  "--out", str(tmp_path / "s2")])
        assert r1.exit_code == 0 and r2.exit_code == 0
        a = json.loads((tmp_path / "s1" / "report.json").read_text())
        b = json.loads((tmp_path / "s2" / "report.json").read_text())
        assert a["master_seed"] != b["master_seed"]

    def test_config_error_exits_two(self, runner, tmp_path):
        cfg = write_config(tmp_path, "datasets: []\n")
        result = runner.invoke(main, ["experiment", "--config", cfg])
        assert result.exit_code == 2
        cfg2 = write_config(tmp_path, "unknown_field: 3\ndatasets: [{preset: synth-cardio-like}]\n",
                            name="c2.yaml")
        result2 = runner.invoke(main, ["experiment", "--config", cfg2])
        assert result2.exit_code == 2
        assert "unknown config fields" in result2.output
        cfg3 = write_config(tmp_path, "datasets: [\n", name="c3.yaml")
        result3 = runner.invoke(main, ["experiment", "--config", cfg3])
        assert result3.exit_code == 2

    def test_missing_config_file(self, runner):
        result = runner.invoke(main, ["experiment", "--config", "/no/file.yaml"])
        assert result.exit_code == 2

    def test_csv_dataset_source(self, runner, tmp_path):
        data = tmp_path / "d.csv"
        synth = runner.invoke(main, ["synth", "--n", "120", "--d", "4",
                                     "--fraction", "0.1", "--seed", "2",
                                     "--out", str(data)])
        assert synth.exit_code == 0
        cfg = write_config(tmp_path, f"""
master_seed: 4
trials: 1
datasets: [{{name: file-ds, path: {data}, label_column: label}}]
methods: [XGB_Orig]
grid: {{knn_k: [3], avg_knn_k: [], k_median_k: [], lof_k: [], loop_k: [],
        ocsvm_nu: [], iforest_trees: []}}
boost: {{rounds: 5}}
""")
        result = runner.invoke(main, ["experiment", "--config", cfg,
                                      "--out", str(tmp_path / "fo")])
        assert result.exit_code == 0, result.output


class TestReportRender:
    def test_round_trip_matches_summary(self, runner, tmp_path):
        cfg = write_config(tmp_path, SMALL_EXPERIMENT)
        out = tmp_path / "run"
        assert runner.invoke(main, ["experiment", "--config", cfg,
                                    "--out", str(out)]).exit_code == 0
        rendered = runner.invoke(main, ["report", "--render",
                                        str(out / "report.json")])
        assert rendered.exit_code == 0
        assert rendered.output == (out / "summary.txt").read_text()

    def test_missing_report(self, runner):
        result = runner.invoke(main, ["report", "--render", "/no/report.json"])
        assert result.exit_code == 2


class TestSynthSeedOverride:
    def test_zero_seed_overrides_preset(self, runner, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        r1 = runner.invoke(main, ["synth", "--preset", "synth-cardio-like",
                                  "--seed", "0", "--out", str(a)])
        r2 = runner.invoke(main, ["synth", "--preset", "synth-cardio-like",
                                  "--out", str(b)])
        assert r1.exit_code == 0 and r2.exit_code == 0
        assert a.read_bytes() != b.read_bytes()  # 0 must override, not no-op


class TestUnknownPreset:
    def test_unknown_preset_is_config_error(self, runner, tmp_path):
        cfg = write_config(tmp_path, "datasets: [{preset: synth-nope}]\n")
        result = runner.invoke(main, ["experiment", "--config", cfg])
        assert result.exit_code == 2
        assert "unknown preset" in result.output
