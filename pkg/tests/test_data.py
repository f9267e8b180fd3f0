import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scorestack.data import (
    Dataset,
    IngestionError,
    PRESETS,
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    save_csv,
    split_train_test,
)

from oracles import knn_scores_oracle


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadCsv:
    def test_with_label_column(self, tmp_path):
        p = write(tmp_path, "a,b,label\n1,2,0\n3,4,1\n5,6,0\n")
        ds = load_csv(p, label_column="label")
        assert ds.n == 3 and ds.d == 2
        assert ds.labels is not None
        assert ds.feature_names == ["a", "b"]
        assert list(ds.labels) == [0, 1, 0]

    def test_without_label_column(self, tmp_path):
        p = write(tmp_path, "a,b,label\n1,2,0\n3,4,1\n5,6,0\n")
        ds = load_csv(p)
        assert ds.n == 3 and ds.d == 3
        assert ds.labels is None

    def test_unparseable_cell_names_row_and_column(self, tmp_path):
        p = write(tmp_path, "a,b\n1,2\n3,abc\n")
        with pytest.raises(IngestionError, match=r"row 3.*'b'.*'abc'"):
            load_csv(p)

    def test_nan_rejected(self, tmp_path):
        p = write(tmp_path, "a,b\n1,2\nnan,4\n")
        with pytest.raises(IngestionError, match="non-finite"):
            load_csv(p)

    def test_missing_label_column(self, tmp_path):
        p = write(tmp_path, "a,b\n1,2\n3,4\n")
        with pytest.raises(IngestionError, match="'y' not in header"):
            load_csv(p, label_column="y")

    def test_bad_label_value(self, tmp_path):
        p = write(tmp_path, "a,label\n1,0\n2,2\n")
        with pytest.raises(IngestionError, match="label must be 0 or 1"):
            load_csv(p, label_column="label")

    def test_ragged_row(self, tmp_path):
        p = write(tmp_path, "a,b\n1,2\n3\n")
        with pytest.raises(IngestionError, match="row 3 has 1 cells"):
            load_csv(p)

    def test_row_order_preserved(self, tmp_path):
        p = write(tmp_path, "a\n5\n1\n3\n")
        ds = load_csv(p)
        assert list(ds.features[:, 0]) == [5.0, 1.0, 3.0]

    def test_save_round_trip(self, tmp_path, small_labeled):
        p = tmp_path / "round.csv"
        save_csv(small_labeled, p)
        back = load_csv(p, label_column="label")
        assert np.array_equal(back.features, small_labeled.features)
        assert np.array_equal(back.labels, small_labeled.labels)


class TestDatasetInvariants:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="NaN/Inf"):
            Dataset(features=np.array([[1.0], [np.inf]]))

    def test_rejects_label_length_mismatch(self):
        with pytest.raises(ValueError, match="labels length"):
            Dataset(features=np.eye(3), labels=np.array([0, 1]))

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError, match="only 0/1"):
            Dataset(features=np.eye(3), labels=np.array([0, 1, 2]))

    def test_rejects_tiny(self):
        with pytest.raises(ValueError, match="n >= 2"):
            Dataset(features=np.array([[1.0, 2.0]]))

    def test_frozen_arrays(self, small_labeled):
        with pytest.raises(ValueError):
            small_labeled.features[0, 0] = 9.0


class TestSplit:
    def test_proportional_stratification(self):
        rng = np.random.default_rng(0)
        y = np.zeros(100, dtype=np.int64)
        y[:10] = 1
        ds = Dataset(features=rng.standard_normal((100, 3)), labels=y)
        train, test = split_train_test(ds, 0.6, seed=4)
        assert train.n == 60 and train.n_outliers == 6
        assert test.n == 40 and test.n_outliers == 4

    def test_deterministic(self, small_labeled):
        a1, b1 = split_train_test(small_labeled, 0.6, seed=11)
        a2, b2 = split_train_test(small_labeled, 0.6, seed=11)
        assert np.array_equal(a1.features, a2.features)
        assert np.array_equal(b1.features, b2.features)

    def test_single_member_class_errors(self):
        y = np.zeros(5, dtype=np.int64)
        y[0] = 1
        ds = Dataset(features=np.arange(10.0).reshape(5, 2), labels=y)
        with pytest.raises(ValueError, match="single member"):
            split_train_test(ds, 0.6, seed=0)

    def test_requires_labels(self):
        ds = Dataset(features=np.eye(4))
        with pytest.raises(ValueError, match="requires labels"):
            split_train_test(ds, 0.6, seed=0)

    def test_bad_fraction(self, small_labeled):
        with pytest.raises(ValueError, match="train_fraction"):
            split_train_test(small_labeled, 1.0, seed=0)

    @given(
        n_pos=st.integers(2, 15),
        n_neg=st.integers(2, 40),
        frac=st.floats(0.2, 0.8),
        seed=st.integers(0, 10_000),
    )
    def test_exact_partition_and_stratification(self, n_pos, n_neg, frac, seed):
        n = n_pos + n_neg
        y = np.array([1] * n_pos + [0] * n_neg, dtype=np.int64)
        X = np.arange(n, dtype=float).reshape(-1, 1) * np.ones((1, 2))
        ds = Dataset(features=X, labels=y)
        train, test = split_train_test(ds, frac, seed)
        # exact partition: row multisets unite to the original
        got = np.sort(np.concatenate([train.features[:, 0], test.features[:, 0]]))
        assert np.array_equal(got, np.arange(n, dtype=float))
        assert train.n + test.n == n
        rate_tr = train.n_outliers / train.n
        rate_te = test.n_outliers / test.n
        assert abs(rate_tr - rate_te) <= 1.0 / min(train.n, test.n) + 1e-12
        assert train.n_outliers >= 1 and test.n_outliers >= 1


class TestSynthetic:
    def test_exact_outlier_count(self):
        ds = generate_synthetic(
            SyntheticSpec(n=1000, d=20, outlier_fraction=0.05, seed=1)
        )
        assert ds.n_outliers == 50

    @given(n=st.integers(10, 400), frac=st.floats(0.01, 0.49),
           seed=st.integers(0, 1000))
    def test_count_matches_floor(self, n, frac, seed):
        expected = math.floor(n * frac)
        if expected < 1:
            return
        ds = generate_synthetic(
            SyntheticSpec(n=n, d=3, outlier_fraction=frac, seed=seed)
        )
        assert ds.n_outliers == expected

    def test_bitwise_deterministic(self):
        spec = SyntheticSpec(n=50, d=4, outlier_fraction=0.1, seed=9)
        a = generate_synthetic(spec)
        b = generate_synthetic(spec)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_invariant_violations(self):
        with pytest.raises(ValueError):
            SyntheticSpec(n=100, d=2, outlier_fraction=0.6)
        with pytest.raises(ValueError):
            SyntheticSpec(n=100, d=2, outlier_fraction=0.1, informative_dims=3)
        with pytest.raises(ValueError):
            SyntheticSpec(n=100, d=2, outlier_fraction=0.001)

    def test_separation_six_perfectly_detectable(self):
        # kNN(k=5) on inliers ranks every outlier above every inlier;
        # scored with the exhaustive-distance oracle.
        ds = generate_synthetic(
            SyntheticSpec(n=200, d=2, outlier_fraction=0.1, separation=6.0,
                          informative_dims=2, seed=3)
        )
        inliers = ds.features[ds.labels == 0]
        outliers = ds.features[ds.labels == 1]
        s_in = knn_scores_oracle(inliers, inliers, k=5, kind="KNN",
                                 self_indices=True)
        s_out = knn_scores_oracle(inliers, outliers, k=5, kind="KNN")
        assert s_out.min() > s_in.max()

    def test_presets_match_published_shapes(self):
        expected = {
            "synth-arrhythmia-like": (452, 274, 66),
            "synth-letter-like": (1600, 32, 100),
            "synth-cardio-like": (1831, 21, 176),
            "synth-speech-like": (3686, 600, 61),
            "synth-satellite-like": (6435, 36, 2036),
            "synth-mnist-like": (7603, 100, 700),
            "synth-mammography-like": (7600, 6, 176),
        }
        for name, (n, d, n_out) in expected.items():
            spec = PRESETS[name]
            assert (spec.n, spec.d) == (n, d), name
            assert math.floor(spec.n * spec.outlier_fraction) == n_out, name
