import numpy as np
import pytest
from hypothesis import given, strategies as st

from scorestack.selection import (
    CombinedFeatureSpace,
    SelectionResult,
    accurate_select,
    balance_select,
    combine_features,
    pearson,
    random_select,
    select_all,
    select_none,
)

from conftest import make_tos


class TestPearson:
    def test_self_correlation(self):
        v = np.array([1.0, 2.0, 5.0])
        assert pearson(v, v) == 1.0

    def test_exact_anticorrelation(self):
        assert pearson(np.array([1.0, 2.0, 3.0]), np.array([3.0, 2.0, 1.0])) == -1.0

    def test_zero_variance_policy(self):
        assert pearson(np.array([5.0, 5.0, 5.0]), np.array([1.0, 2.0, 3.0])) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            pearson(np.ones(3), np.ones(4))

    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=20),
           st.integers(0, 5))
    def test_bounded(self, values, seed):
        a = np.array(values)
        rng = np.random.default_rng(seed)
        b = rng.standard_normal(len(a))
        assert -1.0 <= pearson(a, b) <= 1.0


def psi_fixture():
    """T1 accurate, T2 an exact duplicate of T1, T3 decorrelated.

    Column construction: T1 = (-1,-1,1,1), Z = (-1,1,-1,1) orthogonal to T1
    with equal variance, T3 = 0.1*T1 + sqrt(0.99)*Z so |rho(T1,T3)| = 0.1.
    ROC values are supplied directly through the train_roc cache.
    """
    t1 = np.array([-1.0, -1.0, 1.0, 1.0])
    z = np.array([-1.0, 1.0, -1.0, 1.0])
    t3 = 0.1 * t1 + np.sqrt(0.99) * z
    train = np.column_stack([t1, t1, t3])
    return make_tos(train, np.zeros((2, 3)), [0.95, 0.95, 0.80])


class TestRandomSelect:
    def test_p_equals_k_exhaustive(self):
        T = psi_fixture()
        assert sorted(random_select(T, 3, seed=1).indices) == [0, 1, 2]

    def test_p_zero(self):
        assert random_select(psi_fixture(), 0, seed=1).indices == ()

    def test_deterministic(self):
        T = psi_fixture()
        assert (random_select(T, 2, seed=9).indices
                == random_select(T, 2, seed=9).indices)

    def test_p_too_large(self):
        with pytest.raises(ValueError, match="p must lie"):
            random_select(psi_fixture(), 4, seed=0)


class TestAccurateSelect:
    def test_top_two(self):
        T = make_tos(np.zeros((4, 3)), np.zeros((2, 3)), [0.6, 0.9, 0.7])
        assert accurate_select(T, 2).indices == (1, 2)

    def test_tie_break_low_index(self):
        roc = [0.5, 0.5, 0.5, 0.5, 0.9, 0.5, 0.5, 0.9]
        T = make_tos(np.zeros((4, 8)), np.zeros((2, 8)), roc)
        assert accurate_select(T, 1).indices == (4,)

    def test_p1_equals_balance_p1(self):
        T = psi_fixture()
        assert accurate_select(T, 1).indices == balance_select(T, 1).indices

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(0)
        roc = rng.uniform(0.4, 1.0, size=6)
        train = rng.standard_normal((10, 6))
        T = make_tos(train, np.zeros((2, 6)), roc)
        base = accurate_select(T, 4).indices
        perm = rng.permutation(6)
        T2 = make_tos(train[:, perm], np.zeros((2, 6)), roc[perm])
        permuted = accurate_select(T2, 4).indices
        assert [int(perm[i]) for i in permuted] == list(base)


class TestBalanceSelect:
    def test_duplicate_discounted(self):
        T = psi_fixture()
        result = balance_select(T, 2)
        assert result.indices == (0, 2)
        step2 = result.trace[1]
        assert abs(step2.candidate_psi[1] - 0.95) < 1e-9
        assert abs(step2.candidate_psi[2] - 8.0) < 1e-9
        assert abs(step2.psi - 8.0) < 1e-9

    def test_first_step_has_no_psi(self):
        result = balance_select(psi_fixture(), 2)
        assert result.trace[0].psi is None
        assert result.trace[0].index == 0
        assert result.trace[0].acc == 0.95

    def test_p_equals_k_selects_everything(self):
        assert sorted(balance_select(psi_fixture(), 3).indices) == [0, 1, 2]

    def test_uncorrelated_equal_accuracy_orders_by_index(self):
        # orthogonal columns, equal ROC: discounting never separates them,
        # so the greedy order falls back to accuracy-then-index
        cols = np.eye(4)
        T = make_tos(cols, np.zeros((2, 4)), [0.8, 0.8, 0.8, 0.8])
        assert balance_select(T, 4).indices == (0, 1, 2, 3)

    def test_never_picks_exact_duplicate_while_alternatives_remain(self):
        rng = np.random.default_rng(4)
        base = rng.standard_normal(30)
        others = [rng.standard_normal(30) for _ in range(3)]
        train = np.column_stack([base, base.copy()] + others)
        roc = [0.99, 0.99, 0.7, 0.65, 0.6]
        T = make_tos(train, np.zeros((2, 5)), roc)
        result = balance_select(T, 4)
        assert 1 not in result.indices  # the duplicate column stays out

    def test_p_too_large(self):
        with pytest.raises(ValueError, match="p must lie"):
            balance_select(psi_fixture(), 5)


class TestCombineFeatures:
    def test_widths_and_bitwise_original_block(self):
        rng = np.random.default_rng(1)
        train_X = rng.standard_normal((6, 4))
        test_X = rng.standard_normal((3, 4))
        T = make_tos(rng.standard_normal((6, 5)), rng.standard_normal((3, 5)),
                     [0.5] * 5)
        S = SelectionResult(indices=(4, 0, 2), method="BALANCE")
        comb = combine_features(train_X, test_X, T, S)
        assert comb.train.shape == (6, 7)
        assert comb.test.shape == (3, 7)
        assert np.array_equal(comb.train[:, :4], train_X)
        assert np.array_equal(comb.test[:, :4], test_X)
        # TOS block keeps selection order
        assert np.array_equal(comb.train[:, 4], T.train_scores[:, 4])
        assert np.array_equal(comb.train[:, 5], T.train_scores[:, 0])

    def test_empty_selection_reproduces_original(self):
        rng = np.random.default_rng(2)
        train_X = rng.standard_normal((5, 3))
        test_X = rng.standard_normal((2, 3))
        T = make_tos(rng.standard_normal((5, 2)), rng.standard_normal((2, 2)),
                     [0.5, 0.5])
        comb = combine_features(train_X, test_X, T, select_none())
        assert np.array_equal(comb.train, train_X)
        assert np.array_equal(comb.test, test_X)

    def test_all_selection_full_width(self):
        rng = np.random.default_rng(3)
        T = make_tos(rng.standard_normal((5, 4)), rng.standard_normal((2, 4)),
                     [0.5] * 4)
        comb = combine_features(rng.standard_normal((5, 3)),
                                rng.standard_normal((2, 3)), T, select_all(T))
        assert comb.train.shape[1] == 3 + 4

    def test_row_mismatch(self):
        T = make_tos(np.zeros((5, 1)), np.zeros((2, 1)), [0.5])
        with pytest.raises(ValueError, match="row count"):
            combine_features(np.zeros((4, 2)), np.zeros((2, 2)), T, select_all(T))


class TestSelectionResult:
    def test_distinct_indices_enforced(self):
        with pytest.raises(ValueError, match="distinct"):
            SelectionResult(indices=(1, 1), method="RANDOM")

    def test_unknown_method(self):
        with pytest.raises(ValueError, match="unknown selection method"):
            SelectionResult(indices=(), method="BEST")

    @pytest.mark.parametrize("selector,kwargs", [
        (random_select, {"seed": 0}),
        (accurate_select, {}),
        (balance_select, {}),
    ])
    def test_exact_size_and_distinct(self, selector, kwargs):
        rng = np.random.default_rng(5)
        T = make_tos(rng.standard_normal((12, 6)), np.zeros((2, 6)),
                     rng.uniform(0.3, 1.0, 6))
        for p in range(7):
            result = selector(T, p, **kwargs)
            assert len(result.indices) == p
            assert len(set(result.indices)) == p


class TestReportRow:
    def test_row_contains_trace_and_names(self):
        from scorestack.selection import selection_report_row

        T = psi_fixture()
        S = balance_select(T, 2)
        row = selection_report_row(S, T.specs)
        assert row["method"] == "BALANCE"
        assert row["p"] == 2
        assert row["specs"] == ["KNN(k=1)", "KNN(k=3)"]
        assert row["trace"][0]["psi"] is None
        assert abs(row["trace"][1]["psi"] - 8.0) < 1e-9
        import json

        json.dumps(row)  # JSON-ready
