import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from rocinfer.data import (Dataset, Observation, flag_split, load_csv, prevalence, save_csv,
                           split, split_indices)
from rocinfer.errors import DegenerateSplitError, ParseError, SchemaError, UndefinedRateError
from rocinfer.scenarios import ScenarioSpec, generate


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadCsv:
    def test_four_rows_two_features(self, tmp_path):
        p = write(tmp_path, "y,x1,x2\n1,0.5,2\n0,1.5,-1\n1,2,0\n0,3,3.25\n")
        data = load_csv(p)
        assert data.n == 4 and data.k == 2
        assert data.feature_names == ("x1", "x2")
        np.testing.assert_array_equal(data.y, [1, 0, 1, 0])
        np.testing.assert_array_equal(data.X[3], [3.0, 3.25])
        assert data.d is None and data.maker_id is None and data.split is None

    def test_label_outside_binary_names_row(self, tmp_path):
        p = write(tmp_path, "y,x1\n1,0.5\n2,1.0\n")
        with pytest.raises(ParseError) as err:
            load_csv(p)
        assert err.value.row == 3
        assert "row 3" in str(err.value)

    def test_decisions_and_maker_ids(self, tmp_path):
        p = write(tmp_path, "y,d,doctor,x1\n1,1,dr_a,0.1\n0,0,dr_b,0.2\n1,,dr_a,0.3\n")
        data = load_csv(p, schema={"maker_id": "doctor"})
        np.testing.assert_array_equal(data.d[:2], [1, 0])
        assert np.isnan(data.d[2])
        assert list(data.maker_id) == ["dr_a", "dr_b", "dr_a"]
        assert data.feature_names == ("x1",)
        assert data.observation(2).d is None

    def test_missing_outcome_column(self, tmp_path):
        with pytest.raises(SchemaError):
            load_csv(write(tmp_path, "x1,x2\n1,2\n"))

    def test_non_numeric_feature(self, tmp_path):
        with pytest.raises(ParseError) as err:
            load_csv(write(tmp_path, "y,x1\n1,0.5\n0,abc\n"))
        assert err.value.row == 3

    def test_missing_feature_cell_rejected(self, tmp_path):
        with pytest.raises(ParseError):
            load_csv(write(tmp_path, "y,x1,x2\n1,0.5,\n"))

    def test_explicit_feature_list(self, tmp_path):
        data = load_csv(write(tmp_path, "a,y,b\n1,1,2\n3,0,4\n"), schema={"features": ["b"]})
        assert data.feature_names == ("b",)
        np.testing.assert_array_equal(data.X[:, 0], [2, 4])


class TestRoundTrip:
    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 1),
                              st.floats(allow_nan=False, allow_infinity=False, width=64),
                              st.sampled_from([0.0, 1.0, np.nan])),
                    min_size=1, max_size=30))
    def test_bit_exact(self, tmp_path_factory, rows):
        path = tmp_path_factory.mktemp("rt") / "d.csv"
        y = [r[0] for r in rows]
        X = [[r[1]] for r in rows]
        d = [r[2] for r in rows]
        makers = np.array([f"m{i % 3}" for i in range(len(rows))], dtype=object)
        data = Dataset(np.array(y), np.array(X), ("x1",), np.array(d), makers, None)
        save_csv(data, path)
        back = load_csv(path)
        np.testing.assert_array_equal(back.y, data.y)
        assert back.X.tobytes() == data.X.tobytes()
        np.testing.assert_array_equal(np.isnan(back.d), np.isnan(data.d))
        np.testing.assert_array_equal(back.d[~np.isnan(back.d)], data.d[~np.isnan(data.d)])
        assert list(back.maker_id) == list(makers)


class TestSplit:
    def test_even_halves(self):
        data = generate(ScenarioSpec("logit_baseline", 20000, 3)).data
        a, b = split(data, 0.5, seed=7)
        assert a.n == 10000 and b.n == 10000

    def test_deterministic(self):
        y = np.array([1, 0] * 5)
        assert all(np.array_equal(u, v) for u, v in
                   zip(split_indices(y, 0.5, 4), split_indices(y, 0.5, 4)))

    def test_degenerate(self):
        with pytest.raises(DegenerateSplitError):
            split_indices(np.array([1, 0, 0]), 0.5, 0)

    def test_rounding(self):
        a, b = split_indices(np.array([1, 0] * 5 + [1]), 0.3, 0)
        assert len(a) == 3 and len(b) == 8

    @settings(max_examples=50, deadline=None)
    @given(st.integers(4, 60), st.floats(0.2, 0.8), st.integers(0, 10**6))
    def test_partition(self, n, ratio, seed):
        y = np.r_[1, 1, 0, 0, np.random.default_rng(seed).integers(0, 2, n - 4)]
        try:
            a, b = split_indices(y, ratio, seed)
        except DegenerateSplitError:
            # only legitimate when a part is too small to hold both classes
            n_a = int(np.floor(ratio * n + 0.5))
            assert min(n_a, n - n_a) < 2
            return
        assert sorted(np.r_[a, b].tolist()) == list(range(n))
        for part in (a, b):
            assert 0 < y[part].sum() < len(part)

    def test_flag_split(self):
        data = flag_split(generate(ScenarioSpec("logit_baseline", 100, 1)).data, 0.5, 2)
        assert data.split.sum() == 50


class TestPrevalence:
    def test_half(self):
        assert prevalence(Dataset(np.array([1, 0, 0, 1]), np.zeros((4, 1)), ("x",))) == 0.5

    def test_all_ones(self):
        assert prevalence(Dataset(np.ones(3, int), np.zeros((3, 1)), ("x",))) == 1.0

    def test_baseline_matches_mean_propensity(self):
        rng = np.random.default_rng(0)
        m = 10**6
        oracle = expit(rng.normal(2, 1, m) - 0.5 * rng.normal(0, 1, m)).mean()
        data = generate(ScenarioSpec("logit_baseline", 20000, 1)).data
        assert abs(prevalence(data) - oracle) < 0.02


class TestDataset:
    def test_rejects_nonbinary(self):
        with pytest.raises(ValueError):
            Dataset(np.array([0, 2]), np.zeros((2, 1)), ("x",))

    def test_immutable(self):
        data = Dataset(np.array([0, 1]), np.zeros((2, 1)), ("x",))
        with pytest.raises(ValueError):
            data.X[0, 0] = 1.0

    def test_require_both_classes(self):
        with pytest.raises(UndefinedRateError):
            Dataset(np.array([1, 1]), np.zeros((2, 1)), ("x",)).require_both_classes()

    def test_from_observations(self):
        rows = [Observation(1, (0.1, 0.2), d=1), Observation(0, (0.3, 0.4))]
        data = Dataset.from_observations(rows)
        assert data.k == 2 and np.isnan(data.d[1])
        assert list(data) == [Observation(1, (0.1, 0.2), d=1), Observation(0, (0.3, 0.4))]

    def test_mixed_dimension_rejected(self):
        with pytest.raises(ValueError):
            Dataset.from_observations([Observation(1, (0.1,)), Observation(0, (0.3, 0.4))])
