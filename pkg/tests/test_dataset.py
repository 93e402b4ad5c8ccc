import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnnr.dataset import (
    Dataset,
    StandardScaler,
    fit_standard_scaler,
    friedman1,
    friedman1_targets,
    load_csv,
    make_folds,
    write_csv,
)
from dnnr.errors import ConfigError, DataError


def test_dataset_basic_properties():
    data = Dataset(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([5.0, -1.0]))
    assert data.n == 2
    assert data.d == 2
    assert data.target_bounds == (-1.0, 5.0)


def test_dataset_rejects_mismatched_lengths():
    with pytest.raises(DataError):
        Dataset(np.zeros((3, 2)), np.zeros(4))


def test_dataset_rejects_non_finite():
    with pytest.raises(DataError):
        Dataset(np.array([[np.nan]]), np.array([1.0]))
    with pytest.raises(DataError):
        Dataset(np.array([[1.0]]), np.array([np.inf]))


def test_dataset_rejects_empty():
    with pytest.raises(DataError):
        Dataset(np.zeros((0, 2)), np.zeros(0))


def test_dataset_rejects_bad_shapes():
    with pytest.raises(DataError):
        Dataset(np.zeros(3), np.zeros(3))
    with pytest.raises(DataError):
        Dataset(np.zeros((3, 1)), np.zeros((3, 1)))


def test_subset_recomputes_bounds():
    data = Dataset(np.arange(8.0).reshape(4, 2), np.array([0.0, 1.0, 2.0, 3.0]))
    sub = data.subset(np.array([1, 2]))
    assert sub.n == 2
    assert sub.target_bounds == (1.0, 2.0)


def test_select_columns_keeps_names_and_bounds():
    data = Dataset(
        np.arange(6.0).reshape(2, 3),
        np.array([0.0, 9.0]),
        column_names=["a", "b", "c"],
    )
    picked = data.select_columns([2, 0])
    assert picked.column_names == ["c", "a"]
    assert picked.target_bounds == data.target_bounds
    np.testing.assert_array_equal(picked.features, data.features[:, [2, 0]])


def test_scaler_round_trip(rng):
    data = Dataset(rng.normal(3.0, 2.0, size=(50, 4)), rng.normal(size=50))
    scaler = fit_standard_scaler(data)
    z = scaler.transform(data.features)
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(scaler.inverse_transform(z), data.features, atol=1e-12)


def test_scaler_constant_column_is_pure_shift():
    data = Dataset(np.array([[2.0, 1.0], [2.0, 3.0], [2.0, 5.0]]), np.zeros(3))
    scaler = fit_standard_scaler(data)
    assert scaler.stds[0] == 1.0
    np.testing.assert_allclose(scaler.transform(data.features)[:, 0], 0.0)


def test_scaler_needs_two_rows():
    with pytest.raises(DataError):
        fit_standard_scaler(Dataset(np.ones((1, 2)), np.ones(1)))


def test_make_folds_partitions_rows():
    plan = make_folds(103, 5, seed=7)
    seen = np.zeros(103, dtype=int)
    sizes = []
    for f in range(5):
        train, test = plan.train_test(f)
        seen[test] += 1
        sizes.append(len(test))
        assert len(np.intersect1d(train, test)) == 0
        assert len(train) + len(test) == 103
    np.testing.assert_array_equal(seen, 1)
    assert max(sizes) - min(sizes) <= 1


def test_make_folds_deterministic():
    a = make_folds(60, 4, seed=11).fold_assignments
    b = make_folds(60, 4, seed=11).fold_assignments
    c = make_folds(60, 4, seed=12).fold_assignments
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_make_folds_validates_count():
    with pytest.raises(ConfigError):
        make_folds(10, 1, seed=0)
    with pytest.raises(ConfigError):
        make_folds(10, 11, seed=0)


def test_friedman1_matches_target_formula():
    data = friedman1(200, n_features=7, noise_scale=0.0, seed=5)
    assert data.features.shape == (200, 7)
    assert data.features.min() >= 0.0 and data.features.max() <= 1.0
    x = data.features
    expected = (
        10.0 * x[:, 3]
        + 5.0 * x[:, 4]
        + 20.0 * (x[:, 2] - 0.5) ** 2
        + 10.0 * np.sin(np.pi * x[:, 0] * x[:, 1])
    )
    np.testing.assert_allclose(data.targets, expected, rtol=0, atol=0)
    np.testing.assert_array_equal(friedman1_targets(x), data.targets)


def test_friedman1_sample_mean_near_analytic_value():
    # analytic mean of the target surface is about 14.41; a 5000-point
    # sample mean should land well inside [14.0, 14.8]
    data = friedman1(5000, n_features=10, noise_scale=0.0, seed=0)
    assert 14.0 < float(data.targets.mean()) < 14.8


def test_friedman1_noise_reproducible_and_centered():
    a = friedman1(500, noise_scale=1.0, seed=9)
    b = friedman1(500, noise_scale=1.0, seed=9)
    clean = friedman1(500, noise_scale=0.0, seed=9)
    np.testing.assert_array_equal(a.targets, b.targets)
    np.testing.assert_array_equal(a.features, clean.features)
    noise = a.targets - clean.targets
    assert 0.8 < noise.std() < 1.2
    assert abs(noise.mean()) < 0.2


def test_friedman1_validation():
    with pytest.raises(ConfigError):
        friedman1(100, n_features=4)
    with pytest.raises(ConfigError):
        friedman1(0)
    with pytest.raises(ConfigError):
        friedman1(10, noise_scale=-0.5)


def test_csv_round_trip_is_exact(tmp_path, rng):
    data = Dataset(
        rng.normal(size=(30, 3)),
        rng.normal(size=30),
        column_names=["alpha", "beta", "gamma"],
        target_name="label",
    )
    path = tmp_path / "round.csv"
    write_csv(data, path)
    back = load_csv(path, "label")
    np.testing.assert_array_equal(back.features, data.features)
    np.testing.assert_array_equal(back.targets, data.targets)
    assert back.column_names == data.column_names
    assert back.target_name == "label"


def test_load_csv_target_by_index(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b,c\n1,2,3\n4,5,6\n")
    data = load_csv(path, -1)
    np.testing.assert_array_equal(data.targets, [3.0, 6.0])
    np.testing.assert_array_equal(data.features, [[1.0, 2.0], [4.0, 5.0]])
    data0 = load_csv(path, 0)
    np.testing.assert_array_equal(data0.targets, [1.0, 4.0])


def test_load_csv_headerless(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("1,2,3\n4,5,6\n")
    data = load_csv(path, -1, has_header=False)
    assert data.n == 2
    assert data.column_names == ["c0", "c1"]


def test_load_csv_errors_name_row_and_column(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n1,2\n1,oops\n")
    with pytest.raises(DataError, match="row 3") as err:
        load_csv(path, "b")
    assert "'b'" in str(err.value)


def test_load_csv_rejects_non_finite(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n1,nan\n")
    with pytest.raises(DataError, match="non-finite"):
        load_csv(path, "b")


def test_load_csv_missing_target(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(DataError, match="not found"):
        load_csv(path, "z")
    with pytest.raises(DataError, match="out of range"):
        load_csv(path, 5)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataError, match="cannot read"):
        load_csv(tmp_path / "nope.csv", -1)


def test_load_csv_empty_and_header_only(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(DataError, match="empty"):
        load_csv(empty, -1)
    header_only = tmp_path / "h.csv"
    header_only.write_text("a,b\n")
    with pytest.raises(DataError, match="no data rows"):
        load_csv(header_only, -1)


def test_load_csv_only_target_column(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("y\n1\n2\n")
    with pytest.raises(DataError, match="at least one feature"):
        load_csv(path, "y")


def test_load_csv_ragged_row(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n1,2\n3\n")
    with pytest.raises(DataError, match="row 3 has 1 cells"):
        load_csv(path, -1)


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=40),
    d=st.integers(min_value=1, max_value=6),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_csv_round_trip_property(tmp_path_factory, n, d, seed):
    rng = np.random.default_rng(seed)
    data = Dataset(rng.normal(scale=100.0, size=(n, d)), rng.normal(scale=1e-3, size=n))
    path = tmp_path_factory.mktemp("csv") / "p.csv"
    write_csv(data, path)
    back = load_csv(path, -1)
    np.testing.assert_array_equal(back.features, data.features)
    np.testing.assert_array_equal(back.targets, data.targets)
