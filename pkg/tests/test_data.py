import json

import numpy as np
import pytest

from hvml import data, synth
from hvml.data import (Dataset, compute_stats, load_arff, load_csv, load_manifest,
                       normalize, stratified_split, write_csv)
from hvml.errors import ConfigError, ParseError

TOY_ARFF = """% toy multi-label file
@relation toy

@attribute feat1 numeric
@attribute feat2 real
@attribute flag {0,1}
@attribute labelA {0,1}
@attribute labelB {0,1}

@data
1.0,2.0,0,1,0
2.0,4.0,1,0,1
3.0,6.0,0,1,1
"""


def write_toy_arff(tmp_path, text=TOY_ARFF, name="toy.arff"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestArff:
    def test_basic_parse(self, tmp_path):
        ds = load_arff(write_toy_arff(tmp_path), label_count=2)
        assert (ds.n, ds.d, ds.k) == (3, 3, 2)
        assert ds.feature_kinds == ("numeric", "numeric", "binary")
        assert ds.y.tolist() == [[1, 0], [0, 1], [1, 1]]
        assert ds.x[:, 0].tolist() == [1.0, 2.0, 3.0]

    def test_labels_at_front(self, tmp_path):
        text = TOY_ARFF.replace(
            "@attribute feat1 numeric\n@attribute feat2 real\n@attribute flag {0,1}\n"
            "@attribute labelA {0,1}\n@attribute labelB {0,1}",
            "@attribute labelA {0,1}\n@attribute labelB {0,1}\n"
            "@attribute feat1 numeric\n@attribute feat2 real\n@attribute flag {0,1}",
        ).replace("1.0,2.0,0,1,0", "1,0,1.0,2.0,0").replace(
            "2.0,4.0,1,0,1", "0,1,2.0,4.0,1").replace("3.0,6.0,0,1,1", "1,1,3.0,6.0,0")
        ds = load_arff(write_toy_arff(tmp_path, text), label_count=2, labels_at="front")
        assert ds.y.tolist() == [[1, 0], [0, 1], [1, 1]]
        assert ds.x[:, 0].tolist() == [1.0, 2.0, 3.0]

    def test_single_label_toy(self, tmp_path):
        text = """@relation t
@attribute a numeric
@attribute b numeric
@attribute y {0,1}
@data
1,2,1
3,4,0
"""
        ds = load_arff(write_toy_arff(tmp_path, text), label_count=1)
        assert (ds.d, ds.k) == (2, 1)

    def test_sparse_rows(self, tmp_path):
        text = """@relation t
@attribute a numeric
@attribute b numeric
@attribute y1 {0,1}
@attribute y2 {0,1}
@data
{0 2.5, 2 1}
{1 1.5, 3 1}
{}
"""
        ds = load_arff(write_toy_arff(tmp_path, text), label_count=2)
        assert ds.x.tolist() == [[2.5, 0.0], [0.0, 1.5], [0.0, 0.0]]
        assert ds.y.tolist() == [[1, 0], [0, 1], [0, 0]]

    def test_missing_values_imputed_with_count(self, tmp_path):
        text = """@relation t
@attribute a numeric
@attribute y {0,1}
@data
1.0,1
?,0
3.0,1
"""
        ds = load_arff(write_toy_arff(tmp_path, text), label_count=1)
        assert ds.imputed == 1
        assert ds.x[1, 0] == pytest.approx(2.0)  # mean of observed

    def test_missing_binary_feature_imputed_with_mode(self, tmp_path):
        text = """@relation t
@attribute flag {0,1}
@attribute y {0,1}
@data
1,1
1,0
?,1
0,1
"""
        ds = load_arff(write_toy_arff(tmp_path, text), label_count=1)
        assert ds.imputed == 1
        assert ds.x[2, 0] == 1.0  # mode of observed {1, 1, 0}

    def test_real_benchmark_arff_if_available(self):
        import os
        path = os.environ.get("HVML_EMOTIONS_ARFF")
        if not path or not os.path.exists(path):
            pytest.skip("set HVML_EMOTIONS_ARFF to the emotions ARFF to run")
        ds = load_arff(path, label_count=6, labels_at="back")
        assert (ds.n, ds.d, ds.k) == (593, 72, 6)
        stats = compute_stats(ds)
        assert stats.cardinality == pytest.approx(1.869, abs=2e-3)
        assert stats.dispersion == pytest.approx(231.14, abs=0.5)
        assert stats.interaction == pytest.approx(134.57, abs=0.5)

    def test_non_binary_label_value_names_attribute(self, tmp_path):
        text = """@relation t
@attribute a numeric
@attribute weird {0,1,2}
@data
1.0,2
"""
        with pytest.raises(ParseError, match="weird"):
            load_arff(write_toy_arff(tmp_path, text), label_count=1)

    def test_numeric_label_with_bad_data_names_attribute(self, tmp_path):
        text = """@relation t
@attribute a numeric
@attribute y numeric
@data
1.0,2
"""
        with pytest.raises(ParseError, match="'y'"):
            load_arff(write_toy_arff(tmp_path, text), label_count=1)

    def test_label_count_bounds(self, tmp_path):
        with pytest.raises(ParseError, match="label_count"):
            load_arff(write_toy_arff(tmp_path), label_count=5)

    def test_ragged_row(self, tmp_path):
        with pytest.raises(ParseError, match="expected 5"):
            load_arff(write_toy_arff(tmp_path, TOY_ARFF + "1.0,2.0,0,1\n"), label_count=2)

    def test_missing_data_section(self, tmp_path):
        with pytest.raises(ParseError, match="@data"):
            load_arff(write_toy_arff(tmp_path, "@relation t\n@attribute a numeric\n"), 1)

    def test_non_binary_nominal_feature_rejected(self, tmp_path):
        text = """@relation t
@attribute color {red,green,blue}
@attribute y {0,1}
@data
red,1
"""
        with pytest.raises(ParseError, match="color"):
            load_arff(write_toy_arff(tmp_path, text), label_count=1)


class TestCsv:
    def test_basic_pair(self, tmp_path):
        (tmp_path / "x.csv").write_text("0.5,1.0\n0.25,2.0\n")
        (tmp_path / "y.csv").write_text("1\n0\n")
        ds = load_csv(tmp_path / "x.csv", tmp_path / "y.csv")
        assert (ds.n, ds.d, ds.k) == (2, 2, 1)

    def test_header_row_skipped(self, tmp_path):
        (tmp_path / "x.csv").write_text("f1,f2\n0.5,1.0\n")
        (tmp_path / "y.csv").write_text("y\n1\n")
        ds = load_csv(tmp_path / "x.csv", tmp_path / "y.csv")
        assert ds.n == 1

    def test_row_count_mismatch_names_both(self, tmp_path):
        (tmp_path / "x.csv").write_text("1,2\n3,4\n")
        (tmp_path / "y.csv").write_text("1\n")
        with pytest.raises(ParseError, match="2 feature rows vs 1"):
            load_csv(tmp_path / "x.csv", tmp_path / "y.csv")

    def test_header_only_is_empty(self, tmp_path):
        (tmp_path / "x.csv").write_text("f1,f2\n")
        (tmp_path / "y.csv").write_text("y\n")
        with pytest.raises(ParseError, match="header only"):
            load_csv(tmp_path / "x.csv", tmp_path / "y.csv")

    def test_ragged_rows(self, tmp_path):
        (tmp_path / "x.csv").write_text("1,2\n3\n")
        (tmp_path / "y.csv").write_text("1\n0\n")
        with pytest.raises(ParseError, match="ragged"):
            load_csv(tmp_path / "x.csv", tmp_path / "y.csv")

    def test_non_binary_labels(self, tmp_path):
        (tmp_path / "x.csv").write_text("1,2\n")
        (tmp_path / "y.csv").write_text("2\n")
        with pytest.raises(ParseError, match="0/1"):
            load_csv(tmp_path / "x.csv", tmp_path / "y.csv")

    def test_round_trip(self, tmp_path):
        ds = synth.linear_multilabel(n=40, d=6, k=3, seed=5)
        write_csv(ds, tmp_path / "x.csv", tmp_path / "y.csv")
        back = load_csv(tmp_path / "x.csv", tmp_path / "y.csv")
        assert np.array_equal(back.x, ds.x)
        assert np.array_equal(back.y, ds.y)


class TestManifest:
    def test_arff_manifest(self, tmp_path):
        write_toy_arff(tmp_path)
        manifest = tmp_path / "m.json"
        manifest.write_text(json.dumps(
            {"name": "toy", "arff_path": "toy.arff", "label_count": 2, "labels_at": "back"}))
        ds = load_manifest(manifest)
        assert ds.name == "toy" and ds.k == 2

    def test_csv_manifest_with_env_var(self, tmp_path, monkeypatch):
        (tmp_path / "x.csv").write_text("1,0\n0,1\n")
        (tmp_path / "y.csv").write_text("1\n0\n")
        monkeypatch.setenv("TOY_DIR", str(tmp_path))
        manifest = tmp_path / "m.json"
        manifest.write_text(json.dumps(
            {"name": "toy", "csv_paths": ["$TOY_DIR/x.csv", "$TOY_DIR/y.csv"]}))
        assert load_manifest(manifest).n == 2

    def test_manifest_requires_source(self, tmp_path):
        manifest = tmp_path / "m.json"
        manifest.write_text(json.dumps({"name": "bad"}))
        with pytest.raises(ParseError, match="arff_path or csv_paths"):
            load_manifest(manifest)

    def test_manifest_bad_json(self, tmp_path):
        manifest = tmp_path / "m.json"
        manifest.write_text("{nope")
        with pytest.raises(ParseError, match="JSON"):
            load_manifest(manifest)


class TestNormalize:
    def _with_identity_split(self, ds):
        n = ds.n
        idx = np.arange(n)
        return ds.with_split(data.SplitIndices(idx[: n - 2], idx[n - 2: n - 1], idx[n - 1:]))

    def test_min_max_by_hand(self):
        ds = Dataset(x=np.array([[0.0], [5.0], [10.0]]), y=np.ones((3, 1), dtype=np.int8),
                     feature_kinds=("numeric",))
        out = normalize(ds)
        assert out.x[:, 0].tolist() == [0.0, 0.5, 1.0]

    def test_constant_column_maps_to_zero(self):
        ds = Dataset(x=np.full((4, 1), 3.3), y=np.ones((4, 1), dtype=np.int8),
                     feature_kinds=("numeric",))
        assert (normalize(ds).x == 0).all()

    def test_out_of_range_rows_clipped(self):
        x = np.array([[0.0], [10.0], [20.0], [-5.0], [30.0]])
        ds = Dataset(x=x, y=np.ones((5, 1), dtype=np.int8), feature_kinds=("numeric",))
        ds = ds.with_split(data.SplitIndices(np.array([0, 1, 2]), np.array([3]), np.array([4])))
        out = normalize(ds)
        assert out.x[:3, 0].tolist() == [0.0, 0.5, 1.0]
        assert out.x[3, 0] == 0.0  # below train min
        assert out.x[4, 0] == 1.0  # above train max

    def test_binary_columns_untouched(self):
        x = np.array([[0.0, 1.0], [4.0, 0.0]])
        ds = Dataset(x=x, y=np.ones((2, 1), dtype=np.int8),
                     feature_kinds=("numeric", "binary"))
        out = normalize(ds)
        assert out.x[:, 1].tolist() == [1.0, 0.0]

    def test_idempotent(self):
        ds = synth.linear_multilabel(n=50, d=5, k=2, seed=3)
        ds = ds.with_split(stratified_split(ds, seed=1))
        once = normalize(ds)
        twice = normalize(once)
        assert np.allclose(once.x, twice.x, atol=1e-15)


class TestStratifiedSplit:
    def test_disjoint_and_exhaustive_over_seeds(self):
        ds = synth.linear_multilabel(n=97, d=4, k=3, seed=0)
        for seed in range(10):
            split = stratified_split(ds, seed)
            combined = np.sort(np.concatenate([split.train, split.validation, split.test]))
            assert np.array_equal(combined, np.arange(97))

    def test_proportions(self):
        ds = synth.linear_multilabel(n=200, d=4, k=3, seed=0)
        split = stratified_split(ds, 5)
        assert len(split.test) == pytest.approx(60, abs=2)
        assert len(split.validation) == pytest.approx(28, abs=2)

    def test_same_seed_identical(self):
        ds = synth.linear_multilabel(n=60, d=4, k=3, seed=0)
        a = stratified_split(ds, 9)
        b = stratified_split(ds, 9)
        assert np.array_equal(a.train, b.train)
        assert np.array_equal(a.validation, b.validation)
        assert np.array_equal(a.test, b.test)

    def test_rare_label_lands_three_in_test(self):
        rng = np.random.default_rng(0)
        y = (rng.random((100, 3)) < 0.4).astype(np.int8)
        y[:, 2] = 0
        rare_rows = rng.choice(100, size=10, replace=False)
        y[rare_rows, 2] = 1
        ds = Dataset(x=rng.random((100, 2)), y=y, feature_kinds=("numeric",) * 2)
        for seed in range(5):
            split = stratified_split(ds, seed)
            in_test = sum(1 for r in rare_rows if r in set(split.test.tolist()))
            assert abs(in_test - 3) <= 1

    def test_single_label_ratio_preserved(self):
        rng = np.random.default_rng(1)
        y = (rng.random((200, 1)) < 0.5).astype(np.int8)
        ds = Dataset(x=rng.random((200, 2)), y=y, feature_kinds=("numeric",) * 2)
        global_rate = y.mean()
        for seed in range(50):
            split = stratified_split(ds, seed)
            test_rate = y[split.test].mean()
            assert abs(test_rate - global_rate) <= 0.02

    def test_too_small(self):
        ds = Dataset(x=np.random.default_rng(0).random((5, 2)),
                     y=np.ones((5, 1), dtype=np.int8), feature_kinds=("numeric",) * 2)
        with pytest.raises(ConfigError):
            stratified_split(ds, 0)


class TestStats:
    def test_hand_fixture(self):
        y = np.array([[1, 0, 0], [1, 1, 0], [0, 0, 0], [1, 1, 1]], dtype=np.int8)
        ds = Dataset(x=np.zeros((4, 5)), y=y, feature_kinds=("numeric",) * 5)
        stats = compute_stats(ds)
        assert (stats.n, stats.d, stats.k, stats.dk) == (4, 5, 3, 15)
        assert stats.cardinality == pytest.approx(6 / 4)
        assert stats.dispersion == pytest.approx(15 / 1.5)
        assert stats.interaction == pytest.approx(5 * 1.5)

    def test_every_sample_one_label(self):
        y = np.eye(4, 3, dtype=np.int8)[:, :3]
        y[3, 0] = 1
        ds = Dataset(x=np.zeros((4, 6)), y=y, feature_kinds=("numeric",) * 6)
        stats = compute_stats(ds)
        assert stats.cardinality == 1.0
        assert stats.dispersion == stats.dk

    def test_dispersion_cardinality_identity(self):
        for seed in range(10):
            ds = synth.linear_multilabel(n=80, d=7, k=4, seed=seed)
            stats = compute_stats(ds)
            assert stats.dispersion * stats.cardinality == pytest.approx(stats.dk, abs=0.01)

    # published size statistics: from each table row's (d, k, cardinality),
    # the derived columns DK, DK/cardinality, and D*cardinality must follow.
    # (the CAL500 row of the published table prints DK = 251,000 and
    # dispersion 9,637.54, inconsistent with its own D=68, K=174; the values
    # here are the ones the definitions produce)
    @pytest.mark.parametrize("name,d,k,card,dk,disp,inter", [
        ("flags", 19, 7, 3.392, 133, 39.21, 64.45),
        ("CAL500", 68, 174, 26.044, 11832, 454.31, 1770.99),
        ("emotions", 72, 6, 1.869, 432, 231.14, 134.57),
        ("genbase", 1186, 27, 1.252, 32022, 25576.68, 1484.87),
        ("enron", 1001, 53, 3.378, 53053, 15705.45, 3381.38),
        ("yeast", 103, 14, 4.237, 1442, 340.335, 436.411),
        ("tmc2007-500", 500, 22, 2.158, 11000, 5097.31, 1079.0),
        ("mediamill", 120, 101, 4.376, 12120, 2769.65, 525.12),
        ("IMDB-F", 1001, 28, 2.000, 28028, 14014.0, 2002.0),
    ])
    def test_published_derived_columns(self, name, d, k, card, dk, disp, inter):
        assert d * k == dk
        assert dk / card == pytest.approx(disp, rel=2e-3)
        assert d * card == pytest.approx(inter, rel=2e-3)


class TestDatasetInvariants:
    def test_labels_must_be_binary(self):
        with pytest.raises(ParseError):
            Dataset(x=np.zeros((2, 2)), y=np.array([[2, 0], [0, 1]]),
                    feature_kinds=("numeric",) * 2)

    def test_arrays_are_frozen(self):
        ds = synth.copy_task(seed=0)
        with pytest.raises(ValueError):
            ds.x[0, 0] = 5.0

    def test_rows_requires_split(self):
        ds = synth.copy_task(seed=0)
        with pytest.raises(ConfigError):
            ds.rows("train")
