import itertools
import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reupload import data
from reupload.data import Dataset
from reupload.errors import FormatError, InvalidArgumentError, LabelError, PrecisionError, RankDeficiencyError

from oracles import inverse_powers_grid, powers_of_two_grid, worst_case_patterns

GOLDEN = json.loads((Path(__file__).parent / "golden" / "worst_case.json").read_text())


class TestGenerators:
    @pytest.mark.parametrize("gen", [data.gen_circles, data.gen_moons])
    def test_deterministic(self, gen):
        a, b = gen(n=120, seed=3), gen(n=120, seed=3)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels) and np.array_equal(a.split, b.split)
        assert not np.array_equal(a.features, gen(n=120, seed=4).features)

    @pytest.mark.parametrize("gen", [data.gen_circles, data.gen_moons])
    def test_balanced_stratified_split(self, gen):
        ds = gen(n=500, seed=0)
        assert np.sum(ds.labels == 1) == 250 and np.sum(ds.labels == 2) == 250
        _, ytr = ds.train
        _, yte = ds.test
        assert len(ytr) == 400 and len(yte) == 100
        assert np.sum(yte == 1) == 50

    @pytest.mark.parametrize("gen", [data.gen_circles, data.gen_moons])
    def test_train_normalized(self, gen):
        ds = gen(n=300, seed=1)
        X, _ = ds.train
        assert np.allclose(X.min(axis=0), -1.0) and np.allclose(X.max(axis=0), 1.0)

    def test_noiseless_circle_radii(self):
        ds = data.gen_circles(n=200, noise_sd=0.0, factor=0.6, seed=2)
        norm = ds.meta["normalization"]
        raw = data.minmax_invert(ds.features, np.array(norm["lo"]), np.array(norm["hi"]))
        r = np.hypot(raw[:, 0], raw[:, 1])
        assert np.allclose(r[ds.labels == 2], 1.0, atol=1e-12)
        assert np.allclose(r[ds.labels == 1], 0.6, atol=1e-12)

    def test_noiseless_moons_on_arcs(self):
        ds = data.gen_moons(n=200, noise_sd=0.0, seed=3)
        norm = ds.meta["normalization"]
        raw = data.minmax_invert(ds.features, np.array(norm["lo"]), np.array(norm["hi"]))
        up, low = raw[ds.labels == 1], raw[ds.labels == 2]
        assert np.allclose(np.hypot(up[:, 0], up[:, 1]), 1.0, atol=1e-12) and np.all(up[:, 1] >= -1e-12)
        assert np.allclose(np.hypot(low[:, 0] - 1, low[:, 1] - 0.5), 1.0, atol=1e-12)

    def test_too_small(self):
        with pytest.raises(InvalidArgumentError):
            data.gen_circles(n=3)

    def test_minmax_roundtrip(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(30, 3))
        lo, hi = X.min(axis=0), X.max(axis=0)
        assert np.allclose(data.minmax_invert(data.minmax_apply(X, lo, hi), lo, hi), X)


class TestTetromino:
    def test_enumeration(self):
        P, y = data.tetromino_patterns()
        assert P.shape == (48, 9)
        assert np.sum(y == 1) == 16 and np.sum(y == 2) == 32
        assert len({tuple(p) for p in P}) == 48
        # four lit pixels, or five for the negatives
        assert set(P.sum(axis=1)) == {4.0, 5.0}

    def test_dataset(self):
        ds = data.gen_tetromino(n_train=100, seed=0)
        Xtr, _ = ds.train
        Xte, yte = ds.test
        assert Xtr.shape == (100, 9) and Xte.shape == (48, 9)
        assert set(np.unique(Xte)) <= {0.0, 1.0}
        assert Xtr.min() >= -0.1 and Xtr.max() <= 1.1
        assert np.sum(yte == 1) == 16

    def test_noisy_rows_near_patterns(self):
        ds = data.gen_tetromino(n_train=50, seed=1)
        P, y = data.tetromino_patterns()
        Xtr, ytr = ds.train
        for x, lab in zip(Xtr, ytr):
            d = np.max(np.abs(P - x), axis=1)
            assert np.min(d[y == lab]) <= 0.1 + 1e-12

    def test_encoding_uses_five_gates(self):
        from reupload import model

        assert len(model.encoding_gates(np.zeros(9))) == 5


class TestWorstCase:
    @pytest.mark.parametrize("variant", ["powers_of_two", "inverse_powers"])
    def test_golden(self, variant):
        rows = GOLDEN["variants"][variant]
        for key, row in rows.items():
            lab = [int(c) for c in key]
            _, omega = data.gen_worst_case(GOLDEN["N"], lab, variant)
            assert omega == pytest.approx(row["constructed_omega"], rel=1e-15, abs=0)
            assert row["oracle_omega"] is not None

    @pytest.mark.parametrize("variant", ["powers_of_two", "inverse_powers"])
    def test_oracle_frequency_reproduces_labels(self, variant):
        # the oracle omega came from a brute-force grid: it must realize the labels too
        pts = data.worst_case_points(GOLDEN["N"], variant)
        for key, row in GOLDEN["variants"][variant].items():
            lab = np.array([int(c) for c in key])
            assert np.array_equal((np.cos(row["oracle_omega"] * pts) < 0).astype(int), lab)

    @pytest.mark.parametrize("variant,grid", [("powers_of_two", powers_of_two_grid), ("inverse_powers", inverse_powers_grid)])
    def test_all_labelings_n7_against_grid(self, variant, grid):
        N = 7
        pts = data.worst_case_points(N, variant)
        realized = worst_case_patterns(pts, grid(N))
        assert len(realized) == 2 ** (N + 1)
        for lab in itertools.product((0, 1), repeat=N + 1):
            ds, omega = data.gen_worst_case(N, lab, variant)
            assert np.array_equal(ds.labels, 1 + np.array(lab))
            assert np.array_equal((np.cos(omega * pts) < 0).astype(int), lab)

    @given(st.lists(st.integers(0, 1), min_size=2, max_size=41))
    @settings(max_examples=60)
    def test_random_labelings(self, lab):
        ds, omega = data.gen_worst_case(len(lab) - 1, lab)
        assert ds.meta["validated"]
        assert np.array_equal(data.compressed_labels(omega, ds.features[:, 0]), lab)

    def test_literal_formula_can_fail(self):
        # using labels directly as binary digits does not encode the quadrant
        bad = [lab for lab in itertools.product((0, 1), repeat=4)
               if not data.gen_worst_case(3, lab)[0].meta["literal_formula_valid"]]
        assert bad

    def test_precision_bound(self):
        with pytest.raises(PrecisionError):
            data.gen_worst_case(41, [0] * 42)
        data.gen_worst_case(40, [1, 0] * 20 + [1])

    def test_single_class(self):
        ds, omega = data.gen_worst_case(2, [0, 0, 0])
        assert omega == 0.0
        assert ds.meta["single_class"]
        assert not ds.has_both_classes()

    def test_bad_labels(self):
        with pytest.raises(InvalidArgumentError):
            data.gen_worst_case(2, [0, 1])
        with pytest.raises(InvalidArgumentError):
            data.gen_worst_case(2, [0, 1, 2])
        with pytest.raises(InvalidArgumentError):
            data.worst_case_points(2, "nope")


class TestPca:
    def make(self, n=200, d=10, seed=0):
        rng = np.random.default_rng(seed)
        scales = np.linspace(3, 0.5, d)
        return rng.normal(size=(n, d)) * scales @ np.linalg.qr(rng.normal(size=(d, d)))[0]

    def test_orthonormal_and_ordered(self):
        m = data.fit_pca(self.make(), k=6)
        assert np.allclose(m.components @ m.components.T, np.eye(6), atol=1e-12)
        assert np.all(np.diff(m.explained_variance) <= 0)

    def test_variance_matches_projection(self):
        X = self.make()
        m = data.fit_pca(X, k=4)
        proj = data.apply_pca(m, X, rescale=False)
        assert np.allclose(proj.var(axis=0, ddof=1), m.explained_variance, rtol=1e-10)

    def test_rescaled_range(self):
        X = self.make()
        proj = data.apply_pca(data.fit_pca(X, k=5), X)
        assert np.allclose(proj.min(axis=0), -1) and np.allclose(proj.max(axis=0), 1)

    def test_full_rank_reconstruction(self):
        X = self.make(d=6)
        m = data.fit_pca(X, k=6)
        assert np.allclose(data.inverse_pca(m, data.apply_pca(m, X)), X, atol=1e-10)

    def test_rank_deficient(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(50, 3)) @ rng.normal(size=(3, 8))
        with pytest.raises(RankDeficiencyError):
            data.fit_pca(X, k=5)

    def test_bad_k(self):
        with pytest.raises(InvalidArgumentError):
            data.fit_pca(self.make(d=5), k=6)

    def test_pipeline_split_sizes(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(1998, 30))
        y = rng.integers(1, 3, 1998)
        ds = Dataset(X, y, np.full(1998, "train", dtype=object))
        out, m = data.pca_pipeline(ds, k=20)
        assert len(out.train[1]) == 1776 and len(out.test[1]) == 222
        assert out.n_features == 20 and m.k == 20

    def test_pipeline_fits_on_train_only(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(90, 6))
        split = np.array(["train"] * 80 + ["test"] * 10, dtype=object)
        X[80:] += 100.0
        ds = Dataset(X, rng.integers(1, 3, 90), split)
        _, m = data.pca_pipeline(ds, k=3, test_fraction=None)
        assert np.allclose(m.mean, X[:80].mean(axis=0))


class TestCsv:
    def write(self, path, text):
        path.write_text(text)
        return path

    def test_roundtrip(self, tmp_path):
        ds = data.gen_circles(n=40, seed=5)
        p = data.save_csv(ds, tmp_path / "c.csv")
        back = data.load_csv(p)
        assert np.array_equal(back.features, ds.features)
        assert np.array_equal(back.labels, ds.labels)
        assert np.array_equal(back.split, ds.split)
        assert json.loads(p.with_suffix(".meta.json").read_text())["generator"] == "circles"

    def test_bad_value_reports_row_and_column(self, tmp_path):
        p = self.write(tmp_path / "b.csv", "a,b,label\n1,2,1\n3,oops,2\n")
        with pytest.raises(FormatError, match=r"row 3, column 'b'"):
            data.load_csv(p)

    def test_ragged_row(self, tmp_path):
        p = self.write(tmp_path / "r.csv", "a,label\n1,1\n2\n")
        with pytest.raises(FormatError, match="row 3"):
            data.load_csv(p)

    def test_non_finite(self, tmp_path):
        p = self.write(tmp_path / "n.csv", "a,label\nnan,1\n")
        with pytest.raises(FormatError):
            data.load_csv(p)

    def test_unknown_label(self, tmp_path):
        p = self.write(tmp_path / "l.csv", "a,label\n1,3\n")
        with pytest.raises(LabelError):
            data.load_csv(p)

    def test_label_map(self, tmp_path):
        p = self.write(tmp_path / "m.csv", "a,label\n1,car\n2,ship\n")
        ds = data.load_csv(p, label_map={"car": 1, "ship": 2})
        assert ds.labels.tolist() == [1, 2]
        with pytest.raises(LabelError):
            data.load_csv(p, label_map={"car": 1})

    def test_missing_label_column_and_empty(self, tmp_path):
        with pytest.raises(FormatError):
            data.load_csv(self.write(tmp_path / "x.csv", "a,b\n1,2\n"))
        with pytest.raises(FormatError):
            data.load_csv(self.write(tmp_path / "e.csv", ""))
        with pytest.raises(FormatError):
            data.load_csv(self.write(tmp_path / "h.csv", "a,label\n"))

    def test_sha_recorded(self, tmp_path):
        p = self.write(tmp_path / "s.csv", "a,label\n1,1\n")
        assert len(data.load_csv(p).meta["sha256"]) == 64


def test_dataset_validation():
    with pytest.raises(LabelError):
        Dataset(np.zeros((2, 1)), [0, 1], ["train", "train"])
    with pytest.raises(InvalidArgumentError):
        Dataset(np.zeros((2, 1)), [1, 2], ["train", "other"])
    with pytest.raises(InvalidArgumentError):
        Dataset(np.array([[math.nan], [0.0]]), [1, 2], ["train", "train"])
