import numpy as np
import pytest

from ordkit.dataset import (ColumnSchema, TabularDataset, load_csv, write_csv,
                            write_schema)
from ordkit.errors import FitError, SamplingError
from ordkit.generators import (AdasynGenerator, BorderlineSmoteGenerator,
                               ExternalBridgeGenerator, GmmGenerator,
                               SmoteGenerator, adasyn, borderline_smote,
                               external_bridge, fit_gmm, gmm_sample, smote)
from ordkit.overlap import OverlapConfig, detect_overlap
from ordkit.rng import child_rng

NUM2 = [ColumnSchema("a", "numeric"), ColumnSchema("b", "numeric")]


def numeric_dataset(X, y, cols=None):
    cols = cols or [ColumnSchema(f"f{j}", "numeric") for j in range(np.shape(X)[1])]
    return TabularDataset(cols, "y", X, y)


def gmm_loglik_reference(model, X):
    """Independent diagonal-Gaussian mixture log-likelihood."""
    total = 0.0
    for x in X:
        acc = 0.0
        for w, mu, var in zip(model.weights, model.means, model.variances):
            quad = np.sum((x - mu) ** 2 / var)
            norm = np.prod(np.sqrt(2 * np.pi * var))
            acc += w * np.exp(-0.5 * quad) / norm
        total += np.log(acc)
    return total


class TestGmm:
    def test_single_component_repeated_point(self):
        X = np.tile([[2.5]], (6, 1))
        d = numeric_dataset(X, np.ones(6, int))
        g = GmmGenerator(components=1, seed=0).fit(d)
        model = g.models_[1]
        assert model.means[0, 0] == pytest.approx(2.5)
        assert model.variances[0, 0] == pytest.approx(1e-6)
        assert model.weights.tolist() == [1.0]

    def test_two_cluster_recovery(self):
        rng = child_rng(0, "gmm-fixture")
        X = np.concatenate([rng.normal(0.0, 0.5, 200),
                            rng.normal(10.0, 0.5, 200)])[:, None]
        d = numeric_dataset(X, np.zeros(400, int))
        g = GmmGenerator(components=2, seed=1).fit(d)
        means = sorted(g.models_[0].means[:, 0].tolist())
        # oracle: nearest-cluster sample means
        ref = [X[X[:, 0] < 5.0].mean(), X[X[:, 0] >= 5.0].mean()]
        assert abs(means[0] - ref[0]) < 0.2
        assert abs(means[1] - ref[1]) < 0.2

    def test_em_monotone_50_fixtures(self):
        rng = np.random.default_rng(2)
        for trial in range(50):
            n = int(rng.integers(30, 120))
            dim = int(rng.integers(1, 4))
            k = int(rng.integers(1, 5))
            X = rng.standard_normal((n, dim)) * rng.uniform(0.5, 3.0) \
                + rng.standard_normal(dim) * 5.0
            d = numeric_dataset(X, np.zeros(n, int))
            g = GmmGenerator(components=k, seed=trial, max_iter=60).fit(d)
            trace = g.loglik_trace(0)
            diffs = np.diff(trace)
            assert (diffs >= -1e-9).all()
            # the tail of the trace matches an independent evaluation of the
            # final parameters
            ref = gmm_loglik_reference(g.models_[0], X)
            assert trace[-1] == pytest.approx(ref, abs=1e-8)

    def test_label_below_components_rejected(self):
        d = numeric_dataset(np.zeros((3, 1)), np.array([0, 0, 1]))
        with pytest.raises(FitError):
            fit_gmm(d, components=2)

    def test_clamp_components(self):
        d = numeric_dataset(np.arange(8.0)[:, None], np.array([0] * 6 + [1] * 2))
        g = GmmGenerator(components=4, clamp_components=True, seed=0).fit(d)
        assert g.models_[1].weights.size == 2

    def test_sampling_clt_bound(self):
        X = np.array([[5.0]] * 40)
        rng = child_rng(1, "jitter")
        X = X + rng.normal(0, 1.0, (40, 1))
        d = numeric_dataset(X, np.ones(40, int))
        g = GmmGenerator(components=1, seed=2).fit(d)
        batch = gmm_sample(g, 1, 10000, seed=3)
        mu = g.models_[1].means[0, 0]
        assert abs(batch.X[:, 0].mean() - mu) < 0.05

    def test_zero_draws(self):
        d = numeric_dataset(np.arange(10.0)[:, None], np.zeros(10, int))
        g = fit_gmm(d, components=2, seed=0)
        batch = g.sample(0, 0, seed=1)
        assert batch.n_rows == 0

    def test_label_echo_and_schema(self):
        rng = child_rng(4, "mix")
        X = np.column_stack([rng.normal(0, 1, 30),
                             rng.integers(0, 3, 30).astype(float)])
        cols = [ColumnSchema("v", "numeric"),
                ColumnSchema("t", "categorical", ("a", "b", "c"))]
        d = TabularDataset(cols, "y", X, rng.integers(0, 2, 30))
        g = GmmGenerator(components=2, clamp_components=True, seed=5).fit(d)
        for label in (0, 1):
            batch = g.sample(label, 25, seed=6)
            assert (batch.y == label).all()
            assert batch.columns == d.columns
            cat = batch.X[:, 1]
            assert np.isin(cat, [0.0, 1.0, 2.0]).all()
            assert np.isfinite(batch.X).all()

    def test_unknown_label_rejected(self):
        d = numeric_dataset(np.arange(6.0)[:, None], np.zeros(6, int))
        g = fit_gmm(d, components=2, seed=0)
        with pytest.raises(SamplingError):
            g.sample(1, 3, seed=0)

    def test_categorical_tables_sum_to_one(self):
        rng = child_rng(7, "cats")
        X = np.column_stack([rng.normal(0, 1, 60),
                             rng.integers(0, 4, 60).astype(float)])
        cols = [ColumnSchema("v", "numeric"),
                ColumnSchema("t", "categorical", tuple("wxyz"))]
        d = TabularDataset(cols, "y", X, np.zeros(60, np.int64))
        g = GmmGenerator(components=3, seed=8).fit(d)
        model = g.models_[0]
        assert model.weights.sum() == pytest.approx(1.0)
        for table in model.cat_tables:
            assert table.sum(axis=1) == pytest.approx(np.ones(3))
        assert (model.variances >= 1e-6).all()


class TestSmote:
    def test_identical_rows_reproduce(self):
        X = np.tile([[3.0, 4.0]], (5, 1))
        d = numeric_dataset(X, np.ones(5, int), cols=NUM2)
        batch = smote(d, 20, seed=0)
        assert (batch.X == [3.0, 4.0]).all()
        assert (batch.y == 1).all()

    def test_segment_membership_1000_draws(self):
        d = numeric_dataset([[0.0, 0.0], [1.0, 1.0]], np.ones(2, int), cols=NUM2)
        batch = smote(d, 1000, seed=1, k_neighbors=1)
        x, ycol = batch.X[:, 0], batch.X[:, 1]
        assert np.allclose(x, ycol, atol=1e-12)
        assert (x >= 0.0).all() and (x <= 1.0).all()

    def test_zero_draws(self):
        d = numeric_dataset([[0.0, 0.0], [1.0, 1.0]], np.ones(2, int), cols=NUM2)
        assert smote(d, 0, seed=0).n_rows == 0

    def test_single_row_copies(self):
        d = numeric_dataset([[7.0, -2.0]], np.ones(1, int), cols=NUM2)
        batch = smote(d, 10, seed=2)
        assert (batch.X == [7.0, -2.0]).all()

    def test_bounding_box_property(self):
        rng = child_rng(3, "cloud")
        X = rng.normal(0, 2, (40, 3))
        d = numeric_dataset(X, np.ones(40, int))
        gen = SmoteGenerator(k_neighbors=4).fit(d)
        batch = gen.sample(1, 1000, seed=4)
        lo, hi = X.min(axis=0), X.max(axis=0)
        assert (batch.X >= lo - 1e-12).all()
        assert (batch.X <= hi + 1e-12).all()

    def test_categoricals_copied_from_seed(self):
        cols = [ColumnSchema("v", "numeric"),
                ColumnSchema("t", "categorical", ("p", "q"))]
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
        d = TabularDataset(cols, "y", X, np.ones(3, np.int64))
        gen = SmoteGenerator(k_neighbors=2).fit(d)
        batch = gen.sample(1, 500, seed=5)
        assert np.isin(batch.X[:, 1], [0.0, 1.0]).all()

    def test_multiclass_input_rejected_by_function(self):
        d = numeric_dataset([[0.0], [1.0]], np.array([0, 1]))
        with pytest.raises(FitError):
            smote(d, 5, seed=0)


def borderline_fixture():
    """12 points covering the three neighborhood situations (m=4):
    row 5 is noise (all-majority neighborhood), row 6 is the lone danger
    point (3 of 4 neighbors majority), rows 7-11 sit deep inside minority
    mass (0 majority neighbors)."""
    maj = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.6, 0.4]]
    mino = [[0.4, 0.6],
            [1.2, 0.5],
            [20.0, 20.0], [20.1, 20.0], [20.0, 20.1], [20.1, 20.1],
            [20.05, 20.05]]
    X = np.array(maj + mino)
    y = np.array([0] * 5 + [1] * 7)
    return numeric_dataset(X, y, cols=NUM2)


def brute_force_danger(d, label, m):
    X, y = d.X, d.y
    rows = np.nonzero(y == label)[0]
    danger = []
    for r in rows:
        dist = np.sqrt((((X - X[r]) / _scales(d)) ** 2).sum(axis=1))
        dist[r] = np.inf
        near = np.argsort(dist, kind="stable")[:m]
        cnt = int((y[near] != label).sum())
        if m / 2.0 <= cnt < m:
            danger.append(r)
    return danger


def _scales(d):
    sd = d.X.std(axis=0)
    sd[sd == 0] = 1.0
    return sd


class TestBorderline:
    def test_danger_matches_brute_force(self):
        d = borderline_fixture()
        gen = BorderlineSmoteGenerator(k_neighbors=2, m_neighbors=4).fit(d)
        got = sorted(gen.danger_rows(1).tolist())
        want = sorted(brute_force_danger(d, 1, 4))
        assert got == want
        assert got == [6]
        assert 5 not in got                       # all-majority neighborhood
        assert not set(range(7, 12)) & set(got)   # deep inside minority mass

    def test_empty_danger_warns_and_returns_empty(self):
        X = np.concatenate([np.zeros((4, 2)), np.full((4, 2), 50.0)])
        d = numeric_dataset(X, np.array([0] * 4 + [1] * 4), cols=NUM2)
        gen = BorderlineSmoteGenerator(k_neighbors=2, m_neighbors=3).fit(d)
        with pytest.warns(RuntimeWarning):
            batch = gen.sample(1, 10, seed=0)
        assert batch.n_rows == 0
        assert gen.danger_empty_

    def test_seeds_only_from_danger(self):
        d = borderline_fixture()
        gen = BorderlineSmoteGenerator(k_neighbors=1, m_neighbors=4).fit(d)
        danger = set(gen.danger_rows(1).tolist())
        batch = gen.sample(1, 400, seed=1)
        assert batch.n_rows == 400
        assert (batch.y == 1).all()
        # with k=1 every synthetic point lies on a segment out of a danger row
        minority_rows = np.nonzero(d.y == 1)[0]
        pts = d.X[minority_rows]
        for s in batch.X:
            on_segment = False
            for a_idx in danger:
                a = d.X[a_idx]
                for b in pts:
                    ab = b - a
                    denom = float(ab @ ab)
                    if denom == 0.0:
                        if np.allclose(s, a):
                            on_segment = True
                        continue
                    t = float((s - a) @ ab) / denom
                    if -1e-9 <= t <= 1 + 1e-9 and np.allclose(a + t * ab, s,
                                                              atol=1e-9):
                        on_segment = True
            assert on_segment

    def test_function_wrapper(self):
        d = borderline_fixture()
        batch = borderline_smote(d, 30, seed=2, k_neighbors=2, m_neighbors=4)
        assert batch.n_rows == 30
        assert (batch.y == 1).all()

    def test_m_below_k_rejected(self):
        d = borderline_fixture()
        with pytest.raises(FitError):
            BorderlineSmoteGenerator(k_neighbors=5, m_neighbors=3).fit(d)


class TestAdasyn:
    def test_hand_allocation(self):
        # two minority points: one fully surrounded by majority (r=1),
        # one surrounded by minority duplicates (r=0)
        X = np.array([
            [0.0, 0.0], [0.2, 0.0], [0.0, 0.2], [0.2, 0.2],   # majority
            [0.1, 0.1],                                        # minority, r=1
            [50.0, 50.0], [50.1, 50.0], [50.0, 50.1], [50.1, 50.1],
            [50.05, 50.05],                                    # minority block
        ])
        y = np.array([0, 0, 0, 0, 1, 1, 1, 1, 1, 1])
        d = numeric_dataset(X, y, cols=NUM2)
        gen = AdasynGenerator(k_neighbors=4).fit(d)
        rows, alloc, rhat = gen.allocations(1, 10)
        by_row = dict(zip(rows.tolist(), alloc.tolist()))
        assert by_row[4] == 10
        assert all(by_row[r] == 0 for r in (5, 6, 7, 8, 9))

    def test_uniform_when_all_equal(self):
        # symmetric: every minority point has the same majority exposure
        X = np.array([[0.0, 0.0], [1.0, 0.0],
                      [0.0, 1.0], [1.0, 1.0]])
        y = np.array([0, 0, 1, 1])
        d = numeric_dataset(X, y, cols=NUM2)
        gen = AdasynGenerator(k_neighbors=3).fit(d)
        rows, alloc, _ = gen.allocations(1, 10)
        assert abs(alloc[0] - alloc[1]) <= 1

    def test_sigma_zero_uniform_fallback(self):
        X = np.array([[0.0, 0.0], [0.1, 0.1], [0.2, 0.0], [0.0, 0.2]])
        y = np.array([1, 1, 1, 1])
        # no majority at all: every r_i = 0
        d = numeric_dataset(X, y, cols=NUM2)
        gen = AdasynGenerator(k_neighbors=2).fit(d)
        rows, alloc, _ = gen.allocations(1, 8)
        assert alloc.tolist() == [2, 2, 2, 2]

    def test_rounding_bound_over_random_fixtures(self):
        rng = np.random.default_rng(6)
        for trial in range(20):
            n_maj = int(rng.integers(5, 30))
            n_min = int(rng.integers(2, 15))
            X = np.concatenate([rng.normal(0, 1, (n_maj, 2)),
                                rng.normal(1, 1, (n_min, 2))])
            y = np.array([0] * n_maj + [1] * n_min)
            d = numeric_dataset(X, y, cols=NUM2)
            n_total = int(rng.integers(1, 60))
            batch = adasyn(d, n_total, seed=trial, k_neighbors=3)
            assert n_total - n_min <= batch.n_rows <= n_total + n_min

    def test_sample_exact_count(self):
        rng = np.random.default_rng(8)
        X = np.concatenate([rng.normal(0, 1, (20, 2)),
                            rng.normal(1.5, 1, (7, 2))])
        y = np.array([0] * 20 + [1] * 7)
        d = numeric_dataset(X, y, cols=NUM2)
        gen = AdasynGenerator(k_neighbors=3).fit(d)
        for n in (1, 13, 40):
            batch = gen.sample(1, n, seed=9)
            assert batch.n_rows == n
            assert (batch.y == 1).all()


class TestConditioningSoundness:
    def test_every_generator_echoes_labels(self):
        rng = child_rng(9, "soundness")
        X = np.concatenate([rng.normal(0, 1, (60, 2)),
                            rng.normal(2.5, 1, (25, 2))])
        y = np.array([0] * 60 + [1] * 25)
        d = numeric_dataset(X, y, cols=NUM2)
        gens = [GmmGenerator(components=3, seed=0).fit(d),
                SmoteGenerator().fit(d),
                AdasynGenerator().fit(d)]
        for gen in gens:
            for label in (0, 1):
                batch = gen.sample(label, 40, seed=11)
                assert batch.n_rows == 40
                assert (batch.y == label).all()
        bl = BorderlineSmoteGenerator(k_neighbors=3, m_neighbors=6).fit(d)
        batch = bl.sample(1, 40, seed=11)
        assert (batch.y == 1).all()


class TestExternalBridge:
    def make_files(self, tmp_path, n0=100, n1=40, n2=15):
        rng = child_rng(10, "bridge")
        X = rng.normal(0, 1, (n0 + n1 + n2, 2))
        y = np.array([0] * n0 + [1] * n1 + [2] * n2)
        cols = NUM2
        d = TabularDataset(cols, "y", X, y, label_kind="ternary")
        ternary_csv = tmp_path / "ternary.csv"
        write_csv(d, ternary_csv)
        schema = tmp_path / "schema.json"
        write_schema(d, schema)
        synth = TabularDataset(cols, "y", rng.normal(0, 1, (n0 + n1, 2)),
                               np.array([0] * n0 + [1] * n1),
                               label_kind="ternary")
        synth_csv = tmp_path / "synth.csv"
        write_csv(synth, synth_csv)
        return schema, ternary_csv, synth_csv

    def test_subsample_without_replacement(self, tmp_path):
        schema, ternary_csv, synth_csv = self.make_files(tmp_path)
        gen = external_bridge(schema, ternary_csv, synth_csv)
        batch = gen.sample(0, 50, seed=0)
        assert batch.n_rows == 50
        assert len({tuple(r) for r in batch.X.tolist()}) == 50

    def test_shortfall_error_names_counts(self, tmp_path):
        schema, ternary_csv, synth_csv = self.make_files(tmp_path)
        gen = external_bridge(schema, ternary_csv, synth_csv)
        with pytest.raises(SamplingError, match="101"):
            gen.sample(0, 101, seed=0)
        gen.sample(0, 60, seed=0)
        with pytest.raises(SamplingError, match="40"):
            gen.sample(0, 41, seed=1)

    def test_round_trip_counts_from_detwhile(self, tmp_path):
        rng = child_rng(11, "rt")
        X = np.concatenate([rng.uniform(0, 10, 120), rng.uniform(8, 12, 50)])[:, None]
        y = np.array([0] * 120 + [1] * 50)
        d = TabularDataset([ColumnSchema("v", "numeric")], "y", X, y)
        ternary, res = detect_overlap(d, OverlapConfig(tau=0.3, k_folds=2,
                                                       n_trees=10, seed=1))
        ternary_csv = tmp_path / "t.csv"
        write_csv(ternary, ternary_csv)
        schema = tmp_path / "s.json"
        write_schema(ternary, schema)
        gen = external_bridge(schema, ternary_csv, ternary_csv)
        counts = gen.label_counts()
        assert counts[0] == res.n_clear
        assert counts.get(2, 0) == res.n_overlap
        assert counts[1] == 50

    def test_with_replacement_flag(self, tmp_path):
        schema, ternary_csv, synth_csv = self.make_files(tmp_path, n0=5, n1=5, n2=2)
        gen = external_bridge(schema, ternary_csv, synth_csv,
                              with_replacement=True)
        batch = gen.sample(0, 40, seed=3)
        assert batch.n_rows == 40

    def test_schema_mismatch_rejected(self, tmp_path):
        schema, ternary_csv, synth_csv = self.make_files(tmp_path)
        ref = load_csv(ternary_csv, schema)
        other = TabularDataset([ColumnSchema("zzz", "numeric")], "y",
                               [[1.0]], [0])
        gen = ExternalBridgeGenerator().fit(ref)
        with pytest.raises(FitError):
            gen.load_synthetic(other)
