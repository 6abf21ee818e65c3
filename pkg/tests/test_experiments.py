import os

import numpy as np
import pytest

from ordkit.dataset import ColumnSchema, MINORITY, TabularDataset
from ordkit.errors import ExperimentError
from ordkit.experiments import (ARM_PLUS_MAJORITY, ARM_PLUS_MINORITY,
                                ARM_REAL_FULL, ARM_REAL_NO_OVERLAP,
                                ARM_SYNTH_ONLY, MODE_BASELINE, MODE_ORD,
                                MODE_ORD_AFTER, EvalReport, PipelineConfig,
                                ablate_augmentation, ablate_before_after,
                                ablate_overlap_removal, bench_overlap,
                                cells_csv_text, emit_report, report_md_text,
                                run_efficacy, _check_hygiene)
from ordkit.modeling import ClassifierAdapter
from ordkit.overlap import OverlapConfig
from ordkit.rng import child_rng


def overlap_data(seed=0, n_maj=160, n_min=70):
    rng = child_rng(seed, "expdata")
    maj = np.column_stack([rng.uniform(0, 10, n_maj), rng.normal(0, 1, n_maj)])
    mino = np.column_stack([rng.uniform(8, 12, n_min), rng.normal(0, 1, n_min)])
    X = np.concatenate([maj, mino])
    y = np.array([0] * n_maj + [1] * n_min)
    cols = [ColumnSchema("a", "numeric"), ColumnSchema("b", "numeric")]
    return TabularDataset(cols, "y", X, y)


def small_cfg(**overrides):
    base = dict(
        overlap=OverlapConfig(tau=0.3, k_folds=2, n_trees=10),
        generator={"kind": "gmm", "components": 3},
        classifiers=("tree", "gbdt"),
        classifier_params={"gbdt": {"n_rounds": 15}},
        seeds=(0, 1),
        modes=(MODE_ORD, MODE_BASELINE),
        test_per_class=15,
        synth_per_class=60,
    )
    base.update(overrides)
    return PipelineConfig(**base)


class TestRunEfficacy:
    def test_grid_shape_and_metrics_ranges(self):
        report = run_efficacy(overlap_data(), small_cfg())
        assert len(report.cells) == 2 * 2 * 2
        for c in report.cells:
            for v in (c.minority_acc, c.majority_acc, c.macro_acc, c.f1, c.auc):
                assert 0.0 <= v <= 1.0
            assert c.macro_acc == pytest.approx(
                (c.minority_acc + c.majority_acc) / 2)

    def test_equal_count_contract(self):
        report = run_efficacy(overlap_data(), small_cfg(), keep_artifacts=True)
        for art in report.artifacts:
            counts = art.synthetic.label_counts()
            assert counts[0] == counts[1] == 60

    def test_seed_isolation(self):
        data = overlap_data()
        both = run_efficacy(data, small_cfg(seeds=(0, 1)))
        only1 = run_efficacy(data, small_cfg(seeds=(1,)))
        for c in only1.cells:
            ref = both.cell(c.mode, c.classifier, c.seed)
            assert ref == c

    def test_mode_isolation(self):
        data = overlap_data()
        both = run_efficacy(data, small_cfg(modes=(MODE_ORD, MODE_BASELINE)))
        solo = run_efficacy(data, small_cfg(modes=(MODE_BASELINE,)))
        for c in solo.cells:
            assert both.cell(c.mode, c.classifier, c.seed) == c

    def test_thread_counts_agree(self):
        data = overlap_data()
        cfg = small_cfg()
        r1 = run_efficacy(data, cfg, threads=1)
        r4 = run_efficacy(data, cfg, threads=4)
        assert cells_csv_text(r1) == cells_csv_text(r4)

    def test_ord_threads_env(self, monkeypatch):
        data = overlap_data()
        cfg = small_cfg(seeds=(0,))
        base = cells_csv_text(run_efficacy(data, cfg))
        monkeypatch.setenv("ORD_THREADS", "3")
        assert cells_csv_text(run_efficacy(data, cfg)) == base

    def test_oracle_scores_attached_for_worlds(self):
        from ordkit.oracle import BlobWorld, make_blobs
        world = BlobWorld.from_totals(
            300, [((0.0, 0.0), 1.0), ((8.0, 8.0), 1.0)],
            120, [((4.0, 4.0), 1.0)])
        data = make_blobs(world, seed=3)
        cfg = small_cfg(world=world, seeds=(0,), test_per_class=20)
        report = run_efficacy(data, cfg)
        assert {g.mode for g in report.generator_scores} == {MODE_ORD,
                                                             MODE_BASELINE}
        for g in report.generator_scores:
            assert 0.0 <= g.score.weighted_avg <= 1.0

    def test_failure_names_cell(self):
        data = overlap_data()
        cfg = small_cfg(classifiers=("tree",),
                        classifier_params={"tree": {"bogus_option": 1}})
        try:
            run_efficacy(data, cfg)
        except ExperimentError as exc:
            msg = str(exc)
            assert "mode=" in msg and "classifier=" in msg and "seed=" in msg
        else:
            pytest.fail("expected a named cell failure")

    def test_augment_real_minority_adds_train_rows(self):
        data = overlap_data()
        cfg = small_cfg(augment_real_minority=True, seeds=(0,))
        report = run_efficacy(data, cfg, keep_artifacts=True)
        art = report.artifacts[0]
        n_min_train = art.train.class_indices(MINORITY).size
        assert art.pool.n_rows == art.synthetic.n_rows + n_min_train
        real_rows = art.pool.row_ids[art.pool.row_ids >= 0]
        assert len(real_rows) == n_min_train


class TestHygiene:
    def test_leak_detection_fires(self):
        data = overlap_data()
        from ordkit.dataset import SplitSpec, stratified_split
        train, test = stratified_split(data, SplitSpec(seed=0, test_per_class=10))
        with pytest.raises(ExperimentError, match="leaked"):
            _check_hygiene(train, test, test.subset(np.arange(3)))

    def test_clean_run_passes(self):
        report = run_efficacy(overlap_data(), small_cfg(seeds=(0,)),
                              keep_artifacts=True)
        assert report.artifacts


class TestAblations:
    def test_overlap_removal_arms(self):
        report = ablate_overlap_removal(overlap_data(), small_cfg(seeds=(0,)))
        modes = {c.mode for c in report.cells}
        assert modes == {ARM_REAL_FULL, ARM_REAL_NO_OVERLAP}

    def test_empty_overlap_set_gives_identical_arms(self):
        # far-separated classes: nothing is flagged, arms share the data
        rng = child_rng(1, "sep")
        X = np.concatenate([rng.normal(0, 0.2, (120, 2)),
                            rng.normal(50, 0.2, (50, 2))])
        y = np.array([0] * 120 + [1] * 50)
        cols = [ColumnSchema("a", "numeric"), ColumnSchema("b", "numeric")]
        data = TabularDataset(cols, "y", X, y)
        cfg = small_cfg(seeds=(0,), classifiers=("tree",), test_per_class=10,
                        overlap=OverlapConfig(tau=0.3, k_folds=2, n_trees=20))
        report = ablate_overlap_removal(data, cfg, keep_artifacts=True)
        assert report.artifacts[0].overlap_result.n_overlap == 0
        full = report.cell(ARM_REAL_FULL, "tree", 0)
        removed = report.cell(ARM_REAL_NO_OVERLAP, "tree", 0)
        assert (full.minority_acc, full.majority_acc) == \
               (removed.minority_acc, removed.majority_acc)

    def test_before_after_smoke(self):
        report = ablate_before_after(overlap_data(), small_cfg(seeds=(0,)))
        modes = {c.mode for c in report.cells}
        assert modes == {MODE_ORD, MODE_ORD_AFTER}

    def test_after_arm_tau_zero_degenerates(self):
        data = overlap_data()
        cfg = small_cfg(seeds=(0,), modes=(MODE_ORD_AFTER,),
                        overlap=OverlapConfig(tau=0.0, k_folds=2, n_trees=5))
        with pytest.warns(RuntimeWarning):
            report = run_efficacy(data, cfg, keep_artifacts=True)
        art = report.artifacts[0]
        assert art.degenerate
        assert set(art.synthetic.label_counts()) == {1}

    def test_augmentation_arms(self):
        report = ablate_augmentation(overlap_data(), small_cfg(seeds=(0,)),
                                     include_majority_arm=True)
        modes = {c.mode for c in report.cells}
        assert modes == {ARM_SYNTH_ONLY, ARM_PLUS_MINORITY, ARM_PLUS_MAJORITY}

    def test_empty_minority_addition_coincides(self):
        # the +minority arm with an empty minority block equals synth-only
        data = overlap_data()
        report = run_efficacy(data, small_cfg(seeds=(0,)), keep_artifacts=True)
        art = report.artifacts[0]
        empty = art.train.subset(np.empty(0, dtype=np.int64))
        merged = art.synthetic.concat(empty)
        assert merged.X.tolist() == art.synthetic.X.tolist()
        assert merged.y.tolist() == art.synthetic.y.tolist()

    def test_diagnostic_mode_reduces_to_real_training(self):
        # zero synthetic rows + real minority + full real majority subsample
        # trains on exactly the real training data
        data = overlap_data()
        cfg = small_cfg(seeds=(0,), classifiers=("tree",), synth_per_class=0,
                        augment_majority_fraction=1.0)
        with pytest.warns(RuntimeWarning):
            report = ablate_augmentation(data, cfg, include_majority_arm=True)
        cell = report.cell(ARM_PLUS_MAJORITY, "tree", 0)
        from ordkit.dataset import SplitSpec, stratified_split
        train, test = stratified_split(data, SplitSpec(seed=0, test_per_class=15))
        adapter = ClassifierAdapter(kind="tree", seed=0).fit(train)
        pred = adapter.predict_proba(test)[:, 1] >= 0.5
        ref_min = float((pred[test.y == 1] == 1).mean())
        ref_maj = float((pred[test.y == 0] == 0).mean())
        assert cell.minority_acc == pytest.approx(ref_min)
        assert cell.majority_acc == pytest.approx(ref_maj)


class TestBench:
    def test_small_bench_under_ceiling(self):
        result = bench_overlap(1000, 5, seed=0)
        assert result.n_samples == 1000 and result.n_features == 5
        assert result.seconds < 5.0


class TestReports:
    def test_cells_csv_counts(self):
        report = run_efficacy(overlap_data(), small_cfg(seeds=(0,)))
        text = cells_csv_text(report)
        lines = text.strip().split("\n")
        assert lines[0].startswith("mode,classifier,seed")
        assert len(lines) == 1 + 2 * 2  # 2 modes x 2 classifiers x 1 seed

    def test_emit_deterministic_bytes(self, tmp_path):
        report = run_efficacy(overlap_data(), small_cfg(seeds=(0,)))
        d1, d2 = tmp_path / "a", tmp_path / "b"
        emit_report(report, d1)
        emit_report(report, d2)
        assert (d1 / "cells.csv").read_bytes() == (d2 / "cells.csv").read_bytes()
        assert (d1 / "report.md").read_bytes() == (d2 / "report.md").read_bytes()

    def test_markdown_aggregates_match_csv_recomputation(self, tmp_path):
        report = run_efficacy(overlap_data(), small_cfg())
        emit_report(report, tmp_path)
        rows = (tmp_path / "cells.csv").read_text().strip().split("\n")[1:]
        by_cell = {}
        for row in rows:
            parts = row.split(",")
            by_cell.setdefault((parts[0], parts[1]), []).append(float(parts[5]))
        md = (tmp_path / "report.md").read_text()
        for (mode, kind), vals in by_cell.items():
            mean = np.mean(vals)
            sd = np.std(vals, ddof=1) if len(vals) > 1 else 0.0
            assert f"| {mode} | {kind} | {mean:.4f} | {sd:.4f} |" in md

    def test_aggregate_methods(self):
        report = EvalReport()
        from ordkit.experiments import CellMetrics
        for seed, macro in ((0, 0.5), (1, 0.7)):
            report.cells.append(CellMetrics(
                mode="ord", classifier="gbdt", seed=seed, minority_acc=macro,
                majority_acc=macro, macro_acc=macro, f1=macro, auc=macro))
        mean, sd = report.aggregate("ord", "gbdt")
        assert mean == pytest.approx(0.6)
        assert sd == pytest.approx(np.std([0.5, 0.7], ddof=1))

    def test_empty_report_rejected(self, tmp_path):
        from ordkit.errors import DataError
        with pytest.raises(DataError):
            emit_report(EvalReport(), tmp_path)
