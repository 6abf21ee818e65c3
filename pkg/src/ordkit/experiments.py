"""Experiment protocols: efficacy runs, ablations, scaling benchmarks,
and report emission.

Every randomized stage of a cell draws a named child seed from the cell's
seed (split, overlap, generator-fit, generator-sample, classifier), so a
cell's results do not depend on which other cells run or in what order.
Cells may execute on a thread pool; the merge is keyed and sorted, making
reports byte-deterministic for a fixed configuration.
"""

from __future__ import annotations

import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import (BINARY, MAJORITY, MINORITY, NUMERIC, OVERLAP,
                      ColumnSchema, SplitSpec, TabularDataset, load_csv,
                      load_schema, stratified_split)
from .errors import DataError, ExperimentError
from .generators import (AdasynGenerator, BorderlineSmoteGenerator,
                         ExternalBridgeGenerator, GmmGenerator, SmoteGenerator)
from .metrics import auc as auc_score
from .metrics import classification_metrics, confusion
from .modeling import AVG4_KINDS, ClassifierAdapter
from .oracle import BlobWorld, OracleScore, score_synthetic
from .overlap import OverlapConfig, OverlapDetector
from .rng import child_rng, child_seed

MODE_ORD = "ord"
MODE_BASELINE = "baseline"
MODE_ORD_AFTER = "ord_after_synthesis"
MODES = (MODE_ORD, MODE_BASELINE, MODE_ORD_AFTER)

GBDT_COLUMN = "GBDT (XGBoost stand-in)"


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one efficacy experiment needs besides the data."""

    overlap: OverlapConfig = OverlapConfig()
    generator: dict = field(default_factory=lambda: {"kind": "gmm"})
    classifiers: tuple = ("gbdt", "logistic", "tree", "adaboost", "mlp")
    seeds: tuple = (0, 1, 2)
    modes: tuple = (MODE_ORD, MODE_BASELINE)
    test_per_class: int = 200
    synth_per_class: int | None = None
    augment_real_minority: bool = False
    augment_majority_fraction: float = 0.1
    world: BlobWorld | None = None
    oracle_priors: tuple | None = None
    classifier_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.classifiers:
            raise DataError("config needs at least one classifier")
        if not self.seeds:
            raise DataError("config needs at least one seed")
        for mode in self.modes:
            if mode not in MODES:
                raise DataError(f"unknown mode {mode!r}; expected one of {MODES}")


@dataclass(frozen=True)
class CellMetrics:
    mode: str
    classifier: str
    seed: int
    minority_acc: float
    majority_acc: float
    macro_acc: float
    f1: float
    auc: float


@dataclass(frozen=True)
class GeneratorScore:
    mode: str
    seed: int
    score: OracleScore


@dataclass
class CellArtifacts:
    """Intermediate products of one (mode, seed) pipeline, for inspection."""

    mode: str
    seed: int
    train: TabularDataset
    test: TabularDataset
    ternary: TabularDataset | None
    overlap_result: object | None
    synthetic: TabularDataset | None
    pool: TabularDataset
    degenerate: bool = False


@dataclass
class EvalReport:
    cells: list = field(default_factory=list)
    generator_scores: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)

    def cell(self, mode, classifier, seed) -> CellMetrics:
        for c in self.cells:
            if (c.mode, c.classifier, c.seed) == (mode, classifier, seed):
                return c
        raise KeyError((mode, classifier, seed))

    def seeds(self):
        return sorted({c.seed for c in self.cells})

    def aggregate(self, mode, classifier, metric="macro_acc"):
        """(mean, sample sd) of one metric over seeds."""
        vals = [getattr(c, metric) for c in self.cells
                if c.mode == mode and c.classifier == classifier]
        if not vals:
            raise KeyError((mode, classifier))
        arr = np.asarray(vals, dtype=np.float64)
        sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        return float(arr.mean()), sd

    def avg_of_4(self, mode, metric="macro_acc"):
        """Mean over the logistic/tree/adaboost/mlp columns, then seeds."""
        kinds = [k for k in AVG4_KINDS
                 if any(c.classifier == k and c.mode == mode for c in self.cells)]
        if not kinds:
            raise KeyError(mode)
        means = [self.aggregate(mode, k, metric)[0] for k in kinds]
        return float(np.mean(means))


def resolve_threads(threads=None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("ORD_THREADS")
    if env:
        return max(1, int(env))
    return 1


def _make_generator(cfg: PipelineConfig, fit_data: TabularDataset, seed: int):
    params = dict(cfg.generator)
    kind = params.pop("kind", "gmm")
    if kind == "gmm":
        params.setdefault("clamp_components", True)
        gen = GmmGenerator(seed=child_seed(seed, "generator-fit"), **params)
        return gen.fit(fit_data)
    if kind == "smote":
        return SmoteGenerator(**params).fit(fit_data)
    if kind == "borderline":
        return BorderlineSmoteGenerator(**params).fit(fit_data)
    if kind == "adasyn":
        return AdasynGenerator(**params).fit(fit_data)
    if kind == "bridge":
        synthetic_csv = params.pop("synthetic_csv", None)
        schema = params.pop("schema", None)
        if synthetic_csv is None or schema is None:
            raise DataError("bridge generator needs 'synthetic_csv' and 'schema'")
        spec = load_schema(schema)
        synthetic = load_csv(synthetic_csv, spec,
                             reference_columns=fit_data.columns)
        gen = ExternalBridgeGenerator(**params)
        return gen.fit(fit_data).load_synthetic(synthetic)
    raise DataError(f"unknown generator kind {kind!r}")


def _check_hygiene(train, test, *pools):
    """No test row may reach any training-side artifact."""
    test_ids = set(test.row_ids.tolist())
    if set(train.row_ids.tolist()) & test_ids:
        raise ExperimentError("train/test split is not disjoint")
    for pool in pools:
        if pool is None:
            continue
        real = pool.row_ids[pool.row_ids >= 0]
        if set(real.tolist()) & test_ids:
            raise ExperimentError("a test row leaked into a training pool")


def _synth_count(cfg, train) -> int:
    if cfg.synth_per_class is not None:
        return int(cfg.synth_per_class)
    return int(train.class_indices(MAJORITY).size)


def _run_pipeline(data, cfg: PipelineConfig, mode, seed) -> CellArtifacts:
    train, test = stratified_split(
        data, SplitSpec(seed=seed, test_per_class=cfg.test_per_class))
    n_synth = _synth_count(cfg, train)
    overlap_cfg = replace(cfg.overlap, seed=child_seed(seed, "overlap"))
    ternary = None
    result = None
    degenerate = False

    if mode == MODE_ORD:
        det = OverlapDetector(tau=overlap_cfg.tau, k_folds=overlap_cfg.k_folds,
                              n_trees=overlap_cfg.n_trees, seed=overlap_cfg.seed,
                              strict=overlap_cfg.strict,
                              max_depth=overlap_cfg.max_depth,
                              min_leaf=overlap_cfg.min_leaf)
        det.fit(train)
        ternary, result = det.transform(train)
        gen = _make_generator(cfg, ternary, seed)
        s0 = gen.sample(MAJORITY, n_synth, child_seed(seed, "generator-sample"))
        s1 = gen.sample(MINORITY, n_synth, child_seed(seed, "generator-sample"))
        synthetic = s0.concat(s1)
    elif mode == MODE_BASELINE:
        gen = _make_generator(cfg, train, seed)
        s0 = gen.sample(MAJORITY, n_synth, child_seed(seed, "generator-sample"))
        s1 = gen.sample(MINORITY, n_synth, child_seed(seed, "generator-sample"))
        synthetic = s0.concat(s1)
    elif mode == MODE_ORD_AFTER:
        gen = _make_generator(cfg, train, seed)
        s0 = gen.sample(MAJORITY, n_synth, child_seed(seed, "generator-sample"))
        s1 = gen.sample(MINORITY, n_synth, child_seed(seed, "generator-sample"))
        pool_binary = s0.concat(s1)
        det = OverlapDetector(tau=overlap_cfg.tau, k_folds=overlap_cfg.k_folds,
                              n_trees=overlap_cfg.n_trees, seed=overlap_cfg.seed,
                              strict=overlap_cfg.strict,
                              max_depth=overlap_cfg.max_depth,
                              min_leaf=overlap_cfg.min_leaf)
        det.fit(pool_binary)
        relabeled, result = det.transform(pool_binary)
        keep = np.nonzero(relabeled.y != OVERLAP)[0]
        if not (relabeled.y[keep] == MAJORITY).any():
            degenerate = True
            warnings.warn(f"mode {mode}, seed {seed}: every synthetic majority "
                          f"row fell in the overlap region", RuntimeWarning)
        synthetic = relabeled.subset(keep).with_labels(
            relabeled.y[keep], BINARY) if keep.size else relabeled.subset(keep)
    else:
        raise ExperimentError(f"unknown mode {mode!r}")

    pool = synthetic
    if cfg.augment_real_minority:
        d1 = train.subset(train.class_indices(MINORITY))
        pool = synthetic.concat(d1) if synthetic.n_rows else d1
    _check_hygiene(train, test, pool)
    if len(pool.label_counts()) < 2:
        degenerate = True
        warnings.warn(f"mode {mode}, seed {seed}: training pool is not "
                      f"two-class", RuntimeWarning)
    return CellArtifacts(mode=mode, seed=seed, train=train, test=test,
                         ternary=ternary, overlap_result=result,
                         synthetic=synthetic, pool=pool, degenerate=degenerate)


def _evaluate(adapter, test) -> dict:
    proba = adapter.predict_proba(test)[:, 1]
    pred = (proba >= 0.5).astype(np.int64)
    m = classification_metrics(confusion(test.y, pred))
    return {
        "minority_acc": m.minority_acc,
        "majority_acc": m.majority_acc,
        "macro_acc": m.macro_acc,
        "f1": m.f1,
        "auc": auc_score(test.y, proba),
    }


def _run_cell_group(data, cfg, mode, seed) -> tuple:
    """One (mode, seed) pipeline evaluated under every classifier."""
    try:
        art = _run_pipeline(data, cfg, mode, seed)
    except Exception as exc:
        raise ExperimentError(
            f"cell (mode={mode}, classifier=*, seed={seed}): {exc}") from exc
    cells = []
    for kind in cfg.classifiers:
        try:
            adapter = ClassifierAdapter(
                kind=kind, seed=child_seed(seed, "classifier", kind),
                params=cfg.classifier_params.get(kind))
            adapter.fit(art.pool)
            scores = _evaluate(adapter, art.test)
        except Exception as exc:
            raise ExperimentError(
                f"cell (mode={mode}, classifier={kind}, seed={seed}): {exc}") from exc
        cells.append(CellMetrics(mode=mode, classifier=kind, seed=seed, **scores))
    gen_score = None
    if cfg.world is not None and art.synthetic is not None and art.synthetic.n_rows:
        gen_score = GeneratorScore(
            mode=mode, seed=seed,
            score=score_synthetic(art.synthetic, cfg.world, cfg.oracle_priors))
    return cells, gen_score, art


def run_efficacy(data: TabularDataset, cfg: PipelineConfig, threads=None,
                 keep_artifacts=False) -> EvalReport:
    """Train-on-synthetic / evaluate-on-real over the configured grid."""
    jobs = [(mode, seed) for mode in cfg.modes for seed in cfg.seeds]
    n_threads = resolve_threads(threads)
    results = {}
    if n_threads == 1:
        for mode, seed in jobs:
            results[(mode, seed)] = _run_cell_group(data, cfg, mode, seed)
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            futures = {key: pool.submit(_run_cell_group, data, cfg, *key)
                       for key in jobs}
            for key, fut in futures.items():
                results[key] = fut.result()
    report = EvalReport()
    for mode in cfg.modes:
        for seed in cfg.seeds:
            cells, gen_score, art = results[(mode, seed)]
            report.cells.extend(cells)
            if gen_score is not None:
                report.generator_scores.append(gen_score)
            if keep_artifacts:
                report.artifacts.append(art)
    return report


# ---------------------------------------------------------------------------
# Ablations


ARM_REAL_FULL = "real_full"
ARM_REAL_NO_OVERLAP = "real_no_overlap"


def ablate_overlap_removal(data: TabularDataset, cfg: PipelineConfig,
                           keep_artifacts=False) -> EvalReport:
    """Real-data arms: train on all rows vs on rows outside the overlap."""
    report = EvalReport()
    for seed in cfg.seeds:
        train, test = stratified_split(
            data, SplitSpec(seed=seed, test_per_class=cfg.test_per_class))
        overlap_cfg = replace(cfg.overlap, seed=child_seed(seed, "overlap"))
        det = OverlapDetector(tau=overlap_cfg.tau, k_folds=overlap_cfg.k_folds,
                              n_trees=overlap_cfg.n_trees, seed=overlap_cfg.seed,
                              strict=overlap_cfg.strict,
                              max_depth=overlap_cfg.max_depth,
                              min_leaf=overlap_cfg.min_leaf).fit(train)
        ternary, result = det.transform(train)
        keep = np.nonzero(ternary.y != OVERLAP)[0]
        removed = train.subset(keep)
        _check_hygiene(train, test, removed)
        for arm, pool in ((ARM_REAL_FULL, train), (ARM_REAL_NO_OVERLAP, removed)):
            for kind in cfg.classifiers:
                try:
                    adapter = ClassifierAdapter(
                        kind=kind, seed=child_seed(seed, "classifier", kind))
                    adapter.fit(pool)
                    scores = _evaluate(adapter, test)
                except Exception as exc:
                    raise ExperimentError(
                        f"cell (mode={arm}, classifier={kind}, seed={seed}): "
                        f"{exc}") from exc
                report.cells.append(CellMetrics(mode=arm, classifier=kind,
                                                seed=seed, **scores))
        if keep_artifacts:
            report.artifacts.append(CellArtifacts(
                mode=ARM_REAL_NO_OVERLAP, seed=seed, train=train, test=test,
                ternary=ternary, overlap_result=result, synthetic=None,
                pool=removed))
    return report


def ablate_before_after(data: TabularDataset, cfg: PipelineConfig,
                        threads=None) -> EvalReport:
    """Relabel-then-synthesize vs synthesize-then-filter."""
    cfg2 = replace(cfg, modes=(MODE_ORD, MODE_ORD_AFTER))
    return run_efficacy(data, cfg2, threads=threads)


ARM_SYNTH_ONLY = "synth_only"
ARM_PLUS_MINORITY = "synth_plus_minority"
ARM_PLUS_MAJORITY = "synth_plus_minority_majority"


def ablate_augmentation(data: TabularDataset, cfg: PipelineConfig,
                        include_majority_arm=False) -> EvalReport:
    """Augmentation arms sharing one detection+synthesis per seed."""
    report = EvalReport()
    arms = [ARM_SYNTH_ONLY, ARM_PLUS_MINORITY]
    if include_majority_arm:
        arms.append(ARM_PLUS_MAJORITY)
    for seed in cfg.seeds:
        base_cfg = replace(cfg, augment_real_minority=False)
        art = _run_pipeline(data, base_cfg, MODE_ORD, seed)
        d1 = art.train.subset(art.train.class_indices(MINORITY))
        pools = {ARM_SYNTH_ONLY: art.synthetic,
                 ARM_PLUS_MINORITY: art.synthetic.concat(d1)}
        if include_majority_arm:
            d0 = art.train.class_indices(MAJORITY)
            rng = child_rng(seed, "augment-majority")
            take = max(1, int(round(cfg.augment_majority_fraction * d0.size)))
            pick = np.sort(rng.permutation(d0.size)[:take])
            pools[ARM_PLUS_MAJORITY] = pools[ARM_PLUS_MINORITY].concat(
                art.train.subset(d0[pick]))
        for arm in arms:
            pool = pools[arm]
            if pool.n_rows == 0:
                warnings.warn(f"arm {arm}, seed {seed}: empty training pool, "
                              f"skipped", RuntimeWarning)
                continue
            _check_hygiene(art.train, art.test, pool)
            for kind in cfg.classifiers:
                try:
                    adapter = ClassifierAdapter(
                        kind=kind, seed=child_seed(seed, "classifier", kind))
                    adapter.fit(pool)
                    scores = _evaluate(adapter, art.test)
                except Exception as exc:
                    raise ExperimentError(
                        f"cell (mode={arm}, classifier={kind}, seed={seed}): "
                        f"{exc}") from exc
                report.cells.append(CellMetrics(mode=arm, classifier=kind,
                                                seed=seed, **scores))
    return report


# ---------------------------------------------------------------------------
# Scaling benchmark


@dataclass(frozen=True)
class BenchResult:
    n_samples: int
    n_features: int
    seconds: float


def bench_overlap(n_samples: int, n_features: int, seed: int = 0,
                  overlap_cfg: OverlapConfig | None = None) -> BenchResult:
    """Wall time of detection alone on synthetic Gaussian data.

    The fixture is 98% majority at the origin and 2% minority offset by
    two units, both isotropic, so the forests face a realistic partial
    overlap.
    """
    rng = child_rng(seed, "bench-data")
    n_min = max(2, int(round(0.02 * n_samples)))
    n_maj = n_samples - n_min
    offset = 2.0 / np.sqrt(n_features)
    X = np.concatenate([
        rng.standard_normal((n_maj, n_features)),
        rng.standard_normal((n_min, n_features)) + offset,
    ])
    y = np.concatenate([np.zeros(n_maj, np.int64), np.ones(n_min, np.int64)])
    columns = [ColumnSchema(f"f{j}", NUMERIC) for j in range(n_features)]
    data = TabularDataset(columns, "label", X, y)
    cfg = overlap_cfg or OverlapConfig(seed=child_seed(seed, "overlap"))
    det = OverlapDetector(tau=cfg.tau, k_folds=cfg.k_folds, n_trees=cfg.n_trees,
                          seed=cfg.seed, strict=cfg.strict,
                          max_depth=cfg.max_depth, min_leaf=cfg.min_leaf)
    start = time.perf_counter()
    det.fit(data)
    det.transform(data)
    seconds = time.perf_counter() - start
    return BenchResult(n_samples=n_samples, n_features=n_features,
                       seconds=seconds)


# ---------------------------------------------------------------------------
# Report emission


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def cells_csv_text(report: EvalReport) -> str:
    lines = ["mode,classifier,seed,minority_acc,majority_acc,macro_acc,f1,auc"]
    for c in report.cells:
        lines.append(",".join([c.mode, c.classifier, str(c.seed),
                               _fmt(c.minority_acc), _fmt(c.majority_acc),
                               _fmt(c.macro_acc), _fmt(c.f1), _fmt(c.auc)]))
    return "\n".join(lines) + "\n"


def report_md_text(report: EvalReport) -> str:
    modes = []
    for c in report.cells:
        if c.mode not in modes:
            modes.append(c.mode)
    classifiers = []
    for c in report.cells:
        if c.classifier not in classifiers:
            classifiers.append(c.classifier)
    lines = ["# Efficacy report", "",
             "Macro accuracy, mean over seeds (sample sd in parentheses).", "",
             "| Training data | Avg of 4 | " + GBDT_COLUMN + " |",
             "|---|---|---|"]
    for mode in modes:
        try:
            avg4 = f"{report.avg_of_4(mode):.4f}"
        except KeyError:
            avg4 = "-"
        if "gbdt" in classifiers:
            m, s = report.aggregate(mode, "gbdt")
            gb = f"{m:.4f} ({s:.4f})"
        else:
            gb = "-"
        lines.append(f"| {mode} | {avg4} | {gb} |")
    lines += ["", "## Per-classifier macro accuracy", "",
              "| mode | classifier | mean | sd |", "|---|---|---|---|"]
    for mode in modes:
        for kind in classifiers:
            try:
                m, s = report.aggregate(mode, kind)
            except KeyError:
                continue
            lines.append(f"| {mode} | {kind} | {m:.4f} | {s:.4f} |")
    if report.generator_scores:
        lines += ["", "## Synthetic label quality (closed-form oracle)", "",
                  "| mode | seed | minority acc | majority acc | weighted | macro |",
                  "|---|---|---|---|---|---|"]
        for g in report.generator_scores:
            s = g.score
            def cell(v):
                return f"{v:.4f}" if v is not None else "-"
            lines.append(f"| {g.mode} | {g.seed} | {cell(s.minority_acc)} | "
                         f"{cell(s.majority_acc)} | {cell(s.weighted_avg)} | "
                         f"{cell(s.macro_avg)} |")
    return "\n".join(lines) + "\n"


def emit_report(report: EvalReport, out_dir) -> dict:
    """Write cells.csv and report.md; returns the paths."""
    if not report.cells:
        raise DataError("report has no cells to emit")
    os.makedirs(out_dir, exist_ok=True)
    cells_path = os.path.join(out_dir, "cells.csv")
    md_path = os.path.join(out_dir, "report.md")
    with open(cells_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(cells_csv_text(report))
    with open(md_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(report_md_text(report))
    return {"cells": cells_path, "report": md_path}
