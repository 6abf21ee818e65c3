"""Parametric Gaussian-blob worlds and the closed-form posterior oracle.

A :class:`BlobWorld` is a known two-class mixture of isotropic Gaussians.
Because the class-conditional densities are available in closed form, any
generated point can be labeled exactly: label 1 iff
P(x | y=1) P(y=1) > P(x | y=0) P(y=0), ties to 0. All density work runs in
log space with log-sum-exp, so points far outside every component still
score correctly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dataset import BINARY, ColumnSchema, NUMERIC, TabularDataset
from .errors import DataError
from .rng import child_rng


@dataclass(frozen=True)
class BlobComponent:
    center: tuple
    sd: float
    count: int

    def __post_init__(self):
        if self.sd <= 0:
            raise DataError("component sd must be positive")
        if self.count <= 0:
            raise DataError("component count must be positive")


@dataclass(frozen=True)
class BlobWorld:
    """Per-class component lists plus class priors for the oracle."""

    majority: tuple      # of BlobComponent
    minority: tuple
    priors: tuple = (0.5, 0.5)

    def __post_init__(self):
        if abs(sum(self.priors) - 1.0) > 1e-9:
            raise DataError("priors must sum to 1")
        dims = {len(c.center) for c in self.majority + self.minority}
        if len(dims) != 1:
            raise DataError("all component centers must share a dimension")

    @property
    def dim(self) -> int:
        return len(self.majority[0].center)

    def components(self, label):
        return self.minority if label == 1 else self.majority

    @staticmethod
    def from_totals(majority_total, majority_blobs, minority_total,
                    minority_blobs, priors=(0.5, 0.5)) -> "BlobWorld":
        """Split each class total as evenly as possible across its blobs.

        ``*_blobs`` are (center, sd) pairs; the first ``total % n`` blobs
        absorb the remainder.
        """
        def split(total, blobs):
            n = len(blobs)
            base, extra = divmod(total, n)
            return tuple(BlobComponent(tuple(c), float(s),
                                       base + (1 if i < extra else 0))
                         for i, (c, s) in enumerate(blobs))
        return BlobWorld(majority=split(majority_total, majority_blobs),
                         minority=split(minority_total, minority_blobs),
                         priors=tuple(priors))


def blobs1() -> BlobWorld:
    """Four majority blobs (8000 points) against three minority blobs (500)."""
    return BlobWorld.from_totals(
        8000, [((-30, -30), 3), ((20, 40), 4), ((0, 0), 10), ((40, -50), 6)],
        500, [((0, -30), 4), ((25, 20), 6), ((20, -50), 4)])


def blobs2() -> BlobWorld:
    """Three majority blobs (7500 points) against two minority blobs (200)."""
    return BlobWorld.from_totals(
        7500, [((10, 10), 10), ((-30, -20), 8), ((40, -50), 4)],
        200, [((-30, 10), 10), ((20, -20), 4)])


NAMED_WORLDS = {"blobs1": blobs1, "blobs2": blobs2}


def load_world(path) -> BlobWorld:
    """World JSON: per class a blob list [{"center": [...], "sd": s,
    "count": n}] plus optional "priors"."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    def parse(cls):
        return tuple(BlobComponent(tuple(b["center"]), float(b["sd"]),
                                   int(b["count"])) for b in raw[cls])
    return BlobWorld(majority=parse("majority"), minority=parse("minority"),
                     priors=tuple(raw.get("priors", (0.5, 0.5))))


def world_to_json(world: BlobWorld) -> dict:
    def dump(comps):
        return [{"center": list(c.center), "sd": c.sd, "count": c.count}
                for c in comps]
    return {"majority": dump(world.majority), "minority": dump(world.minority),
            "priors": list(world.priors)}


def make_blobs(world: BlobWorld, seed: int) -> TabularDataset:
    """Draw the world's isotropic Gaussian components into a dataset."""
    rng = child_rng(seed, "make-blobs")
    rows = []
    labels = []
    for label in (0, 1):
        for comp in world.components(label):
            pts = np.asarray(comp.center) + comp.sd * \
                rng.standard_normal((comp.count, world.dim))
            rows.append(pts)
            labels.append(np.full(comp.count, label, dtype=np.int64))
    X = np.concatenate(rows)
    y = np.concatenate(labels)
    columns = [ColumnSchema(f"x{j}", NUMERIC) for j in range(world.dim)]
    return TabularDataset(columns, "label", X, y, label_kind=BINARY,
                          positive_label="1", negative_label="0")


def class_log_density(world: BlobWorld, X, label) -> np.ndarray:
    """log P(x | y=label) under the even-weight component mixture."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    comps = world.components(label)
    d = world.dim
    parts = np.empty((X.shape[0], len(comps)))
    for i, comp in enumerate(comps):
        diff = X - np.asarray(comp.center)
        quad = (diff * diff).sum(axis=1) / (comp.sd ** 2)
        parts[:, i] = -0.5 * (quad + d * math.log(2.0 * math.pi * comp.sd ** 2))
    m = parts.max(axis=1)
    return m + np.log(np.exp(parts - m[:, None]).sum(axis=1)) - math.log(len(comps))


def bayes_label(world: BlobWorld, X, priors=None):
    """Oracle labels and normalized posteriors for a batch of points.

    Returns ``(labels, posteriors)`` with posteriors of shape (n, 2). The
    decision is label 1 iff the weighted minority density strictly exceeds
    the weighted majority density; ties go to 0.
    """
    priors = world.priors if priors is None else tuple(priors)
    if min(priors) < 0:
        raise DataError("priors must be non-negative")
    log0 = class_log_density(world, X, 0) + math.log(priors[0])
    log1 = class_log_density(world, X, 1) + math.log(priors[1])
    labels = (log1 > log0).astype(np.int64)
    m = np.maximum(log0, log1)
    z = np.exp(log0 - m) + np.exp(log1 - m)
    post = np.column_stack([np.exp(log0 - m) / z, np.exp(log1 - m) / z])
    return labels, post


@dataclass(frozen=True)
class OracleScore:
    """Agreement between claimed labels and the oracle, per claimed class."""

    minority_acc: float | None
    majority_acc: float | None
    weighted_avg: float | None
    macro_avg: float | None
    n_minority: int
    n_majority: int


def score_synthetic(synthetic: TabularDataset, world: BlobWorld,
                    priors=None) -> OracleScore:
    """Fraction of rows whose claimed label the oracle confirms.

    Ternary label 2 counts as majority. The weighted average weighs the
    per-class accuracies by generated class counts; the macro average is
    their plain mean. A class with no generated rows reports None.
    """
    if synthetic.numeric_indices != list(range(synthetic.n_features)):
        raise DataError("oracle scoring requires an all-numeric schema")
    claimed = np.where(synthetic.y == 2, 0, synthetic.y)
    oracle, _ = bayes_label(world, synthetic.X, priors)
    accs = {}
    counts = {}
    for label in (0, 1):
        mask = claimed == label
        counts[label] = int(mask.sum())
        accs[label] = float((oracle[mask] == label).mean()) if counts[label] else None
    n0, n1 = counts[0], counts[1]
    weighted = None
    macro = None
    if accs[0] is not None and accs[1] is not None:
        weighted = (accs[0] * n0 + accs[1] * n1) / (n0 + n1)
        macro = (accs[0] + accs[1]) / 2.0
    elif accs[0] is not None:
        weighted = accs[0]
    elif accs[1] is not None:
        weighted = accs[1]
    return OracleScore(minority_acc=accs[1], majority_acc=accs[0],
                       weighted_avg=weighted, macro_avg=macro,
                       n_minority=n1, n_majority=n0)


def trained_oracle_score(synthetic: TabularDataset,
                         real_balanced: TabularDataset,
                         classifier="gbdt", seed=0) -> float:
    """Accuracy of claimed labels against a model trained on balanced real
    data. ``classifier`` is a kind name or a fitted-on-call adapter."""
    from .modeling import ClassifierAdapter
    if isinstance(classifier, str):
        adapter = ClassifierAdapter(kind=classifier, seed=seed)
    else:
        adapter = classifier
    adapter.fit(real_balanced)
    pred = adapter.predict(synthetic)
    claimed = np.where(synthetic.y == 2, 0, synthetic.y)
    return float((pred == claimed).mean())
