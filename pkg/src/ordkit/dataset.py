"""Typed tabular data container, schema handling, CSV I/O, and encodings.

A :class:`TabularDataset` stores every cell in a single float64 matrix:
numeric columns hold their values, categorical columns hold the integer
index of the cell's category in the column's category list. The reserved
index ``UNKNOWN_CATEGORY`` (-1) marks a category that was not present in
the reference schema; its one-hot block is all zeros.

Labels are integers from the binary alphabet {0, 1} or, after overlap
detection, the ternary alphabet {0, 1, 2}:

    0 = majority (binary) / clear majority (ternary)
    1 = minority
    2 = overlapping majority (ternary only)

Missing values are not supported: an empty numeric cell is a load error.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, SchemaError
from .rng import child_rng

NUMERIC = "numeric"
CATEGORICAL = "categorical"

BINARY = "binary"
TERNARY = "ternary"

MAJORITY = 0
MINORITY = 1
OVERLAP = 2

UNKNOWN_CATEGORY = -1

ORD_LABEL_COLUMN = "ord_label"

_LABEL_VALUES = {BINARY: (0, 1), TERNARY: (0, 1, 2)}


@dataclass(frozen=True)
class ColumnSchema:
    """One feature column: a name, a kind, and (if categorical) its categories."""

    name: str
    kind: str
    categories: tuple = ()

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"unknown column kind {self.kind!r}", column=self.name)
        if self.kind == CATEGORICAL:
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError("duplicate categories", column=self.name)
        elif self.categories:
            raise SchemaError("numeric column cannot list categories", column=self.name)

    @property
    def n_categories(self) -> int:
        return len(self.categories)


@dataclass(frozen=True)
class SchemaSpec:
    """Parsed schema file: declared columns, target column, positive label."""

    columns: tuple          # of (name, kind) pairs
    target: str
    positive_label: str

    @property
    def feature_names(self):
        return [name for name, _ in self.columns]


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic stratified train/test split request."""

    seed: int
    test_per_class: int
    stratified: bool = True


def load_schema(path) -> SchemaSpec:
    """Load and validate a schema JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read schema: {exc}", path=str(path)) from exc
    for key in ("columns", "target"):
        if key not in raw:
            raise SchemaError(f"schema missing {key!r} key", path=str(path))
    columns = []
    for i, col in enumerate(raw["columns"]):
        if "name" not in col or "kind" not in col:
            raise SchemaError(f"column entry {i} needs 'name' and 'kind'", path=str(path))
        kind = col["kind"].lower()
        if kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"unknown kind {col['kind']!r}", column=col["name"], path=str(path))
        columns.append((col["name"], kind))
    names = [n for n, _ in columns]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate column names", path=str(path))
    target = raw["target"]
    if target in names:
        raise SchemaError("target must not be listed among feature columns", column=target, path=str(path))
    return SchemaSpec(columns=tuple(columns), target=target,
                      positive_label=str(raw.get("positive_label", "1")))


class TabularDataset:
    """Immutable rows of mixed numeric/categorical features plus labels.

    Parameters
    ----------
    columns : sequence of ColumnSchema
    target_name : str
    X : (n, p) float64 matrix of cells (numeric value or category index)
    y : (n,) integer labels from the declared alphabet
    label_kind : "binary" or "ternary"
    positive_label : display string of class 1 in CSV output
    negative_label : display string of class 0 in CSV output
    row_ids : provenance identifiers; real rows keep their original index,
        synthetic rows carry -1
    """

    def __init__(self, columns, target_name, X, y, *, label_kind=BINARY,
                 positive_label="1", negative_label="0", row_ids=None):
        self.columns = tuple(columns)
        self.target_name = target_name
        self.label_kind = label_kind
        self.positive_label = positive_label
        self.negative_label = negative_label
        X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
        if X.ndim != 2:
            X = X.reshape(len(X), -1) if len(X) else X.reshape(0, len(self.columns))
        y = np.asarray(y, dtype=np.int64)
        if X.shape[0] != y.shape[0]:
            raise DataError(f"{X.shape[0]} rows but {y.shape[0]} labels")
        if X.shape[1] != len(self.columns):
            raise DataError(f"{X.shape[1]} cells per row but {len(self.columns)} schema columns")
        if row_ids is None:
            row_ids = np.arange(X.shape[0], dtype=np.int64)
        row_ids = np.asarray(row_ids, dtype=np.int64)
        if row_ids.shape[0] != X.shape[0]:
            raise DataError("row_ids length mismatch")
        self._validate(X, y)
        for arr in (X, y, row_ids):
            arr.setflags(write=False)
        self.X = X
        self.y = y
        self.row_ids = row_ids

    def _validate(self, X, y):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in dataset schema")
        allowed = _LABEL_VALUES.get(self.label_kind)
        if allowed is None:
            raise DataError(f"unknown label kind {self.label_kind!r}")
        if y.size and not np.isin(y, allowed).all():
            bad = sorted(set(y.tolist()) - set(allowed))
            raise DataError(f"labels {bad} outside the {self.label_kind} alphabet")
        for j, col in enumerate(self.columns):
            if col.kind != CATEGORICAL or X.shape[0] == 0:
                continue
            idx = X[:, j]
            ok = (idx == np.floor(idx)) & (idx >= UNKNOWN_CATEGORY) & (idx < col.n_categories)
            if not ok.all():
                r = int(np.nonzero(~ok)[0][0])
                raise DataError("categorical index out of range", row=r, column=col.name)

    # -- basic views ---------------------------------------------------------

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def feature_names(self):
        return [c.name for c in self.columns]

    @property
    def numeric_indices(self):
        return [j for j, c in enumerate(self.columns) if c.kind == NUMERIC]

    @property
    def categorical_indices(self):
        return [j for j, c in enumerate(self.columns) if c.kind == CATEGORICAL]

    def features(self) -> np.ndarray:
        """The raw cell matrix (categoricals as ordinal indices): tree view."""
        return self.X

    def label_counts(self) -> dict:
        values, counts = np.unique(self.y, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def class_indices(self, label) -> np.ndarray:
        return np.nonzero(self.y == label)[0]

    # -- derivation ----------------------------------------------------------

    def subset(self, indices) -> "TabularDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return TabularDataset(self.columns, self.target_name,
                              self.X[indices], self.y[indices],
                              label_kind=self.label_kind,
                              positive_label=self.positive_label,
                              negative_label=self.negative_label,
                              row_ids=self.row_ids[indices])

    def with_labels(self, y, label_kind) -> "TabularDataset":
        return TabularDataset(self.columns, self.target_name, self.X, y,
                              label_kind=label_kind,
                              positive_label=self.positive_label,
                              negative_label=self.negative_label,
                              row_ids=self.row_ids)

    def with_rows(self, X, y, *, row_ids=None) -> "TabularDataset":
        """A new dataset over the same schema (used by generators)."""
        if row_ids is None:
            row_ids = np.full(len(X), -1, dtype=np.int64)
        kind = TERNARY if (len(y) and np.max(y) > 1) else self.label_kind
        return TabularDataset(self.columns, self.target_name, X, y,
                              label_kind=kind,
                              positive_label=self.positive_label,
                              negative_label=self.negative_label,
                              row_ids=row_ids)

    def concat(self, *others) -> "TabularDataset":
        parts = (self,) + others
        for d in parts[1:]:
            if d.columns != self.columns:
                raise DataError("cannot concatenate datasets with different schemas")
        kind = TERNARY if any(d.label_kind == TERNARY for d in parts) else BINARY
        return TabularDataset(self.columns, self.target_name,
                              np.concatenate([d.X for d in parts]),
                              np.concatenate([d.y for d in parts]),
                              label_kind=kind,
                              positive_label=self.positive_label,
                              negative_label=self.negative_label,
                              row_ids=np.concatenate([d.row_ids for d in parts]))

    def __repr__(self):
        return (f"TabularDataset(rows={self.n_rows}, features={self.n_features}, "
                f"labels={self.label_counts()}, kind={self.label_kind})")


# -- CSV ingestion / emission -------------------------------------------------

def _parse_rows(path):
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read CSV: {exc}", path=str(path)) from exc
    if not rows:
        raise DataError("CSV has no header row", path=str(path))
    return rows[0], rows[1:]


def load_csv(path, schema, *, reference_columns=None) -> TabularDataset:
    """Load an RFC-4180 CSV against a schema.

    ``schema`` is a :class:`SchemaSpec` or a path to a schema JSON file.
    Categorical category lists are built from the data in first-seen order
    unless ``reference_columns`` (a fitted dataset's schema) is given, in
    which case unseen values map to the reserved unknown index.

    A trailing ``ord_label`` column, when present, supplies ternary labels
    and takes precedence over the declared target column.
    """
    if not isinstance(schema, SchemaSpec):
        schema = load_schema(schema)
    header, records = _parse_rows(path)
    col_pos = {}
    for name, _ in schema.columns:
        if name not in header:
            raise DataError(f"missing column {name!r}", column=name, path=str(path))
        col_pos[name] = header.index(name)

    ternary = ORD_LABEL_COLUMN in header
    if ternary:
        target_pos = header.index(ORD_LABEL_COLUMN)
    else:
        if schema.target not in header:
            raise DataError(f"missing target column {schema.target!r}",
                            column=schema.target, path=str(path))
        target_pos = header.index(schema.target)

    ref = None
    if reference_columns is not None:
        ref = {c.name: c for c in reference_columns}
    cat_maps = {}
    cat_lists = {}
    for name, kind in schema.columns:
        if kind != CATEGORICAL:
            continue
        if ref is not None:
            cats = list(ref[name].categories)
        else:
            cats = []
        cat_lists[name] = cats
        cat_maps[name] = {c: i for i, c in enumerate(cats)}

    n = len(records)
    X = np.empty((n, len(schema.columns)), dtype=np.float64)
    y = np.empty(n, dtype=np.int64)
    negative_label = "0"
    saw_negative = False
    for r, rec in enumerate(records):
        if len(rec) != len(header):
            raise DataError(f"expected {len(header)} fields, found {len(rec)}",
                            row=r, path=str(path))
        for j, (name, kind) in enumerate(schema.columns):
            cell = rec[col_pos[name]]
            if kind == NUMERIC:
                try:
                    X[r, j] = float(cell)
                except ValueError:
                    raise DataError(f"unparseable numeric cell {cell!r}",
                                    row=r, column=name, path=str(path)) from None
            else:
                idx = cat_maps[name].get(cell)
                if idx is None:
                    if ref is not None:
                        idx = UNKNOWN_CATEGORY
                    else:
                        idx = len(cat_lists[name])
                        cat_lists[name].append(cell)
                        cat_maps[name][cell] = idx
                X[r, j] = idx
        cell = rec[target_pos]
        if ternary:
            if cell not in ("0", "1", "2"):
                raise DataError(f"unknown {ORD_LABEL_COLUMN} value {cell!r}",
                                row=r, column=ORD_LABEL_COLUMN, path=str(path))
            y[r] = int(cell)
        else:
            y[r] = 1 if cell == schema.positive_label else 0
            if y[r] == 0 and not saw_negative:
                negative_label = cell
                saw_negative = True

    columns = []
    for name, kind in schema.columns:
        if kind == CATEGORICAL:
            columns.append(ColumnSchema(name, CATEGORICAL, tuple(cat_lists[name])))
        else:
            columns.append(ColumnSchema(name, NUMERIC))
    return TabularDataset(columns, schema.target, X, y,
                          label_kind=TERNARY if ternary else BINARY,
                          positive_label=schema.positive_label,
                          negative_label=negative_label)


def _format_cell(dataset, r, j):
    col = dataset.columns[j]
    v = dataset.X[r, j]
    if col.kind == NUMERIC:
        return repr(float(v))
    idx = int(v)
    if idx == UNKNOWN_CATEGORY:
        return ""
    return col.categories[idx]


def write_csv(dataset: TabularDataset, path) -> None:
    """Emit the dataset as CSV.

    Binary datasets write the original target column; ternary datasets
    write the feature columns plus a trailing ``ord_label`` column holding
    the ternary encoding.
    """
    target = ORD_LABEL_COLUMN if dataset.label_kind == TERNARY else dataset.target_name
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(dataset.feature_names + [target])
        for r in range(dataset.n_rows):
            row = [_format_cell(dataset, r, j) for j in range(dataset.n_features)]
            if dataset.label_kind == TERNARY:
                row.append(str(int(dataset.y[r])))
            else:
                row.append(dataset.positive_label if dataset.y[r] == 1
                           else dataset.negative_label)
            writer.writerow(row)


def write_schema(dataset: TabularDataset, path) -> None:
    """Emit a schema JSON file matching the dataset."""
    doc = {
        "columns": [{"name": c.name, "kind": c.kind} for c in dataset.columns],
        "target": dataset.target_name,
        "positive_label": dataset.positive_label,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# -- splitting ----------------------------------------------------------------

def stratified_split(dataset: TabularDataset, spec: SplitSpec):
    """Hold out exactly ``test_per_class`` rows of each class.

    Returns ``(train, test)``. Deterministic in ``spec.seed``; the held-out
    and remaining index sets partition the rows.
    """
    rng = child_rng(spec.seed, "split")
    test_idx = []
    for label in sorted(_LABEL_VALUES[dataset.label_kind]):
        rows = dataset.class_indices(label)
        if dataset.label_kind == TERNARY and label == OVERLAP and rows.size == 0:
            continue
        if spec.test_per_class > rows.size:
            raise DataError(f"class {label} has {rows.size} rows, "
                            f"cannot hold out {spec.test_per_class}")
        take = rng.permutation(rows.size)[: spec.test_per_class]
        test_idx.append(rows[np.sort(take)])
    test_idx = np.sort(np.concatenate(test_idx)) if test_idx else np.empty(0, np.int64)
    mask = np.ones(dataset.n_rows, dtype=bool)
    mask[test_idx] = False
    train_idx = np.nonzero(mask)[0]
    return dataset.subset(train_idx), dataset.subset(test_idx)


# -- standardization / one-hot -------------------------------------------------

class Standardizer:
    """Per-numeric-column centering and scaling, population-sd convention.

    The population standard deviation (divide by n) is used so single-row
    datasets never divide by zero; columns with zero variance are centered
    and given scale 1. Categorical columns pass through untouched. The
    fitted table transforms new rows of the same schema identically.
    """

    def __init__(self):
        self.means_ = None
        self.scales_ = None
        self.columns_ = None

    def fit(self, dataset: TabularDataset) -> "Standardizer":
        if dataset.n_rows == 0:
            raise DataError("cannot standardize an empty dataset")
        self.columns_ = dataset.columns
        num = dataset.numeric_indices
        self.means_ = np.zeros(dataset.n_features)
        self.scales_ = np.ones(dataset.n_features)
        if num:
            block = dataset.X[:, num]
            self.means_[num] = block.mean(axis=0)
            sd = block.std(axis=0)          # population convention
            sd[sd == 0.0] = 1.0
            self.scales_[num] = sd
        return self

    def transform(self, dataset: TabularDataset) -> TabularDataset:
        if self.columns_ is None:
            raise DataError("Standardizer not fitted")
        if dataset.columns != self.columns_:
            raise SchemaError("dataset schema differs from the fitted schema")
        X = dataset.X.copy()
        num = dataset.numeric_indices
        if num:
            X[:, num] = (X[:, num] - self.means_[num]) / self.scales_[num]
        return dataset.with_rows(X, dataset.y, row_ids=dataset.row_ids)

    def fit_transform(self, dataset: TabularDataset) -> TabularDataset:
        return self.fit(dataset).transform(dataset)

    def to_json(self) -> dict:
        return {
            "convention": "population_sd",
            "columns": [c.name for c in self.columns_],
            "means": self.means_.tolist(),
            "scales": self.scales_.tolist(),
        }


def standardize(dataset: TabularDataset):
    """Standardize numeric columns; returns ``(dataset, fitted Standardizer)``."""
    table = Standardizer().fit(dataset)
    return table.transform(dataset), table


def one_hot(dataset: TabularDataset) -> np.ndarray:
    """Expand each categorical column of c categories into c indicators.

    Numeric columns pass through in place. The unknown index contributes an
    all-zero indicator block.
    """
    blocks = []
    for j, col in enumerate(dataset.columns):
        if col.kind == NUMERIC:
            blocks.append(dataset.X[:, j:j + 1])
        else:
            idx = dataset.X[:, j].astype(np.int64)
            block = np.zeros((dataset.n_rows, col.n_categories))
            known = idx >= 0
            block[np.nonzero(known)[0], idx[known]] = 1.0
            blocks.append(block)
    if not blocks:
        return np.empty((dataset.n_rows, 0))
    return np.concatenate(blocks, axis=1)


def one_hot_width(columns) -> int:
    return sum(c.n_categories if c.kind == CATEGORICAL else 1 for c in columns)
