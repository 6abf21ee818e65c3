"""Class-conditional synthetic data sources.

Every generator follows the same contract: ``fit`` on a labeled dataset
(binary or ternary), then ``sample(label, n, seed)`` returns a dataset of
rows carrying that label and conforming to the training schema.

* :class:`GmmGenerator` - per-label Gaussian mixture with diagonal
  covariance over numeric columns and per-component categorical frequency
  tables; the shallow stand-in for heavyweight generative models.
* :class:`SmoteGenerator`, :class:`BorderlineSmoteGenerator`,
  :class:`AdasynGenerator` - nearest-neighbor interpolation baselines.
  Interpolation distance is Euclidean on standardized numerics plus 0/1
  mismatch on categoricals; categorical cells of a synthetic row are
  copied from its seed row.
* :class:`ExternalBridgeGenerator` - serves rows produced by an external
  tool from a CSV honoring the same ternary file contract.
"""

from __future__ import annotations

import threading
import warnings

import numpy as np
from sklearn.base import BaseEstimator

from .dataset import SchemaSpec, TabularDataset, load_csv, load_schema
from .errors import FitError, SamplingError
from .rng import child_rng

VAR_FLOOR = 1e-6


# ---------------------------------------------------------------------------
# Gaussian mixture stand-in


class _LabelGmm:
    """Mixture parameters for one label."""

    __slots__ = ("weights", "means", "variances", "cat_tables", "loglik_trace")

    def __init__(self, weights, means, variances, cat_tables, loglik_trace):
        self.weights = weights          # (K,)
        self.means = means              # (K, d_num)
        self.variances = variances      # (K, d_num), floored
        self.cat_tables = cat_tables    # per categorical column: (K, n_cats)
        self.loglik_trace = loglik_trace


def _log_gaussian(X, means, variances):
    """(n, K) log density matrix for diagonal Gaussians."""
    n, d = X.shape
    if d == 0:
        return np.zeros((n, means.shape[0]))
    diff = X[:, None, :] - means[None, :, :]
    quad = (diff * diff / variances[None, :, :]).sum(axis=2)
    norm = 0.5 * (d * np.log(2.0 * np.pi) + np.log(variances).sum(axis=1))
    return -0.5 * quad - norm[None, :]


def _logsumexp(a, axis):
    m = np.max(a, axis=axis, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=axis, keepdims=True))).squeeze(axis)


class GmmGenerator(BaseEstimator):
    """Per-label EM with diagonal covariance on numeric columns.

    Component means initialize from ``components`` distinct rows of the
    label; responsibilities from the numeric part also weight each
    component's categorical frequency tables. EM stops when the
    log-likelihood gain drops below ``tol`` or after ``max_iter`` rounds.

    ``clamp_components=True`` lowers the component count of a label to its
    row count instead of raising, which experiment pipelines use on tiny
    overlap classes.
    """

    def __init__(self, components=8, max_iter=200, tol=1e-6, seed=0,
                 var_floor=VAR_FLOOR, clamp_components=False):
        self.components = components
        self.max_iter = max_iter
        self.tol = tol
        self.seed = seed
        self.var_floor = var_floor
        self.clamp_components = clamp_components

    def fit(self, dataset: TabularDataset) -> "GmmGenerator":
        self.template_ = dataset
        self.num_idx_ = dataset.numeric_indices
        self.cat_idx_ = dataset.categorical_indices
        self.models_ = {}
        for label in sorted(dataset.label_counts()):
            rows = dataset.class_indices(label)
            k = self.components
            if rows.size < k:
                if not self.clamp_components:
                    raise FitError(f"label {label} has {rows.size} rows, "
                                   f"fewer than {k} components")
                k = rows.size
            rng = child_rng(self.seed, "gmm-fit", label)
            self.models_[int(label)] = self._fit_label(dataset, rows, k, rng)
        return self

    def _fit_label(self, dataset, rows, k, rng):
        Xn = dataset.X[rows][:, self.num_idx_]
        Xc = dataset.X[rows][:, self.cat_idx_].astype(np.int64)
        m, d = Xn.shape
        pick = rng.choice(m, size=k, replace=False)
        means = Xn[pick].copy()
        base_var = Xn.var(axis=0) if m > 1 else np.zeros(d)
        variances = np.tile(np.maximum(base_var, self.var_floor), (k, 1))
        weights = np.full(k, 1.0 / k)
        cat_cols = [dataset.columns[j] for j in self.cat_idx_]
        cat_tables = []
        for c, col in enumerate(cat_cols):
            counts = np.bincount(Xc[:, c][Xc[:, c] >= 0],
                                 minlength=col.n_categories).astype(np.float64)
            if counts.sum() == 0:
                counts[:] = 1.0
            cat_tables.append(np.tile(counts / counts.sum(), (k, 1)))

        def evaluate():
            logp = _log_gaussian(Xn, means, variances) + np.log(weights)[None, :]
            norm = _logsumexp(logp, axis=1)
            return float(norm.sum()), np.exp(logp - norm[:, None])

        trace = []
        prev = -np.inf
        converged = False
        for _ in range(self.max_iter):
            ll, resp = evaluate()
            trace.append(ll)
            if ll - prev < self.tol:
                converged = True
                break
            prev = ll
            nk = resp.sum(axis=0)
            safe = np.maximum(nk, 1e-12)
            weights = nk / m
            means = (resp.T @ Xn) / safe[:, None]
            sq = resp.T @ (Xn * Xn) / safe[:, None] - means * means
            variances = np.maximum(sq, self.var_floor)
            for c, col in enumerate(cat_cols):
                known = Xc[:, c] >= 0
                table = np.zeros((k, col.n_categories))
                if known.any():
                    r = resp[known]
                    vals = Xc[known, c]
                    for cat in range(col.n_categories):
                        table[:, cat] = r[vals == cat].sum(axis=0)
                mass = table.sum(axis=1, keepdims=True)
                flat = np.full(col.n_categories, 1.0 / col.n_categories)
                table = np.where(mass > 0, table / np.maximum(mass, 1e-12), flat)
                cat_tables[c] = table
        if not converged:
            # final evaluation so the trace tail reflects the final parameters
            ll, _ = evaluate()
            trace.append(ll)
        return _LabelGmm(weights, means, variances, cat_tables, trace)

    def labels(self):
        return sorted(self.models_)

    def loglik_trace(self, label):
        return list(self.models_[int(label)].loglik_trace)

    def sample(self, label, n, seed) -> TabularDataset:
        label = int(label)
        if label not in self.models_:
            raise SamplingError(f"label {label} was not present at fit time")
        model = self.models_[label]
        rng = child_rng(seed, "gmm-sample", label)
        k = model.weights.shape[0]
        comp = rng.choice(k, size=n, p=model.weights) if n else np.empty(0, np.int64)
        template = self.template_
        X = np.zeros((n, template.n_features))
        if n:
            noise = rng.standard_normal((n, len(self.num_idx_)))
            X[:, self.num_idx_] = model.means[comp] + noise * np.sqrt(model.variances[comp])
            for c, j in enumerate(self.cat_idx_):
                cum = np.cumsum(model.cat_tables[c][comp], axis=1)
                u = rng.random(n)
                X[:, j] = np.minimum((u[:, None] > cum).sum(axis=1),
                                     cum.shape[1] - 1)
        y = np.full(n, label, dtype=np.int64)
        return template.with_rows(X, y)


def fit_gmm(dataset: TabularDataset, components=8, seed=0, max_iter=200,
            tol=1e-6) -> GmmGenerator:
    """Fit the per-label mixture; raises when a label has too few rows."""
    return GmmGenerator(components=components, max_iter=max_iter, tol=tol,
                        seed=seed).fit(dataset)


def gmm_sample(generator: GmmGenerator, label, n, seed) -> TabularDataset:
    return generator.sample(label, n, seed)


# ---------------------------------------------------------------------------
# Nearest-neighbor interpolation family


def _scaled_numeric(X, num_idx, scales):
    return X[:, num_idx] / scales if num_idx else np.empty((X.shape[0], 0))


def _distance_sq(A, B, num_idx, cat_idx, scales):
    """Squared distance: scaled-Euclidean numerics + 0/1 categorical mismatch."""
    An = _scaled_numeric(A, num_idx, scales)
    Bn = _scaled_numeric(B, num_idx, scales)
    d = ((An * An).sum(axis=1)[:, None] + (Bn * Bn).sum(axis=1)[None, :]
         - 2.0 * An @ Bn.T)
    np.maximum(d, 0.0, out=d)
    for j in cat_idx:
        d += A[:, j][:, None] != B[:, j][None, :]
    return d


class _NeighborSpace:
    """Shared distance bookkeeping for the interpolation generators."""

    def __init__(self, dataset: TabularDataset):
        self.dataset = dataset
        self.num_idx = dataset.numeric_indices
        self.cat_idx = dataset.categorical_indices
        if self.num_idx:
            sd = dataset.X[:, self.num_idx].std(axis=0)
            sd[sd == 0.0] = 1.0
        else:
            sd = np.empty(0)
        self.scales = sd

    def knn_within(self, rows, k):
        """Indices (into ``rows``) of each row's k nearest same-set rows."""
        X = self.dataset.X[rows]
        d = _distance_sq(X, X, self.num_idx, self.cat_idx, self.scales)
        np.fill_diagonal(d, np.inf)
        k = min(k, rows.size - 1)
        if k <= 0:
            return np.empty((rows.size, 0), dtype=np.int64)
        return np.argsort(d, axis=1, kind="stable")[:, :k]

    def other_class_fraction(self, rows, labels, target_label, m):
        """Per row of ``rows``: count of non-target-label rows among its m
        nearest neighbors over the whole dataset (self excluded)."""
        X = self.dataset.X
        d = _distance_sq(X[rows], X, self.num_idx, self.cat_idx, self.scales)
        d[np.arange(rows.size), rows] = np.inf
        m = min(m, X.shape[0] - 1)
        near = np.argsort(d, axis=1, kind="stable")[:, :m]
        other = labels[near] != target_label
        return other.sum(axis=1), m


def _interpolate(dataset, seed_rows, nn_rows, lam):
    """Numeric cells move along the seed->neighbor segment; categorical
    cells copy from the seed row."""
    Xs = dataset.X[seed_rows].copy()
    num = dataset.numeric_indices
    if num:
        a = dataset.X[seed_rows][:, num]
        b = dataset.X[nn_rows][:, num]
        Xs[:, num] = a + lam[:, None] * (b - a)
    return Xs


class SmoteGenerator(BaseEstimator):
    """Convex combinations between a class row and one of its k nearest
    same-class neighbors."""

    def __init__(self, k_neighbors=5):
        self.k_neighbors = k_neighbors

    def fit(self, dataset: TabularDataset) -> "SmoteGenerator":
        if dataset.n_rows == 0:
            raise FitError("cannot fit on an empty dataset")
        self.space_ = _NeighborSpace(dataset)
        self.template_ = dataset
        return self

    def sample(self, label, n, seed) -> TabularDataset:
        label = int(label)
        rows = self.template_.class_indices(label)
        if rows.size == 0:
            raise SamplingError(f"no rows with label {label} to interpolate")
        rng = child_rng(seed, "smote", label)
        if n == 0:
            return self.template_.with_rows(
                np.empty((0, self.template_.n_features)),
                np.empty(0, dtype=np.int64))
        knn = self.space_.knn_within(rows, self.k_neighbors)
        pick = rng.integers(0, rows.size, size=n)
        if knn.shape[1] == 0:
            seeds = rows[pick]
            X = self.template_.X[seeds].copy()
        else:
            nn_choice = rng.integers(0, knn.shape[1], size=n)
            seeds = rows[pick]
            neighbors = rows[knn[pick, nn_choice]]
            lam = rng.random(n)
            X = _interpolate(self.template_, seeds, neighbors, lam)
        y = np.full(n, label, dtype=np.int64)
        return self.template_.with_rows(X, y)


class BorderlineSmoteGenerator(BaseEstimator):
    """SMOTE restricted to DANGER seeds.

    A class row is in DANGER when at least m/2 but fewer than m of its m
    nearest neighbors (over every class) belong to other classes. With an
    empty DANGER set, sampling warns and returns an empty batch; the
    ``danger_empty_`` attribute records the outcome of the last call.
    """

    def __init__(self, k_neighbors=5, m_neighbors=10):
        self.k_neighbors = k_neighbors
        self.m_neighbors = m_neighbors

    def fit(self, dataset: TabularDataset) -> "BorderlineSmoteGenerator":
        if dataset.n_rows == 0:
            raise FitError("cannot fit on an empty dataset")
        if self.m_neighbors < self.k_neighbors:
            raise FitError("m_neighbors must be at least k_neighbors")
        self.space_ = _NeighborSpace(dataset)
        self.template_ = dataset
        return self

    def danger_rows(self, label) -> np.ndarray:
        """Row positions of the DANGER set for one class."""
        label = int(label)
        rows = self.template_.class_indices(label)
        if rows.size == 0:
            return rows
        other, m = self.space_.other_class_fraction(
            rows, self.template_.y, label, self.m_neighbors)
        mask = (other >= m / 2.0) & (other < m)
        return rows[mask]

    def sample(self, label, n, seed) -> TabularDataset:
        label = int(label)
        rows = self.template_.class_indices(label)
        if rows.size == 0:
            raise SamplingError(f"no rows with label {label} to interpolate")
        danger = self.danger_rows(label)
        self.danger_empty_ = danger.size == 0
        empty = self.template_.with_rows(
            np.empty((0, self.template_.n_features)), np.empty(0, np.int64))
        if n == 0:
            return empty
        if self.danger_empty_:
            warnings.warn(f"label {label}: DANGER set is empty, returning an "
                          f"empty batch", RuntimeWarning, stacklevel=2)
            return empty
        rng = child_rng(seed, "borderline", label)
        knn = self.space_.knn_within(rows, self.k_neighbors)
        danger_pos = np.searchsorted(rows, danger)
        pick = danger_pos[rng.integers(0, danger_pos.size, size=n)]
        if knn.shape[1] == 0:
            X = self.template_.X[rows[pick]].copy()
        else:
            nn_choice = rng.integers(0, knn.shape[1], size=n)
            seeds = rows[pick]
            neighbors = rows[knn[pick, nn_choice]]
            lam = rng.random(n)
            X = _interpolate(self.template_, seeds, neighbors, lam)
        y = np.full(n, label, dtype=np.int64)
        return self.template_.with_rows(X, y)


class AdasynGenerator(BaseEstimator):
    """Interpolation with density-adaptive allocation.

    Each class row i gets weight r_i = (other-class neighbors among its k
    nearest) / k; row allocations are round(n * r_i / sum(r)). When every
    r_i is zero the allocation falls back to uniform. ``sample`` tops the
    rounded allocations up (or trims them) to exactly n rows; the
    module-level :func:`adasyn` keeps the raw rounded total.
    """

    def __init__(self, k_neighbors=5):
        self.k_neighbors = k_neighbors

    def fit(self, dataset: TabularDataset) -> "AdasynGenerator":
        if dataset.n_rows == 0:
            raise FitError("cannot fit on an empty dataset")
        self.space_ = _NeighborSpace(dataset)
        self.template_ = dataset
        return self

    def allocations(self, label, n_total):
        """Rounded per-row allocations following the adaptive rule."""
        label = int(label)
        rows = self.template_.class_indices(label)
        if rows.size == 0:
            raise SamplingError(f"no rows with label {label} to interpolate")
        other, m = self.space_.other_class_fraction(
            rows, self.template_.y, label, self.k_neighbors)
        r = other / m if m > 0 else np.zeros(rows.size)
        total = r.sum()
        if total == 0.0:
            rhat = np.full(rows.size, 1.0 / rows.size)
        else:
            rhat = r / total
        alloc = np.round(n_total * rhat).astype(np.int64)
        return rows, alloc, rhat

    def _synthesize(self, label, rows, alloc, rng):
        knn = self.space_.knn_within(rows, self.k_neighbors)
        pick = np.repeat(np.arange(rows.size), alloc)
        n = pick.size
        if n == 0:
            X = np.empty((0, self.template_.n_features))
        elif knn.shape[1] == 0:
            X = self.template_.X[rows[pick]].copy()
        else:
            nn_choice = rng.integers(0, knn.shape[1], size=n)
            seeds = rows[pick]
            neighbors = rows[knn[pick, nn_choice]]
            lam = rng.random(n)
            X = _interpolate(self.template_, seeds, neighbors, lam)
        y = np.full(n, int(label), dtype=np.int64)
        return self.template_.with_rows(X, y)

    def sample(self, label, n, seed) -> TabularDataset:
        rows, alloc, rhat = self.allocations(label, n)
        order = np.argsort(-rhat, kind="stable")
        i = 0
        while alloc.sum() < n:
            alloc[order[i % order.size]] += 1
            i += 1
        i = 0
        while alloc.sum() > n:
            j = order[order.size - 1 - (i % order.size)]
            if alloc[j] > 0:
                alloc[j] -= 1
            i += 1
        rng = child_rng(seed, "adasyn", int(label))
        return self._synthesize(label, rows, alloc, rng)


def smote(minority: TabularDataset, n, seed, k_neighbors=5) -> TabularDataset:
    """Classic interpolation over a single-class dataset."""
    labels = sorted(minority.label_counts())
    if len(labels) != 1:
        raise FitError("smote() expects rows of a single class")
    gen = SmoteGenerator(k_neighbors=k_neighbors).fit(minority)
    return gen.sample(labels[0], n, seed)


def borderline_smote(dataset: TabularDataset, n, seed, k_neighbors=5,
                     m_neighbors=10, label=1) -> TabularDataset:
    gen = BorderlineSmoteGenerator(k_neighbors=k_neighbors,
                                   m_neighbors=m_neighbors).fit(dataset)
    return gen.sample(label, n, seed)


def adasyn(dataset: TabularDataset, n_total, seed, k_neighbors=5,
           label=1) -> TabularDataset:
    """Adaptive allocation with raw rounding (total may differ from
    ``n_total`` by at most the class size)."""
    gen = AdasynGenerator(k_neighbors=k_neighbors).fit(dataset)
    rows, alloc, _ = gen.allocations(label, n_total)
    rng = child_rng(seed, "adasyn", int(label))
    return gen._synthesize(label, rows, alloc, rng)


# ---------------------------------------------------------------------------
# External generator bridge


class ExternalBridgeGenerator(BaseEstimator):
    """Serves pre-generated rows from a synthetic CSV.

    The reference dataset (the ternary CSV handed to the external tool)
    fixes the schema and category lists; the synthetic CSV must conform.
    Draws are stratified and, by default, without replacement across the
    generator's lifetime so repeated experiment cells never silently reuse
    rows; exhaustion raises naming the shortfall.
    """

    def __init__(self, with_replacement=False):
        self.with_replacement = with_replacement

    def fit(self, reference: TabularDataset) -> "ExternalBridgeGenerator":
        self.template_ = reference
        self.pool_ = None
        self._lock = threading.Lock()
        return self

    def load_synthetic(self, synthetic: TabularDataset) -> "ExternalBridgeGenerator":
        if tuple(c.name for c in synthetic.columns) != \
           tuple(c.name for c in self.template_.columns):
            raise FitError("synthetic columns do not match the reference schema")
        if tuple(c.kind for c in synthetic.columns) != \
           tuple(c.kind for c in self.template_.columns):
            raise FitError("synthetic column kinds do not match the reference schema")
        self.synthetic_ = synthetic
        self.pool_ = {int(label): list(synthetic.class_indices(label))
                      for label in synthetic.label_counts()}
        self.totals_ = {k: len(v) for k, v in self.pool_.items()}
        return self

    def label_counts(self) -> dict:
        return dict(self.totals_)

    def sample(self, label, n, seed) -> TabularDataset:
        label = int(label)
        if self.pool_ is None:
            raise SamplingError("no synthetic file loaded")
        if label not in self.pool_:
            raise SamplingError(f"label {label} absent from the synthetic file")
        with self._lock:
            pool = self.pool_[label]
            if not self.with_replacement and n > len(pool):
                raise SamplingError(
                    f"label {label}: requested {n} rows but only {len(pool)} of "
                    f"{self.totals_[label]} remain")
            rng = child_rng(seed, "bridge", label)
            if self.with_replacement:
                take = [pool[i] for i in rng.integers(0, len(pool), size=n)]
            else:
                picked = rng.choice(len(pool), size=n, replace=False)
                picked_set = set(picked.tolist())
                take = [pool[i] for i in picked]
                self.pool_[label] = [r for i, r in enumerate(pool)
                                     if i not in picked_set]
        sub = self.synthetic_.subset(np.asarray(take, dtype=np.int64))
        return self.template_.with_rows(sub.X, np.full(len(take), label, np.int64))


def external_bridge(schema, ternary_csv, synthetic_csv,
                    with_replacement=False) -> ExternalBridgeGenerator:
    """Wire the file contract: reference ternary CSV in, synthetic CSV out."""
    spec = schema if isinstance(schema, SchemaSpec) else load_schema(schema)
    reference = load_csv(ternary_csv, spec)
    synthetic = load_csv(synthetic_csv, spec,
                         reference_columns=reference.columns)
    gen = ExternalBridgeGenerator(with_replacement=with_replacement)
    return gen.fit(reference).load_synthetic(synthetic)
