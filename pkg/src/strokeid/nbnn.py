"""Naive-Bayes Nearest-Neighbor classification over stroke-part templates.

Every training descriptor is kept verbatim as a template of its class.  A
query image (a bag of descriptors) is scored against class C by the
image-to-class distance: the sum over descriptors of the squared Euclidean
distance to their nearest template in C.  The predicted class is the argmin.
Optionally each template carries a discriminativeness weight w in [0, 1]
and contributes (1 - w) * distance instead, so distinctive templates cost
less when matched.

Nearest neighbors come either from exact brute-force search or from a
randomized kd-tree forest (see kdforest) with a bounded check budget.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .kdforest import DEFAULT_CHECKS, DEFAULT_TREES, KdForest

# queries per block in the brute-force distance matrices; bounds memory
_NN_CHUNK = 512


@dataclass
class ClassEntry:
    """One class: its label, template matrix (n, d) and per-template weights."""

    label: str
    templates: np.ndarray
    weights: np.ndarray

    @property
    def num_templates(self) -> int:
        return self.templates.shape[0]


@dataclass
class TemplateStore:
    """Ordered per-class template bags; class order breaks argmin ties."""

    classes: list[ClassEntry]

    @property
    def descriptor_dim(self) -> int:
        return self.classes[0].templates.shape[1]

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.classes]

    @property
    def num_templates(self) -> int:
        return sum(c.num_templates for c in self.classes)

    def entry(self, label: str) -> ClassEntry:
        for c in self.classes:
            if c.label == label:
                return c
        raise KeyError(f"unknown class label {label!r}; have {self.labels}")


@dataclass
class IndexParams:
    """Nearest-neighbor search configuration ("exact" or "kdforest")."""

    mode: str = "exact"
    trees: int = DEFAULT_TREES
    checks: int = DEFAULT_CHECKS
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("exact", "kdforest"):
            raise ValueError(f"index mode must be 'exact' or 'kdforest', got {self.mode!r}")
        if self.mode == "kdforest" and (self.trees < 1 or self.checks < 1):
            raise ValueError("kdforest requires trees >= 1 and checks >= 1")


EXACT = IndexParams(mode="exact")


@dataclass
class I2CReport:
    """Image-to-class distances for one query image plus the decision."""

    per_class: dict[str, float]
    predicted: str
    num_queries: int


def build_store(bags: list[tuple[str, np.ndarray]]) -> TemplateStore:
    """Group labeled descriptor bags into a TemplateStore.

    Bags sharing a label are concatenated in input order; class order is
    first appearance.  Weights start at zero (pure unweighted behavior)
    until compute_weights fills them in.
    """
    if not bags:
        raise ValueError("no labeled descriptor bags given")
    by_label: dict[str, list[np.ndarray]] = {}
    dim = None
    for label, descs in bags:
        mat = np.ascontiguousarray(descs, dtype=np.float32)
        if mat.ndim != 2 or mat.shape[0] == 0:
            raise ValueError(f"class {label!r} has an empty or non-matrix descriptor bag")
        if dim is None:
            dim = mat.shape[1]
        elif mat.shape[1] != dim:
            raise ValueError(
                f"descriptor dimension mismatch: class {label!r} has {mat.shape[1]}, expected {dim}"
            )
        by_label.setdefault(label, []).append(mat)
    classes = [
        ClassEntry(
            label=label,
            templates=np.concatenate(mats, axis=0),
            weights=np.zeros(sum(m.shape[0] for m in mats), dtype=np.float32),
        )
        for label, mats in by_label.items()
    ]
    return TemplateStore(classes=classes)


class ExactIndex:
    """Per-class float64 template caches for brute-force search."""

    def __init__(self, store: TemplateStore):
        self._data = {}
        for c in store.classes:
            T = np.asarray(c.templates, dtype=np.float64)
            self._data[c.label] = (T, np.sum(T**2, axis=1))

    def nn_batch(self, label: str, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        T, t_norms = self._data[label]
        Q = np.asarray(queries, dtype=np.float64)
        idxs = np.empty(Q.shape[0], dtype=np.int64)
        d2s = np.empty(Q.shape[0])
        for lo in range(0, Q.shape[0], _NN_CHUNK):
            hi = min(lo + _NN_CHUNK, Q.shape[0])
            block = Q[lo:hi]
            # argmin of ||t||^2 - 2 q.t equals argmin of the squared distance
            scores = t_norms - 2.0 * block @ T.T
            best = np.argmin(scores, axis=1)
            idxs[lo:hi] = best
            diffs = block - T[best]
            d2s[lo:hi] = np.einsum("ij,ij->i", diffs, diffs)
        return idxs, d2s


class KdForestIndex:
    """Per-class randomized kd-forests (see build_kdforest)."""

    def __init__(self, store: TemplateStore, params: IndexParams):
        seeds = np.random.SeedSequence(params.seed).generate_state(len(store.classes))
        self._forests = {
            c.label: KdForest(c.templates, trees=params.trees, checks=params.checks, seed=int(s))
            for c, s in zip(store.classes, seeds)
        }

    def nn_batch(self, label: str, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._forests[label].query_many(queries)


def build_kdforest(store: TemplateStore, params: IndexParams) -> KdForestIndex:
    """Build per-class randomized kd-forests; deterministic for a fixed seed."""
    if params.mode != "kdforest":
        raise ValueError("build_kdforest requires IndexParams(mode='kdforest')")
    return KdForestIndex(store, params)


def prepare_index(store: TemplateStore, params: IndexParams):
    """Index handle for repeated searches: ExactIndex or KdForestIndex."""
    if params.mode == "exact":
        return ExactIndex(store)
    return build_kdforest(store, params)


def nn_in_class(
    store: TemplateStore,
    label: str,
    query: np.ndarray,
    idx: IndexParams = EXACT,
    index=None,
) -> tuple[int, float]:
    """Nearest template of one class: (template_index, squared_distance).

    Exact mode returns the true minimizer (lowest index on ties); kdforest
    mode an approximate one under the configured check budget.
    """
    store.entry(label)
    if index is None:
        index = prepare_index(store, idx)
    idxs, d2s = index.nn_batch(label, np.asarray(query, dtype=np.float64)[None])
    return int(idxs[0]), float(d2s[0])


def i2c_distance(
    store: TemplateStore,
    label: str,
    queries: np.ndarray,
    weighted: bool = False,
    idx: IndexParams = EXACT,
    index=None,
) -> float:
    """Image-to-class distance of a descriptor bag to one class.

    Unweighted: sum_i ||d_i - NN_C(d_i)||^2.  Weighted: each term is scaled
    by (1 - w) with w the matched template's weight in [0, 1], so the
    weighted distance never exceeds the unweighted one.
    """
    entry = store.entry(label)
    queries = _as_queries(queries, store.descriptor_dim)
    if index is None:
        index = prepare_index(store, idx)
    nn_idx, d2 = index.nn_batch(label, queries)
    if weighted:
        w = np.asarray(entry.weights, dtype=np.float64)[nn_idx]
        return float(np.sum((1.0 - w) * d2))
    return float(np.sum(d2))


def classify(
    store: TemplateStore,
    queries: np.ndarray,
    weighted: bool = False,
    idx: IndexParams = EXACT,
    index=None,
) -> I2CReport:
    """Argmin-of-I2C decision over all classes (N x n nearest-neighbor searches).

    Ties go to the earliest class in store order.
    """
    queries = _as_queries(queries, store.descriptor_dim)
    if index is None:
        index = prepare_index(store, idx)
    per_class: dict[str, float] = {}
    best_label = None
    best = np.inf
    for c in store.classes:
        d = i2c_distance(store, c.label, queries, weighted=weighted, idx=idx, index=index)
        per_class[c.label] = d
        if d < best:
            best = d
            best_label = c.label
    return I2CReport(per_class=per_class, predicted=best_label, num_queries=queries.shape[0])


def compute_weights(store: TemplateStore, idx: IndexParams = EXACT) -> TemplateStore:
    """Discriminativeness weights for every template, as a new store.

    For a template t of class C, raw(t) is the largest squared distance from
    t to its nearest neighbor in each other class; weights are raw values
    divided by the global maximum, so all lie in [0, 1] with at least one 1.
    If every raw value is 0 (all classes identical) the weights stay 0 and
    weighted scoring reduces to unweighted.  Weights always use exact search
    regardless of `idx`: they are a one-off training cost and approximation
    noise would corrupt the normalizing maximum.
    """
    if len(store.classes) < 2:
        raise ValueError("template weighting needs at least 2 classes")
    del idx  # deployment index mode deliberately ignored here
    exact = ExactIndex(store)
    raws = []
    for c in store.classes:
        worst = np.zeros(c.num_templates)
        for other in store.classes:
            if other.label == c.label:
                continue
            _, d2 = exact.nn_batch(other.label, np.asarray(c.templates, dtype=np.float64))
            worst = np.maximum(worst, d2)
        raws.append(worst)
    top = max(float(r.max()) for r in raws)
    classes = []
    for c, raw in zip(store.classes, raws):
        w = raw / top if top > 0.0 else np.zeros_like(raw)
        classes.append(replace(c, weights=w.astype(np.float32)))
    return TemplateStore(classes=classes)


def _as_queries(queries: np.ndarray, dim: int) -> np.ndarray:
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim == 1:
        q = q[None]
    if q.ndim != 2 or q.shape[0] == 0:
        raise ValueError("queries must be a non-empty (n, d) descriptor matrix")
    if q.shape[1] != dim:
        raise ValueError(f"query dimension {q.shape[1]} != store dimension {dim}")
    return q
