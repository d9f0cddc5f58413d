"""Single-layer convolutional stroke-part encoder.

Receptive-field vectors are contrast-normalized, ZCA-whitened and compared
against a bank of unit-norm kernels learned by spherical k-means.  The
k-means "triangle" activation f_k = max(0, mean_j(z_j) - z_k) over the
distances z to the kernels is average-pooled on a 3x3 grid, giving one
non-negative descriptor per 32x32 stroke-part (2304-dim for 256 kernels).

Internal math runs in float64; FilterBank arrays are stored float32 so a
bank round-trips bit-exactly through the binary model container.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .pixelio import RECEPTIVE_FIELD_SIDE, STROKE_PART_SIDE, extract_strokeparts

DEFAULT_KERNELS = 256
DEFAULT_EPS_CN = 10.0
DEFAULT_EPS_ZCA = 0.1
DEFAULT_KMEANS_ITERS = 10
POOL_GRID = 3

# patches encoded per chunk inside encode_patches; bounds transient memory
_ENCODE_CHUNK = 32


@dataclass
class ZcaTransform:
    """Whitening transform v -> matrix @ (v - mean), matrix symmetric."""

    mean: np.ndarray  # (d,)
    matrix: np.ndarray  # (d, d)
    eps_zca: float

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass
class FilterBank:
    """Learned preprocessing plus the K convolutional kernels.

    centroids has shape (K, kernel_side**2) with unit-L2 rows; the
    descriptor dimension is pool_grid**2 * K.
    """

    centroids: np.ndarray
    zca: ZcaTransform
    eps_cn: float = DEFAULT_EPS_CN
    kernel_side: int = RECEPTIVE_FIELD_SIDE
    pool_grid: int = POOL_GRID

    @property
    def num_kernels(self) -> int:
        return self.centroids.shape[0]

    @property
    def descriptor_dim(self) -> int:
        return self.pool_grid * self.pool_grid * self.num_kernels


def contrast_normalize(vectors: np.ndarray, eps_cn: float = DEFAULT_EPS_CN) -> np.ndarray:
    """(v - mean(v)) / sqrt(var(v) + eps_cn) along the last axis.

    Population variance; the regularizer keeps constant patches finite (they
    map to the zero vector).  Accepts a single vector or a batch.
    """
    v = np.asarray(vectors, dtype=np.float64)
    mean = v.mean(axis=-1, keepdims=True)
    var = v.var(axis=-1, keepdims=True)
    return (v - mean) / np.sqrt(var + eps_cn)


def fit_zca(vectors: np.ndarray, eps_zca: float = DEFAULT_EPS_ZCA) -> ZcaTransform:
    """Fit a ZCA whitening transform E diag((lambda+eps)^-1/2) E^T.

    Works for any dimension d (the pipeline uses d=64 receptive fields).
    Warns when there are fewer samples than dimensions; the regularizer
    keeps the transform finite in that rank-deficient case.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected (n, d) sample matrix, got shape {X.shape}")
    n, d = X.shape
    if n < 2:
        raise ValueError(f"need at least 2 samples to fit ZCA, got {n}")
    if n < d:
        warnings.warn(f"fitting {d}-dim ZCA from only {n} patches; covariance is rank-deficient")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = (Xc.T @ Xc) / n
    evals, evecs = np.linalg.eigh(cov)
    evals = np.clip(evals, 0.0, None)
    matrix = (evecs * (1.0 / np.sqrt(evals + eps_zca))) @ evecs.T
    return ZcaTransform(mean=mean, matrix=matrix, eps_zca=float(eps_zca))


def apply_zca(zca: ZcaTransform, vectors: np.ndarray) -> np.ndarray:
    """matrix @ (v - mean) for a single vector or each row of a batch."""
    v = np.asarray(vectors, dtype=np.float64)
    return (v - np.asarray(zca.mean, dtype=np.float64)) @ np.asarray(
        zca.matrix, dtype=np.float64
    ).T


def spherical_kmeans(
    vectors: np.ndarray, k: int, iters: int = DEFAULT_KMEANS_ITERS, seed: int = 0
) -> np.ndarray:
    """Spherical k-means: unit-norm centroids, assignment by max dot product.

    Centroids are initialized from k distinct non-degenerate data points,
    re-normalized after every update, and empty clusters are re-seeded from
    the point currently farthest from its assigned centroid.  Deterministic
    for a fixed seed.  Returns (k, d) float64 with unit rows.
    """
    X = np.asarray(vectors, dtype=np.float64)
    n, d = X.shape
    if n < k:
        raise ValueError(f"need at least k={k} vectors, got {n}")
    norms = np.linalg.norm(X, axis=1)
    usable = np.flatnonzero(norms > 1e-12)
    if usable.size < k:
        raise ValueError(f"only {usable.size} non-degenerate vectors for k={k} clusters")
    rng = np.random.default_rng(seed)
    pick = usable[rng.choice(usable.size, size=k, replace=False)]
    C = X[pick] / norms[pick, None]

    sq_norms = norms**2
    for _ in range(max(1, iters)):
        sims = X @ C.T
        assign = np.argmax(sims, axis=1)
        counts = np.bincount(assign, minlength=k)
        sums = np.empty((k, d))
        for col in range(d):
            sums[:, col] = np.bincount(assign, weights=X[:, col], minlength=k)
        # distance of each point to its assigned centroid, for re-seeding
        d2_own = sq_norms + 1.0 - 2.0 * sims[np.arange(n), assign]
        sum_norms = np.linalg.norm(sums, axis=1)
        dead = np.flatnonzero((counts == 0) | (sum_norms <= 1e-12))
        alive = np.flatnonzero((counts > 0) & (sum_norms > 1e-12))
        C[alive] = sums[alive] / sum_norms[alive, None]
        taken = d2_own.copy()
        taken[norms <= 1e-12] = -np.inf
        for j in dead:
            far = int(np.argmax(taken))
            C[j] = X[far] / norms[far]
            taken[far] = -np.inf
    return C


def learn_dictionary(
    patches: np.ndarray,
    k: int = DEFAULT_KERNELS,
    iters: int = DEFAULT_KMEANS_ITERS,
    seed: int = 0,
    eps_cn: float = DEFAULT_EPS_CN,
    eps_zca: float = DEFAULT_EPS_ZCA,
) -> FilterBank:
    """Learn the convolutional kernel bank from raw receptive-field patches.

    Patches are contrast-normalized and ZCA-whitened, then clustered with
    spherical k-means; the fitted whitening is embedded in the returned
    FilterBank so encoding applies the identical preprocessing.
    """
    flat = np.asarray(patches, dtype=np.float64)
    if flat.ndim == 3:
        side = flat.shape[1]
        flat = flat.reshape(flat.shape[0], -1)
    else:
        side = int(round(np.sqrt(flat.shape[1])))
    if flat.shape[0] < k:
        raise ValueError(f"need at least k={k} training patches, got {flat.shape[0]}")
    normalized = contrast_normalize(flat, eps_cn)
    zca = fit_zca(normalized, eps_zca)
    whitened = _whiten(zca, normalized)
    centroids = spherical_kmeans(whitened, k, iters=iters, seed=seed)
    return FilterBank(
        centroids=centroids.astype(np.float32),
        zca=ZcaTransform(
            mean=zca.mean.astype(np.float32),
            matrix=zca.matrix.astype(np.float32),
            eps_zca=zca.eps_zca,
        ),
        eps_cn=float(eps_cn),
        kernel_side=side,
    )


def receptive_field_vectors(patches: np.ndarray, side: int = RECEPTIVE_FIELD_SIDE) -> np.ndarray:
    """All stride-1 side x side windows of each patch, flattened row-major.

    (n, P, P) -> (n, (P-side+1)**2, side**2); window order is row-major over
    window origins, matching the flattening used for dictionary patches.
    """
    arr = np.asarray(patches, dtype=np.float64)
    single = arr.ndim == 2
    if single:
        arr = arr[None]
    n, ph, pw = arr.shape
    wins = np.lib.stride_tricks.sliding_window_view(arr, (side, side), axis=(1, 2))
    flat = wins.reshape(n, (ph - side + 1) * (pw - side + 1), side * side)
    return flat[0] if single else flat


def distance_maps(patch: np.ndarray, bank: FilterBank) -> np.ndarray:
    """Per-location Euclidean distances to every kernel.

    Returns (S, S, K) float64 where S = patch_side - kernel_side + 1; each
    location's 8x8 vector is contrast-normalized and whitened before the
    distance computation.
    """
    patch = np.asarray(patch, dtype=np.float64)
    if patch.ndim != 2:
        raise ValueError(f"expected a single (P, P) patch, got shape {patch.shape}")
    s = patch.shape[0] - bank.kernel_side + 1
    vecs = receptive_field_vectors(patch, bank.kernel_side)
    z = _centroid_distances(_preprocess(vecs, bank), bank)
    return z.reshape(s, s, bank.num_kernels)


def triangle_activation(dists: np.ndarray) -> np.ndarray:
    """Triangle encoding f_k = max(0, mean_j(z_j) - z_k) over the last axis."""
    z = np.asarray(dists, dtype=np.float64)
    return np.maximum(0.0, z.mean(axis=-1, keepdims=True) - z)


def encode_patches(patches: np.ndarray, bank: FilterBank) -> np.ndarray:
    """Encode a batch of 32x32 stroke-parts into (n, descriptor_dim) float32."""
    arr = np.asarray(patches, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    n = arr.shape[0]
    if arr.shape[1] != STROKE_PART_SIDE or arr.shape[2] != STROKE_PART_SIDE:
        raise ValueError(f"expected (n, 32, 32) stroke-parts, got {arr.shape}")
    out = np.empty((n, bank.descriptor_dim), dtype=np.float32)
    for lo in range(0, n, _ENCODE_CHUNK):
        hi = min(lo + _ENCODE_CHUNK, n)
        out[lo:hi] = _encode_chunk(arr[lo:hi], bank)
    return out


def encode_patch(patch: np.ndarray, bank: FilterBank) -> np.ndarray:
    """Encode one 32x32 stroke-part into a descriptor of length 9*K."""
    return encode_patches(np.asarray(patch)[None], bank)[0]


def encode_line(img: np.ndarray, bank: FilterBank, step: int) -> np.ndarray:
    """Descriptors of all stroke-parts of a height-64 line, window order."""
    return encode_patches(extract_strokeparts(img, step), bank)


def _whiten(zca: ZcaTransform, vectors: np.ndarray) -> np.ndarray:
    # pipeline whitening is the matrix product alone: the contrast-normalized
    # zero vector must stay zero so constant patches encode to zero descriptors
    # (covariance is unchanged by dropping the translation)
    v = np.asarray(vectors, dtype=np.float64)
    return v @ np.asarray(zca.matrix, dtype=np.float64)


def _preprocess(vecs: np.ndarray, bank: FilterBank) -> np.ndarray:
    normalized = contrast_normalize(vecs, bank.eps_cn)
    return _whiten(bank.zca, normalized)


def _centroid_distances(whitened: np.ndarray, bank: FilterBank) -> np.ndarray:
    C = np.asarray(bank.centroids, dtype=np.float64)
    d2 = (
        np.sum(whitened**2, axis=-1, keepdims=True)
        + np.sum(C**2, axis=1)
        - 2.0 * whitened @ C.T
    )
    return np.sqrt(np.maximum(d2, 0.0))


def _encode_chunk(arr: np.ndarray, bank: FilterBank) -> np.ndarray:
    n = arr.shape[0]
    k = bank.num_kernels
    grid = bank.pool_grid
    s = arr.shape[1] - bank.kernel_side + 1
    vecs = receptive_field_vectors(arr, bank.kernel_side).reshape(n * s * s, -1)
    acts = triangle_activation(_centroid_distances(_preprocess(vecs, bank), bank))
    maps = acts.reshape(n, s, s, k)
    # grid cells split the S x S response map into ceil-first runs (9/8/8 for S=25)
    edges = _pool_edges(s, grid)
    desc = np.empty((n, grid * grid * k))
    cell = 0
    for r in range(grid):
        for c in range(grid):
            block = maps[:, edges[r] : edges[r + 1], edges[c] : edges[c + 1], :]
            desc[:, cell * k : (cell + 1) * k] = block.mean(axis=(1, 2))
            cell += 1
    return desc.astype(np.float32)


def _pool_edges(size: int, grid: int) -> list[int]:
    base, rem = divmod(size, grid)
    edges = [0]
    for i in range(grid):
        edges.append(edges[-1] + base + (1 if i < rem else 0))
    return edges
