"""Randomized kd-tree forest for approximate nearest-neighbor search.

Several trees are built over the same points, each choosing its split
dimension at random among the highest-variance dimensions of the node's
point set.  A query descends every tree, then keeps expanding the most
promising unexplored branches from a single priority queue shared across
trees until `checks` distinct points have been examined (or the queue is
exhausted, in which case the result is exact).  Points already examined
via one tree are not re-counted when reached through another.
"""

from __future__ import annotations

import heapq

import numpy as np

DEFAULT_TREES = 4
DEFAULT_CHECKS = 128
LEAF_SIZE = 16

# split dimension drawn among this many top-variance dims, per node
_TOP_VARIANCE_DIMS = 5


class _Node:
    __slots__ = ("dim", "split", "left", "right", "indices")

    def __init__(self, dim=-1, split=0.0, left=None, right=None, indices=None):
        self.dim = dim
        self.split = split
        self.left = left
        self.right = right
        self.indices = indices  # leaf payload; None for internal nodes


class KdForest:
    """Forest of randomized kd-trees over one (n, d) point set."""

    def __init__(
        self,
        points: np.ndarray,
        trees: int = DEFAULT_TREES,
        checks: int = DEFAULT_CHECKS,
        seed: int = 0,
        leaf_size: int = LEAF_SIZE,
    ):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError(f"expected a non-empty (n, d) point matrix, got {pts.shape}")
        if trees < 1 or checks < 1:
            raise ValueError("trees and checks must both be >= 1")
        self.points = pts
        self.checks = checks
        self.leaf_size = max(1, leaf_size)
        seeds = np.random.SeedSequence(seed).spawn(trees)
        self.roots = [
            self._build(np.arange(pts.shape[0]), np.random.default_rng(s)) for s in seeds
        ]

    def _build(self, indices: np.ndarray, rng: np.random.Generator) -> _Node:
        if indices.size <= self.leaf_size:
            return _Node(indices=indices)
        sub = self.points[indices]
        variances = sub.var(axis=0)
        top = min(_TOP_VARIANCE_DIMS, variances.size)
        candidates = np.sort(np.argpartition(variances, -top)[-top:])
        dim = int(rng.choice(candidates))
        order = indices[np.argsort(sub[:, dim], kind="stable")]
        mid = indices.size // 2
        split = float(self.points[order[mid], dim])
        return _Node(
            dim=dim,
            split=split,
            left=self._build(order[:mid], rng),
            right=self._build(order[mid:], rng),
        )

    def query(self, q: np.ndarray, with_stats: bool = False):
        """Approximate nearest neighbor of q: (index, squared_distance).

        Examines at most `checks` distinct points (rounded up to the end of
        the current leaf); with the queue exhausted first, the result is the
        exact nearest neighbor with lowest-index tie-breaking.
        """
        q = np.asarray(q, dtype=np.float64)
        pts = self.points
        visited = np.zeros(pts.shape[0], dtype=bool)
        best_d2 = np.inf
        best_idx = -1
        checked = 0
        seq = 0
        heap: list[tuple[float, int, _Node]] = []
        for root in self.roots:
            heapq.heappush(heap, (0.0, seq, root))
            seq += 1
        while heap and checked < self.checks and best_d2 > 0.0:
            bound, _, node = heapq.heappop(heap)
            while node.indices is None:
                delta = q[node.dim] - node.split
                near, far = (node.left, node.right) if delta < 0 else (node.right, node.left)
                heapq.heappush(heap, (bound + delta * delta, seq, far))
                seq += 1
                node = near
            fresh = node.indices[~visited[node.indices]]
            if fresh.size == 0:
                continue
            visited[fresh] = True
            checked += fresh.size
            diffs = pts[fresh] - q
            d2 = np.einsum("ij,ij->i", diffs, diffs)
            low = float(d2.min())
            cand = int(fresh[d2 == low].min())  # lowest index among leaf ties
            if low < best_d2 or (low == best_d2 and cand < best_idx):
                best_d2 = low
                best_idx = cand
        if with_stats:
            return best_idx, best_d2, checked
        return best_idx, best_d2

    def query_many(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vector of (indices, squared_distances) for each query row."""
        queries = np.asarray(queries, dtype=np.float64)
        idxs = np.empty(queries.shape[0], dtype=np.int64)
        d2s = np.empty(queries.shape[0])
        for i, q in enumerate(queries):
            idxs[i], d2s[i] = self.query(q)
        return idxs, d2s

    def structure(self) -> list:
        """Nested description of every tree, for determinism checks."""

        def walk(node: _Node):
            if node.indices is not None:
                return sorted(int(i) for i in node.indices)
            return (node.dim, node.split, walk(node.left), walk(node.right))

        return [walk(r) for r in self.roots]
