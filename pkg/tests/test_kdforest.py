"""Randomized kd-forest approximate nearest-neighbor search."""

import numpy as np
import pytest

from strokeid.kdforest import KdForest


def _brute(points, q):
    d2 = np.sum((points - q) ** 2, axis=1)
    return int(np.argmin(d2)), float(d2.min())


class TestExactness:
    def test_exhaustive_when_checks_cover_all_points(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(200, 12))
        forest = KdForest(pts, trees=4, checks=200, seed=1)
        for q in rng.normal(size=(50, 12)):
            bi, bd = _brute(pts, q)
            fi, fd = forest.query(q)
            assert fi == bi
            np.testing.assert_allclose(fd, bd, rtol=1e-12)

    def test_stored_point_found_at_zero(self):
        rng = np.random.default_rng(1)
        pts = rng.normal(size=(64, 6))
        forest = KdForest(pts, trees=4, checks=64, seed=0)
        idx, d2 = forest.query(pts[17])
        assert idx == 17
        assert d2 == 0.0

    def test_duplicate_points_return_lowest_index(self):
        pts = np.zeros((10, 4))
        pts[3:] = 5.0
        forest = KdForest(pts, trees=4, checks=10, seed=2)
        idx, d2 = forest.query(np.zeros(4) + 0.1)
        assert idx == 0
        idx, _ = forest.query(np.full(4, 5.0))
        assert idx == 3


class TestDeterminism:
    def test_same_seed_same_structure(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(300, 8))
        a = KdForest(pts, trees=4, checks=32, seed=7)
        b = KdForest(pts, trees=4, checks=32, seed=7)
        assert a.structure() == b.structure()

    def test_different_seed_different_structure(self):
        rng = np.random.default_rng(4)
        pts = rng.normal(size=(300, 8))
        a = KdForest(pts, trees=4, checks=32, seed=7)
        b = KdForest(pts, trees=4, checks=32, seed=8)
        assert a.structure() != b.structure()

    def test_trees_differ_within_forest(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(400, 8))
        s = KdForest(pts, trees=4, checks=32, seed=0).structure()
        assert any(s[0] != t for t in s[1:])


class TestBudget:
    def test_check_budget_respected_with_leaf_overshoot(self):
        rng = np.random.default_rng(6)
        pts = rng.normal(size=(2000, 10))
        checks = 128
        forest = KdForest(pts, trees=4, checks=checks, seed=0)
        for q in rng.normal(size=(20, 10)):
            _, _, examined = forest.query(q, with_stats=True)
            # the final leaf may finish past the budget but never by more
            # than one leaf's worth of points
            assert examined <= checks + 16 - 1

    def test_split_dims_come_from_top_variance(self):
        rng = np.random.default_rng(7)
        pts = rng.normal(size=(500, 10))
        pts[:, 2] *= 50.0
        pts[:, 5] *= 40.0
        forest = KdForest(pts, trees=4, checks=32, seed=1)
        top5 = set(np.argsort(np.var(pts, axis=0))[-5:].tolist())
        for tree in forest.structure():
            assert tree[0] in top5  # root split dimension


class TestQuality:
    def test_high_agreement_on_clustered_data(self):
        rng = np.random.default_rng(8)
        centers = rng.normal(scale=10.0, size=(20, 16))
        pts = np.concatenate([c + rng.normal(size=(100, 16)) for c in centers])
        forest = KdForest(pts, trees=4, checks=128, seed=0)
        queries = np.concatenate([c + rng.normal(size=(5, 16)) for c in centers])
        hits = 0
        for q in queries:
            bi, _ = _brute(pts, q)
            fi, _ = forest.query(q)
            hits += fi == bi
        assert hits / len(queries) >= 0.9

    def test_query_many_matches_single_queries(self):
        rng = np.random.default_rng(9)
        pts = rng.normal(size=(256, 8))
        forest = KdForest(pts, trees=2, checks=64, seed=3)
        queries = rng.normal(size=(30, 8))
        idxs, d2s = forest.query_many(queries)
        for i, q in enumerate(queries):
            si, sd = forest.query(q)
            assert idxs[i] == si
            assert d2s[i] == sd


class TestValidation:
    def test_rejects_empty_points(self):
        with pytest.raises(ValueError):
            KdForest(np.zeros((0, 4)), trees=2, checks=8, seed=0)

    def test_rejects_bad_params(self):
        pts = np.zeros((10, 4))
        with pytest.raises(ValueError):
            KdForest(pts, trees=0, checks=8, seed=0)
        with pytest.raises(ValueError):
            KdForest(pts, trees=2, checks=0, seed=0)
