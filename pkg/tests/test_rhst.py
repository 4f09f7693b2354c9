import json
import math

import numpy as np
import pytest

from hkmedian import (
    Dataset,
    construct_2rhst,
    distance_extremes,
    kmedian_cost,
    normalize,
    opt_kmedian_discrete,
    random_shift,
    tree_cost,
    tree_dist,
)
from oracles import tree_dist_pathsum


def two_point_line():
    return Dataset.from_points(np.asarray([[0.0], [3.0]]))


class TestConstruction:
    def test_hand_worked_two_point_line(self):
        # cube side rounds 3 up to 4, two halvings reach unit cells
        t = construct_2rhst(two_point_line())
        assert t.lam == 3.0
        assert t.lam_pow2 == 4.0
        assert t.depth == 2
        assert t.edge_weight(1) == 2.0
        assert t.edge_weight(2) == 1.0
        leaves = [t.leaf_of[0], t.leaf_of[1]]
        assert all(leaf.level == 2 and leaf.side == 1.0 for leaf in leaves)

    def test_all_leaves_same_level(self):
        rng = np.random.default_rng(0)
        ds = Dataset.from_points(rng.random((17, 3)) * 9)
        t = construct_2rhst(ds)
        assert {t.leaf_of[i].level for i in range(17)} == {t.depth}
        assert all(t.leaf_of[i].point_id == i for i in range(17))

    def test_node_count_bound(self):
        rng = np.random.default_rng(1)
        ds = Dataset.from_points(rng.random((25, 2)) * 30)
        t = construct_2rhst(ds)
        assert len(t.all_nodes) <= ds.n * t.depth + 1

    def test_subunit_separation(self):
        # two points inside one unit cell force extra levels
        ds = Dataset.from_points(np.asarray([[0.1], [0.4], [3.0]]))
        t = construct_2rhst(ds)
        assert t.depth > 2
        assert {t.leaf_of[i].level for i in range(3)} == {t.depth}

    def test_negative_coordinates_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            construct_2rhst(Dataset.from_points([[-1.0], [2.0]]))

    def test_dump_roundtrip(self):
        t = construct_2rhst(two_point_line())
        text = t.to_text()
        assert "side=4.0" in text and text.count("level=2") == 2
        tree_json = json.loads(t.to_json())
        assert tree_json["n_leaves"] == 2
        assert len(tree_json["children"]) == 2


class TestTreeDist:
    def test_zero_on_same_point(self):
        t = construct_2rhst(two_point_line())
        assert tree_dist(t, 0, 0) == 0.0

    def test_hand_worked_root_lca(self):
        t = construct_2rhst(two_point_line())
        # path sums two edges on each side: 2*(2+1)
        assert tree_dist(t, 0, 1) == pytest.approx(6.0)

    def test_deep_lca_single_bottom_edge(self):
        ds = Dataset.from_points(np.asarray([[0.0], [1.0], [3.0]]))
        t = construct_2rhst(ds)
        # 0 and 1 share the level-1 cell [0,2): one bottom edge each side
        assert tree_dist(t, 0, 1) == pytest.approx(2 * t.lam_pow2 / 2 ** t.depth)

    def test_unknown_id(self):
        t = construct_2rhst(two_point_line())
        with pytest.raises(KeyError):
            tree_dist(t, 0, 9)

    def test_matches_pathsum_on_random_pairs(self):
        rng = np.random.default_rng(7)
        ds = Dataset.from_points(rng.random((40, 2)) * 20)
        t = construct_2rhst(ds)
        for _ in range(1000):
            p, q = rng.integers(0, 40, size=2)
            assert tree_dist(t, int(p), int(q)) == pytest.approx(
                tree_dist_pathsum(t, int(p), int(q)), abs=1e-9
            )

    def test_ultrametric_style_inequality(self):
        rng = np.random.default_rng(9)
        ds = Dataset.from_points(rng.random((30, 3)) * 11)
        t = construct_2rhst(ds)
        for _ in range(500):
            p, q, r = (int(x) for x in rng.integers(0, 30, size=3))
            assert tree_dist(t, p, q) <= max(tree_dist(t, p, r), tree_dist(t, r, q)) + 1e-9


class TestTreeCost:
    def test_all_leaves_zero(self):
        t = construct_2rhst(two_point_line())
        assert tree_cost(t, [0, 1]) == 0.0

    def test_hand_worked_single_center(self):
        t = construct_2rhst(two_point_line())
        assert tree_cost(t, [0]) == pytest.approx(6.0)

    def test_empty_centers_rejected(self):
        t = construct_2rhst(two_point_line())
        with pytest.raises(ValueError):
            tree_cost(t, [])

    def test_dominates_euclidean_cost(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            ds = Dataset.from_points(rng.random((15, 2)) * 6)
            shifted_ds, info = normalize(ds)
            shifted_ds, _ = random_shift(shifted_ds, info.aspect, rng)
            t = construct_2rhst(shifted_ds)
            centers = [int(c) for c in rng.choice(15, size=3, replace=False)]
            assert tree_cost(t, centers) >= kmedian_cost(shifted_ds, centers) - 1e-9


class TestRandomShift:
    def test_zero_shift_identity(self):
        ds = two_point_line()
        shifted, vec = random_shift(ds, 0.0, np.random.default_rng(0))
        assert np.allclose(shifted.points, ds.points)
        assert np.all(vec == 0.0)

    def test_distances_preserved(self):
        rng = np.random.default_rng(4)
        ds = Dataset.from_points(rng.random((12, 2)) * 5)
        shifted, _ = random_shift(ds, 7.0, rng)
        assert distance_extremes(shifted) == pytest.approx(distance_extremes(ds))

    def test_seeded_repeatability(self):
        ds = two_point_line()
        a, va = random_shift(ds, 3.0, np.random.default_rng(42))
        b, vb = random_shift(ds, 3.0, np.random.default_rng(42))
        assert np.array_equal(va, vb)
        assert np.array_equal(a.points, b.points)


class TestNormalize:
    def test_unit_min_distance_and_origin_corner(self):
        rng = np.random.default_rng(5)
        ds = Dataset.from_points(rng.random((10, 2)) * 13 - 4)
        normed, info = normalize(ds)
        dmin, _, aspect = distance_extremes(normed)
        assert dmin == pytest.approx(1.0, rel=1e-12)
        assert normed.points.min(axis=0) == pytest.approx(np.zeros(2), abs=1e-12)
        assert info.aspect == pytest.approx(distance_extremes(ds)[2])


def test_expected_tree_cost_within_log_factor():
    # over many shifts, the tree cost of the Euclidean 1-median stays within
    # O(d log side) of the Euclidean optimum
    rng = np.random.default_rng(11)
    ds = Dataset.from_points(rng.random((12, 2)) * 7)
    (center,), euclid_opt = opt_kmedian_discrete(ds, 1)
    ratios = []
    max_side = 1.0
    for _ in range(200):
        normed, info = normalize(ds)
        shifted, _ = random_shift(normed, info.aspect, rng)
        t = construct_2rhst(shifted)
        max_side = max(max_side, t.lam_pow2)
        ratios.append(tree_cost(t, [center]) / (euclid_opt / distance_extremes(ds)[0]))
    assert np.mean(ratios) <= 10 * 2 * math.log2(max_side)
