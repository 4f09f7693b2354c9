import numpy as np
import pytest

from hkmedian import (
    Dataset,
    agglomerate,
    check_nested,
    cut,
    gen_random_points,
    linkage_cost,
)
from oracles import mst_cut_partition


def line(*xs):
    return Dataset.from_points(np.asarray(xs, dtype=float)[:, None])


class TestLinkageCost:
    def test_pair_enumeration_example(self):
        ds = line(0, 1, 3)
        assert linkage_cost(ds, {0, 1}, {2}, "single") == pytest.approx(2.0)
        assert linkage_cost(ds, {0, 1}, {2}, "complete") == pytest.approx(3.0)
        assert linkage_cost(ds, {0, 1}, {2}, "average") == pytest.approx(2.5)

    def test_ward_two_singletons(self):
        ds = line(0, 2)
        # merged centroid at 1: 1 + 1 - 0 - 0
        assert linkage_cost(ds, {0}, {1}, "ward") == pytest.approx(2.0)

    def test_singleton_blocks_agree(self):
        rng = np.random.default_rng(0)
        ds = Dataset.from_points(rng.random((6, 2)))
        d01 = float(np.linalg.norm(ds.points[0] - ds.points[1]))
        for kind in ("single", "complete", "average"):
            assert linkage_cost(ds, {0}, {1}, kind) == pytest.approx(d01)

    def test_equal_distances_collapse_linkages(self):
        # equilateral triangle: every pair distance equal, all linkages agree
        ds = Dataset.from_points([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
        for kind in ("single", "complete", "average"):
            assert linkage_cost(ds, {0, 1}, {2}, kind) == pytest.approx(1.0, abs=1e-12)

    def test_overlap_rejected(self):
        ds = line(0, 1, 3)
        with pytest.raises(ValueError):
            linkage_cost(ds, {0, 1}, {1, 2}, "single")
        with pytest.raises(ValueError):
            linkage_cost(ds, set(), {1}, "single")

    def test_ward_nonnegative_random(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            ds = Dataset.from_points(rng.random((8, 3)))
            ids = list(range(8))
            rng.shuffle(ids)
            split = 1 + int(rng.integers(1, 7))
            a, b = set(ids[:split]), set(ids[split:])
            if not a or not b:
                continue
            assert linkage_cost(ds, a, b, "ward") >= -1e-9


class TestAgglomerate:
    def test_hand_trace_single_linkage(self):
        d = agglomerate(line(0, 1, 3), "single")
        assert d.merges[0].a == frozenset({0})
        assert d.merges[0].b == frozenset({1})
        assert d.merges[0].cost == pytest.approx(1.0)
        assert d.merges[1].cost == pytest.approx(2.0)
        assert d.cut(2).blocks in (
            (frozenset({0, 1}), frozenset({2})),
            (frozenset({2}), frozenset({0, 1})),
        )

    def test_single_point(self):
        d = agglomerate(line(5), "single")
        assert d.merges == ()
        assert d.cut(1).blocks == (frozenset({0}),)

    def test_cut_extremes(self):
        ds = line(0, 1, 3, 6)
        d = agglomerate(ds, "average")
        assert d.cut(4).k == 4
        assert d.cut(1).blocks == (frozenset({0, 1, 2, 3}),)
        with pytest.raises(ValueError):
            cut(d, 0)
        with pytest.raises(ValueError):
            cut(d, 5)

    def test_dendrogram_cuts_are_nested(self):
        rng = np.random.default_rng(1)
        ds = Dataset.from_points(rng.random((12, 2)))
        for kind in ("single", "complete", "average", "ward"):
            h = agglomerate(ds, kind).to_hierarchy()
            assert check_nested(h) == (True, None)

    @pytest.mark.parametrize("kind", ["single", "complete", "average", "ward"])
    def test_fast_path_matches_naive_reference(self, kind):
        rng = np.random.default_rng(3)
        for _ in range(6):
            ds = Dataset.from_points(rng.random((14, 2)) * 5)
            fast = agglomerate(ds, kind, method="lw")
            naive = agglomerate(ds, kind, method="naive")
            for mf, mn in zip(fast.merges, naive.merges):
                assert mf.a == mn.a and mf.b == mn.b
                assert mf.cost == pytest.approx(mn.cost, rel=1e-9, abs=1e-9)

    def test_line_instance_merges_left_to_right(self):
        from hkmedian import gen_line_instance

        ds = gen_line_instance(12, 0.5)
        d = agglomerate(ds, "single")
        for t, merge in enumerate(d.merges):
            assert merge.a == frozenset(range(t + 1))
            assert merge.b == frozenset({t + 1})

    def test_single_linkage_equals_mst_components(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            n = int(rng.integers(5, 40))
            ds = Dataset.from_points(rng.random((n, 2)) * 10)
            d = agglomerate(ds, "single")
            for k in range(1, min(n, 8) + 1):
                expected = mst_cut_partition(ds.points, ds.ids, k)
                assert set(d.cut(k).blocks) == set(expected.blocks)

    def test_unknown_kind_or_method(self):
        ds = line(0, 1)
        with pytest.raises(ValueError):
            agglomerate(ds, "centroid")
        with pytest.raises(ValueError):
            agglomerate(ds, "single", method="magic")
