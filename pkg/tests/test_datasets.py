import numpy as np
import pytest

from hkmedian import (
    Dataset,
    DataFormatError,
    DbscanParams,
    DegenerateDataError,
    Partition,
    check_well_clusterable,
    dbscan,
    gen_line_instance,
    gen_random_points,
    gen_rhst_adversarial,
    gen_well_clusterable,
    load_csv,
    mst_max_edge,
    save_csv,
    tree_kmedian_pipeline,
)


class TestLineInstance:
    def test_gap_formula(self):
        ds = gen_line_instance(5, 1.0)
        gaps = np.diff(ds.points[:, 0])
        assert gaps == pytest.approx([1.0, 1.2, 1.4, 1.6])

    def test_gaps_strictly_increasing(self):
        ds = gen_line_instance(40, 0.5)
        gaps = np.diff(ds.points[:, 0])
        assert np.all(np.diff(gaps) > 0)

    def test_too_small(self):
        with pytest.raises(ValueError):
            gen_line_instance(1, 0.5)


class TestAdversarialInstance:
    @staticmethod
    def cell_of(pt):
        col, row = int(pt[0] // 16), int(pt[1] // 16)
        quad = (row // 2) * 2 + (col // 2)
        return quad * 4 + (row % 2) * 2 + (col % 2) + 1

    def test_sixteen_populated_cells(self):
        for n in (64, 100, 128):
            ds = gen_rhst_adversarial(n)
            assert ds.n == n
            counts = {}
            for p in ds.points:
                c = self.cell_of(p)
                counts[c] = counts.get(c, 0) + 1
            assert len(counts) == 16
            assert min(counts.values()) >= n // 16

    def test_deterministic_tree_keeps_grid(self):
        ds = gen_rhst_adversarial(64)
        res = tree_kmedian_pipeline(ds, mode="greedy", shift="none", max_levels=2)
        assert res.tree.lam_pow2 == 64.0
        assert res.tree.depth == 6

    def test_first_two_centers_and_flip(self):
        ds = gen_rhst_adversarial(64)
        res = tree_kmedian_pipeline(ds, mode="greedy", shift="none", max_levels=2)
        c1, c2 = res.hierarchy.centers
        assert self.cell_of(ds.coords_of(c1)) == 5
        assert self.cell_of(ds.coords_of(c2)) == 11
        cell5 = [int(i) for i in ds.ids if self.cell_of(ds.coords_of(int(i))) == 5]
        for pid in cell5:
            sub = ds.drop([pid])
            r = tree_kmedian_pipeline(sub, mode="greedy", shift="none", max_levels=2)
            d1, d2 = r.hierarchy.centers
            assert self.cell_of(sub.coords_of(d1)) == 11
            assert self.cell_of(sub.coords_of(d2)) == 15

    def test_size_guards(self):
        with pytest.raises(ValueError):
            gen_rhst_adversarial(63)
        with pytest.raises(ValueError):
            gen_rhst_adversarial(2000)


class TestRandomPoints:
    def test_reproducible(self):
        a = gen_random_points(30, 3, rng=np.random.default_rng(1))
        b = gen_random_points(30, 3, rng=np.random.default_rng(1))
        assert np.array_equal(a.points, b.points)

    def test_zero_spread_rejected(self):
        with pytest.raises(ValueError):
            gen_random_points(10, 2, spread=0.0)

    def test_mixture_mode(self):
        ds = gen_random_points(100, 2, spread=10.0, clusters=4, rng=np.random.default_rng(2))
        assert ds.n == 100 and ds.dim == 2


class TestMstMaxEdge:
    def test_line_example(self):
        assert mst_max_edge(np.asarray([[0.0], [1.0], [5.0]])) == pytest.approx(4.0)

    def test_singleton(self):
        assert mst_max_edge(np.asarray([[3.0, 1.0]])) == 0.0

    def test_equally_spaced(self):
        pts = np.arange(6, dtype=float)[:, None] * 2.5
        assert mst_max_edge(pts) == pytest.approx(2.5)


class TestWellClusterable:
    def test_hand_example(self):
        ds = Dataset.from_points(np.asarray([[0.0], [1.0], [10.0], [11.0]]))
        part = Partition(({0, 1}, {2, 3}))
        report = check_well_clusterable(ds, part)
        assert report.max_intra == pytest.approx((1.0, 1.0))
        assert report.min_inter[0] == (0, 1, pytest.approx(9.0))
        assert report.verdict

    def test_line_instance_not_well_clusterable(self):
        ds = gen_line_instance(20, 0.5)
        part = Partition(({i for i in range(10)}, {i for i in range(10, 20)}))
        assert not check_well_clusterable(ds, part).verdict

    def test_single_cluster_vacuously_true(self):
        ds = gen_line_instance(5, 0.5)
        assert check_well_clusterable(ds, Partition.whole(range(5))).verdict

    def test_generator_output_verdict_true(self):
        rng = np.random.default_rng(0)
        for m in (2, 3, 5):
            ds, part = gen_well_clusterable(m, 8, rng=rng)
            assert part.k == m
            assert check_well_clusterable(ds, part).verdict

    def test_moving_clusters_apart_keeps_verdict(self):
        rng = np.random.default_rng(1)
        ds, part = gen_well_clusterable(3, 6, rng=rng)
        pts = ds.points.copy()
        blocks = part.sorted_blocks()
        for j, block in enumerate(blocks):
            rows = ds.rows_of(sorted(block))
            pts[rows] += np.asarray([100.0 * j, 0.0])
        moved = Dataset.from_points(pts)
        assert check_well_clusterable(moved, part).verdict


class TestDbscan:
    def test_hand_example(self):
        ds = Dataset.from_points(np.asarray([[0.0], [1.0], [2.0], [10.0]]))
        part, noise = dbscan(ds, DbscanParams(eps=1.5, min_samples=2))
        assert part.blocks == (frozenset({0, 1, 2}),)
        assert noise == frozenset({3})

    def test_huge_eps_single_cluster(self):
        ds = gen_random_points(20, 2, rng=np.random.default_rng(3))
        part, noise = dbscan(ds, DbscanParams(eps=1e6, min_samples=3))
        assert part.k == 1 and not noise

    def test_min_samples_above_n_all_noise(self):
        ds = gen_random_points(10, 2, rng=np.random.default_rng(4))
        part, noise = dbscan(ds, DbscanParams(eps=0.5, min_samples=11))
        assert part.k == 0
        assert noise == frozenset(range(10))

    def test_order_independence(self):
        rng = np.random.default_rng(5)
        pts = rng.random((40, 2)) * 4
        ds = Dataset.from_points(pts)
        part, noise = dbscan(ds, DbscanParams(eps=0.4, min_samples=3))
        perm = rng.permutation(40)
        ds2 = Dataset.from_points(pts[perm])
        part2, noise2 = dbscan(ds2, DbscanParams(eps=0.4, min_samples=3))
        relabel = {new: int(old) for new, old in enumerate(perm)}
        mapped_blocks = {frozenset(relabel[i] for i in b) for b in part2.blocks}
        assert mapped_blocks == set(part.blocks)
        assert {relabel[i] for i in noise2} == set(noise)

    def test_param_validation(self):
        with pytest.raises(ValueError):
            DbscanParams(eps=0.0, min_samples=1)
        with pytest.raises(ValueError):
            DbscanParams(eps=1.0, min_samples=0)


class TestCsvIo:
    def test_basic_load(self, tmp_path):
        f = tmp_path / "pts.csv"
        f.write_text("0.0,1.0\n2.0,3.0\n4.0,5.0\n")
        ds = load_csv(f)
        assert ds.n == 3 and ds.dim == 2

    def test_header_skipped(self, tmp_path):
        f = tmp_path / "pts.csv"
        f.write_text("x,y\n0.0,1.0\n2.0,3.0\n")
        assert load_csv(f, has_header=True).n == 2

    def test_ragged_row_diagnostic(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("0.0,1.0\n2.0\n")
        with pytest.raises(DataFormatError, match="row 2"):
            load_csv(f)

    def test_non_numeric_diagnostic(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("0.0,1.0\n2.0,apple\n")
        with pytest.raises(DataFormatError, match="row 2, column 2"):
            load_csv(f)

    def test_duplicate_rows_rejected(self, tmp_path):
        f = tmp_path / "dup.csv"
        f.write_text("1.0,2.0\n1.0,2.0\n")
        with pytest.raises(DegenerateDataError):
            load_csv(f)

    def test_minmax_scaling(self, tmp_path):
        f = tmp_path / "pts.csv"
        f.write_text("0.0,5.0\n10.0,5.0\n5.0,7.0\n")
        ds = load_csv(f, scale=True)
        assert ds.points[:, 0].max() == 1.0 and ds.points[:, 0].min() == 0.0

    def test_roundtrip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(6)
        ds = Dataset.from_points(rng.random((150, 4)))
        f = tmp_path / "iris_shape.csv"
        save_csv(ds, f, meta={"generator": "random", "seed": 6})
        back = load_csv(f)
        assert np.array_equal(back.points, ds.points)
        assert (tmp_path / "iris_shape.meta.json").exists()
