import math

import numpy as np
import pytest

import oracles
from conftest import clustered_with_duplicates, make_points
from lilis.geometry import Circle, Point, Rect
from lilis.partitioner import KDTree, RECORD_DTYPE
from lilis.queries import (
    KnnParams,
    circle_range_search,
    knn_initial_radius,
    knn_query,
    knn_round_bound,
    local_point_search,
    local_range_search,
    spatial_join,
)
from lilis.runtime import EngineConfig, QueryEngine, build_engine
from lilis.spline import AxisX, build_spline_index
from lilis.storage import generate_convex_polygons


def single_partition(keys_xs, ys, payloads=None, epsilon=32):
    """One key-sorted partition over x keys, plus its index and MBR."""
    n = len(keys_xs)
    if payloads is None:
        payloads = np.arange(n)
    records = np.empty(n, dtype=RECORD_DTYPE)
    records["key"] = keys_xs
    records["x"] = keys_xs
    records["y"] = ys
    records["payload"] = payloads
    order = np.lexsort((records["payload"], records["y"], records["x"], records["key"]))
    records = records[order]
    index = build_spline_index(records["key"], epsilon=epsilon, radix_bits=8)
    mbr = Rect(records["x"].min(), records["y"].min(), records["x"].max(), records["y"].max())
    return records, index, mbr


def small_engine(n=10_000, seed=0, workers=1) -> QueryEngine:
    xs, ys, payloads = clustered_with_duplicates(n, seed=seed)
    return build_engine(
        xs,
        ys,
        payloads,
        EngineConfig(workers=workers, partition_strategy=KDTree(max_leaf=40), sample_rate=0.02),
    )


def any_record(engine: QueryEngine):
    for part in engine.dataset.partitions:
        if len(part):
            return part[0]
    raise AssertionError("engine has no records")


class TestLocalPointSearch:
    def test_present(self):
        records, index, _ = single_partition(np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0, 6.0]))
        assert local_point_search(records, index, Point(2.0, 5.0), AxisX())

    def test_absent_same_key_different_y(self):
        records, index, _ = single_partition(np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0, 6.0]))
        assert not local_point_search(records, index, Point(2.0, 9.0), AxisX())

    def test_empty_partition(self):
        empty = np.empty(0, dtype=RECORD_DTYPE)
        assert not local_point_search(empty, None, Point(0, 0), AxisX())

    def test_duplicate_run_beyond_corridor(self):
        """100 objects share one key; only the 90th matches in y."""
        xs = np.full(100, 7.0)
        ys = np.arange(100.0)
        records, index, _ = single_partition(xs, ys, epsilon=1)
        assert local_point_search(records, index, Point(7.0, 89.0), AxisX())
        assert not local_point_search(records, index, Point(7.0, 200.0), AxisX())

    def test_brute_force_agreement(self, rng):
        xs = np.round(rng.normal(0, 1, 4000), 2)
        ys = np.round(rng.normal(0, 1, 4000), 2)
        records, index, _ = single_partition(xs, ys)
        for i in rng.integers(0, 4000, 300):
            assert local_point_search(records, index, Point(xs[i], ys[i]), AxisX())
        for _ in range(300):
            qx, qy = rng.normal(0, 1, 2)
            expected = oracles.brute_point(records, qx, qy)
            assert local_point_search(records, index, Point(qx, qy), AxisX()) == expected


class TestLocalRangeSearch:
    def test_envelope_short_circuit_returns_all(self):
        records, index, mbr = single_partition(np.arange(100.0), np.zeros(100))
        out = local_range_search(records, index, Rect(-1, -1, 200, 1), AxisX(), mbr)
        assert len(out) == 100

    def test_disjoint_key_interval_empty(self):
        records, index, mbr = single_partition(np.arange(100.0), np.zeros(100))
        out = local_range_search(records, index, Rect(200, 0, 300, 1), AxisX(), mbr)
        assert len(out) == 0

    def test_matches_brute_force(self, rng):
        xs = np.round(rng.normal(0, 1, 10_000), 2)
        ys = np.round(rng.normal(0, 1, 10_000), 2)
        records, index, mbr = single_partition(xs, ys)
        for _ in range(100):
            cx, cy = rng.normal(0, 1, 2)
            w, h = rng.random(2) * 0.5
            q = Rect(cx - w, cy - h, cx + w, cy + h)
            got = local_range_search(records, index, q, AxisX(), mbr)
            expected = oracles.brute_range(records, q)
            assert np.array_equal(oracles.canonical(got), expected)


class TestKnnMath:
    def test_initial_radius_values(self):
        assert knn_initial_radius(10, 1000, 100.0) == pytest.approx(0.56419, abs=1e-5)
        assert knn_initial_radius(1, 1, math.pi) == pytest.approx(1.0)
        assert knn_initial_radius(4, 400, math.pi) == pytest.approx(0.1)

    def test_initial_radius_zero_area_rejected(self):
        with pytest.raises(ValueError):
            knn_initial_radius(1, 10, 0.0)

    def test_round_bound_values(self):
        assert knn_round_bound(10, 10_000, Rect(0, 0, 1, 1)) == 13
        assert knn_round_bound(2, 2, Rect(0, 0, 1, 1)) == 1

    def test_round_bound_floors_at_one(self):
        # k large versus n makes the initial radius exceed the diagonal,
        # driving the raw ratio negative; the bound still reports 1
        assert knn_round_bound(13, 2, Rect(0, 0, 1, 1)) == 1

    def test_round_bound_k1_rejected(self):
        with pytest.raises(ValueError):
            knn_round_bound(1, 100, Rect(0, 0, 1, 1))

    def test_round_bound_degenerate_mbr_rejected(self):
        with pytest.raises(ValueError):
            knn_round_bound(5, 100, Rect(0, 0, 1, 0))


class TestKnnQuery:
    def test_k_equals_n_returns_everything(self):
        engine = small_engine(500)
        records, dists, _ = knn_query(engine, Point(0.5, 0.5), KnnParams(k=500))
        assert len(records) == 500
        assert (np.diff(dists) >= 0).all()

    def test_k1_coincident_point(self):
        engine = small_engine(1000)
        rec = any_record(engine)
        records, dists, _ = knn_query(engine, Point(float(rec["x"]), float(rec["y"])), KnnParams(k=1))
        assert dists[0] == 0.0

    def test_k_above_n_rejected(self):
        engine = small_engine(100)
        with pytest.raises(ValueError):
            knn_query(engine, Point(0, 0), KnnParams(k=101))

    def test_round_cap_raises_when_starved(self):
        """Two far-apart points: the first window holds one, the cap stops growth."""
        xs = np.array([0.0, 1.0])
        ys = np.array([0.0, 1.0])
        engine = build_engine(xs, ys, np.arange(2), EngineConfig(workers=1, sample_rate=1.0))
        with pytest.raises(RuntimeError, match="rounds"):
            knn_query(engine, Point(0.0, 0.0), KnnParams(k=2, max_rounds=1))

    def test_matches_brute_force(self, rng):
        engine = small_engine(10_000, seed=2)
        everything = oracles.all_records(engine.dataset)
        for k in (1, 5, 10, 50):
            for _ in range(50):
                qx, qy = rng.random(2)
                got, got_d, _ = knn_query(engine, Point(qx, qy), KnnParams(k=k))
                exp, exp_d = oracles.brute_knn(everything, qx, qy, k)
                assert np.array_equal(got, exp)
                assert np.allclose(got_d, exp_d)

    def test_result_prefix_monotone_in_k(self, rng):
        engine = small_engine(5000, seed=9)
        for _ in range(20):
            qx, qy = rng.random(2)
            small, _, _ = knn_query(engine, Point(qx, qy), KnnParams(k=7))
            big, _, _ = knn_query(engine, Point(qx, qy), KnnParams(k=8))
            assert np.array_equal(small, big[:7])

    def test_round_bound_respected_on_uniform(self, rng):
        data = make_points("uniform", 20_000, seed=13)
        engine = build_engine(data.xs, data.ys, data.payloads, EngineConfig(workers=1))
        mbr = engine.dataset.global_mbr
        for k in (2, 5, 10):
            bound = knn_round_bound(k, engine.dataset.total, mbr)
            for _ in range(30):
                qx, qy = rng.random(2)
                _, _, rounds = knn_query(engine, Point(qx, qy), KnnParams(k=k))
                assert rounds <= bound


class TestCircleSearch:
    def test_radius_zero_hits_exact_point(self):
        engine = small_engine(2000)
        rec = any_record(engine)
        out = circle_range_search(engine, Circle(Point(float(rec["x"]), float(rec["y"])), 0.0))
        assert len(out) >= 1
        assert (out["x"] == rec["x"]).all() and (out["y"] == rec["y"]).all()

    def test_inscribed_circle_area_ratio(self):
        data = make_points("uniform", 100_000, seed=21)
        engine = build_engine(data.xs, data.ys, data.payloads, EngineConfig(workers=1))
        kept = circle_range_search(engine, Circle(Point(0.5, 0.5), 0.5))
        candidates = engine.range_records(Rect(0, 0, 1, 1))
        assert len(kept) / len(candidates) == pytest.approx(math.pi / 4, abs=0.02)

    def test_matches_brute_force(self, rng):
        engine = small_engine(8000, seed=5)
        everything = oracles.all_records(engine.dataset)
        for _ in range(100):
            cx, cy = rng.random(2)
            r = rng.random() * 0.3
            got = circle_range_search(engine, Circle(Point(cx, cy), r))
            expected = oracles.brute_circle(everything, cx, cy, r)
            assert np.array_equal(oracles.canonical(got), expected)

    def test_circle_subset_of_mbr_rect(self, rng):
        engine = small_engine(5000, seed=6)
        c = Circle(Point(0.4, 0.6), 0.2)
        circle_hits = circle_range_search(engine, c)
        rect_hits = engine.range_records(c.mbr())
        assert len(circle_hits) <= len(rect_hits)
        assert set(map(tuple, circle_hits)) <= set(map(tuple, rect_hits))


class TestSpatialJoin:
    def test_unit_square_boundary_counts(self):
        from lilis.geometry import Polygon

        xs = np.array([0.5, 2.0, 1.0])
        ys = np.array([0.5, 2.0, 1.0])
        engine = build_engine(xs, ys, np.arange(3), EngineConfig(workers=1, sample_rate=1.0))
        square = Polygon("sq", (Point(0, 0), Point(1, 0), Point(1, 1), Point(0, 1)))
        groups = spatial_join(engine, [square])
        matched = groups[0][1]
        assert set(matched["payload"].tolist()) == {0, 2}

    def test_disjoint_polygon_empty(self):
        engine = small_engine(1000)
        from lilis.geometry import Polygon

        far = Polygon("far", (Point(10, 10), Point(11, 10), Point(11, 11)))
        groups = spatial_join(engine, [far])
        assert len(groups[0][1]) == 0

    def test_empty_polygon_list_rejected(self):
        engine = small_engine(100)
        with pytest.raises(ValueError):
            spatial_join(engine, [])

    def test_matches_nested_loop_oracle(self):
        engine = small_engine(10_000, seed=14)
        everything = oracles.all_records(engine.dataset)
        polygons = generate_convex_polygons(50, Rect(0, 0, 1, 1), seed=77, mean_radius=0.08)
        got = spatial_join(engine, polygons)
        expected = oracles.brute_join(everything, polygons)
        assert len(got) == len(expected)
        for (gid, grecs), (eid, erecs) in zip(got, expected):
            assert gid == eid
            assert np.array_equal(oracles.canonical(grecs), erecs)
