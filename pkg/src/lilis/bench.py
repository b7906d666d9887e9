"""Workload generation and the benchmark harness.

Covers the measurement axes the engine is tuned for: selectivity sweeps for
range queries, skewed versus uniform query centers, k sweeps with the
theoretical round bound, learned-versus-R-tree build cost, and concurrent
throughput in jobs per minute.  Reports come out as a human table plus a
machine-readable CSV.
"""

from __future__ import annotations

import csv
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import Circle, Point, Polygon, Rect
from .partitioner import PartitionedDataset
from .queries import knn_round_bound
from .rtree import str_bulk_load
from .runtime import (
    CircleQuery,
    JoinQuery,
    KnnQuery,
    PointQuery,
    QueryEngine,
    QuerySpec,
    RangeQuery,
)
from .spline import build_spline_index

__all__ = [
    "Workload",
    "gen_workload",
    "run_latency",
    "run_throughput",
    "run_knn_rounds",
    "compare_build_cost",
    "linear_scan_range",
    "write_report_csv",
    "format_table",
]

SELECTIVITY_RANGE = (1e-8, 1e-3)
QUERY_TYPES = ("point", "range", "circle", "knn", "join")


@dataclass(frozen=True)
class Workload:
    """One benchmark configuration."""

    query_type: str = "range"
    selectivity: float = 1e-7
    skew: str = "skewed"
    k: int = 10
    count: int = 100
    runs: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.query_type not in QUERY_TYPES:
            raise ValueError(f"query_type must be one of {QUERY_TYPES}")
        if self.query_type in ("range", "circle", "join") and not (
            SELECTIVITY_RANGE[0] <= self.selectivity <= SELECTIVITY_RANGE[1]
        ):
            raise ValueError(f"selectivity must be within {SELECTIVITY_RANGE}")
        if self.skew not in ("skewed", "uniform"):
            raise ValueError("skew must be 'skewed' or 'uniform'")
        if self.count < 1 or self.runs < 1 or self.k < 1:
            raise ValueError("count, runs, and k must all be >= 1")


def _sample_centers(
    dataset: PartitionedDataset, count: int, skew: str, rng: np.random.Generator
) -> np.ndarray:
    """Query centers: drawn from the data itself (skewed) or uniform over the MBR."""
    mbr = dataset.global_mbr
    if skew == "uniform":
        xs = rng.uniform(mbr.x_lo, mbr.x_hi, count)
        ys = rng.uniform(mbr.y_lo, mbr.y_hi, count)
        return np.column_stack([xs, ys])
    counts = np.array([len(p) for p in dataset.partitions], dtype=np.int64)
    cum = np.cumsum(counts)
    picks = rng.integers(0, dataset.total, count)
    out = np.empty((count, 2), dtype=np.float64)
    for i, g in enumerate(picks):
        pid = int(np.searchsorted(cum, g, side="right"))
        off = int(g - (cum[pid - 1] if pid else 0))
        rec = dataset.partitions[pid][off]
        out[i] = (rec["x"], rec["y"])
    return out


def _convex_ring(cx: float, cy: float, radius: float, k: int, rng) -> tuple:
    angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, k))
    return tuple(
        Point(float(cx + radius * math.cos(a)), float(cy + radius * math.sin(a)))
        for a in angles
    )


def gen_workload(dataset: PartitionedDataset, w: Workload) -> list[QuerySpec]:
    """Seeded query list; windows sized so window_area / mbr_area = selectivity."""
    rng = np.random.default_rng([w.seed, 0xBE5C])
    mbr = dataset.global_mbr
    centers = _sample_centers(dataset, w.count, w.skew, rng)
    if w.query_type == "point":
        return [PointQuery(Point(float(x), float(y))) for x, y in centers]
    if w.query_type == "knn":
        return [KnnQuery(Point(float(x), float(y)), k=w.k) for x, y in centers]
    area = mbr.area
    if w.query_type == "range":
        half = math.sqrt(w.selectivity * area) / 2.0
        return [
            RangeQuery(Rect(float(x - half), float(y - half), float(x + half), float(y + half)))
            for x, y in centers
        ]
    if w.query_type == "circle":
        radius = math.sqrt(w.selectivity * area / math.pi)
        return [CircleQuery(Circle(Point(float(x), float(y)), radius)) for x, y in centers]
    # join: one query carrying `count` convex polygons sized like the circle case
    radius = math.sqrt(w.selectivity * area / math.pi)
    polygons = [
        Polygon(id=f"pg{i}", vertices=_convex_ring(x, y, radius, int(rng.integers(4, 11)), rng))
        for i, (x, y) in enumerate(centers)
    ]
    return [JoinQuery(tuple(polygons))]


# ---------------------------------------------------------------------------
# Measurement modes
# ---------------------------------------------------------------------------

def _percentile(samples: list[float], q: float) -> float:
    return float(np.percentile(np.array(samples), q))


def run_latency(engine: QueryEngine, specs: list[QuerySpec], runs: int = 1) -> dict:
    """Sequentially execute every spec `runs` times; per-query latency stats in ms."""
    samples: list[float] = []
    rounds: list[int] = []
    for _ in range(runs):
        for spec in specs:
            t0 = time.perf_counter()
            rs = engine.execute(spec)
            samples.append((time.perf_counter() - t0) * 1e3)
            if rs.rounds is not None:
                rounds.append(rs.rounds)
    row = {
        "queries": len(samples),
        "mean_ms": statistics.fmean(samples),
        "median_ms": statistics.median(samples),
        "p99_ms": _percentile(samples, 99),
    }
    if rounds:
        row["mean_rounds"] = statistics.fmean(rounds)
        row["max_rounds"] = max(rounds)
    return row


def run_throughput(engine: QueryEngine, specs: list[QuerySpec], workers: int = 8) -> dict:
    """Dispatch all specs over `workers` concurrent submitters; jobs per minute."""
    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(engine.execute, s) for s in specs]
        for f in futures:
            f.result()
    wall_s = time.perf_counter() - t0
    return {
        "queries": len(specs),
        "wall_s": wall_s,
        "jobs_per_minute": len(specs) / (wall_s / 60.0) if wall_s > 0 else float("inf"),
    }


def run_knn_rounds(
    engine: QueryEngine, k: int, count: int, skew: str = "uniform", seed: int = 0
) -> dict:
    """kNN rounds histogram for one k, with the theoretical bound when defined."""
    w = Workload(query_type="knn", k=k, count=count, runs=1, skew=skew, seed=seed)
    specs = gen_workload(engine.dataset, w)
    rounds = [engine.execute(s).rounds for s in specs]
    hist: dict[int, int] = {}
    for r in rounds:
        hist[r] = hist.get(r, 0) + 1
    bound = None
    if k >= 2 and engine.dataset.global_mbr is not None and engine.dataset.global_mbr.area > 0:
        bound = knn_round_bound(k, engine.dataset.total, engine.dataset.global_mbr)
    within_two = sum(1 for r in rounds if r <= 2) / len(rounds)
    return {
        "k": k,
        "queries": count,
        "rounds_histogram": dict(sorted(hist.items())),
        "max_rounds": max(rounds),
        "round_bound": bound,
        "within_bound": bound is None or max(rounds) <= bound,
        "pct_within_2_rounds": 100.0 * within_two,
    }


def compare_build_cost(dataset: PartitionedDataset, fanout: int = 64) -> dict:
    """Per-partition learned-index build time versus STR R-tree bulk load.

    Both sides consume the same key-sorted partition arrays, so the shared
    sort is outside the measurement.
    """
    learned_s = 0.0
    rtree_s = 0.0
    for records in dataset.partitions:
        if len(records) == 0:
            continue
        t0 = time.perf_counter()
        build_spline_index(records["key"], dataset.epsilon, dataset.radix_bits)
        learned_s += time.perf_counter() - t0
        t0 = time.perf_counter()
        str_bulk_load(records["x"], records["y"], records["payload"], fanout)
        rtree_s += time.perf_counter() - t0
    ratio = rtree_s / learned_s if learned_s > 0 else float("inf")
    return {"learned_ms": learned_s * 1e3, "rtree_ms": rtree_s * 1e3, "speedup": ratio}


def linear_scan_range(xs: np.ndarray, ys: np.ndarray, rect: Rect) -> np.ndarray:
    """Full-scan baseline: indices of points inside the closed rect."""
    mask = (xs >= rect.x_lo) & (xs <= rect.x_hi) & (ys >= rect.y_lo) & (ys <= rect.y_hi)
    return np.flatnonzero(mask)


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

def write_report_csv(rows: list[dict], path: str) -> None:
    """Machine-readable report; the union of row keys becomes the columns."""
    if not rows:
        raise ValueError("nothing to report")
    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)


def format_table(rows: list[dict]) -> str:
    """Plain-text table for standard output."""
    if not rows:
        return "(no results)"
    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)

    def fmt(v) -> str:
        if isinstance(v, float):
            return f"{v:.4g}"
        if v is None:
            return "-"
        return str(v)

    cells = [[fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    lines = [
        "  ".join(c.ljust(w) for c, w in zip(columns, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in cells:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    return "\n".join(lines)
