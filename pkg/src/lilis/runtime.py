"""Two-phase query execution: global descriptor filter, then parallel local search.

A coordinator-side descriptor table prunes partitions by MBR; surviving
partitions are searched concurrently and merged into a canonical order, so
output is identical for any worker count.  Queries never move objects
between partitions.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import queries
from .geometry import Circle, Point, Rect, polygon_mbr, rect_contains_point, rect_intersects
from .partitioner import (
    RECORD_DTYPE,
    GridDescriptor,
    KDTree,
    PartitionStrategy,
    PartitionedDataset,
    auto_max_leaf,
    partition_dataset,
)
from .queries import KnnParams, knn_initial_radius, local_point_search, local_range_search
from .spline import AxisX, KeyStrategy

__all__ = [
    "PointQuery",
    "RangeQuery",
    "CircleQuery",
    "KnnQuery",
    "JoinQuery",
    "QuerySpec",
    "ResultSet",
    "EngineConfig",
    "global_filter",
    "QueryEngine",
    "build_engine",
    "execute",
]


@dataclass(frozen=True)
class PointQuery:
    point: Point


@dataclass(frozen=True)
class RangeQuery:
    rect: Rect


@dataclass(frozen=True)
class CircleQuery:
    circle: Circle


@dataclass(frozen=True)
class KnnQuery:
    point: Point
    k: int
    max_rounds: int = 64


@dataclass(frozen=True)
class JoinQuery:
    polygons: tuple

    def __post_init__(self):
        object.__setattr__(self, "polygons", tuple(self.polygons))


QuerySpec = Union[PointQuery, RangeQuery, CircleQuery, KnnQuery, JoinQuery]


@dataclass
class ResultSet:
    """Canonically ordered result of one executed query."""

    query: QuerySpec
    found: Optional[bool] = None
    records: Optional[np.ndarray] = None
    distances: Optional[np.ndarray] = None
    rounds: Optional[int] = None
    groups: Optional[list[tuple[str, np.ndarray]]] = None


@dataclass(frozen=True)
class EngineConfig:
    """Build- and run-time knobs for the whole engine."""

    workers: int = 8
    key_strategy: KeyStrategy = field(default_factory=AxisX)
    epsilon: int = 32
    radix_bits: int = 10
    partition_strategy: Optional[PartitionStrategy] = None  # None: kd-tree, auto leaf size
    sample_rate: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.epsilon < 1:
            raise ValueError(f"epsilon must be >= 1, got {self.epsilon}")
        if not 1 <= self.radix_bits <= 30:
            raise ValueError(f"radix_bits must be in [1, 30], got {self.radix_bits}")
        if not 0 < self.sample_rate <= 1:
            raise ValueError(f"sample_rate must be in (0, 1], got {self.sample_rate}")


def _initial_knn_rect(dataset: PartitionedDataset, q: KnnQuery) -> Rect:
    mbr = dataset.global_mbr
    area = mbr.area if mbr is not None else 0.0
    if area > 0:
        r = knn_initial_radius(q.k, max(1, dataset.total), area)
    else:
        r = queries._fallback_radius(mbr)
    p = q.point
    return Rect(p.x - r, p.y - r, p.x + r, p.y + r)


def global_filter(
    descriptors: list[GridDescriptor],
    q: QuerySpec,
    dataset: Optional[PartitionedDataset] = None,
) -> list[int]:
    """Partition ids whose MBR can qualify for the query (never a subset).

    Empty partitions are skipped; the overflow partition participates like
    any other through its computed MBR.  kNN queries filter against their
    density-seeded initial window (later rounds re-filter with the grown
    window), which needs the dataset for density.
    """
    if isinstance(q, PointQuery):
        return [
            d.id
            for d in descriptors
            if d.mbr is not None and rect_contains_point(d.mbr, q.point)
        ]
    if isinstance(q, JoinQuery):
        rects = [polygon_mbr(pg) for pg in q.polygons]
        return [
            d.id
            for d in descriptors
            if d.mbr is not None and any(rect_intersects(d.mbr, r) for r in rects)
        ]
    if isinstance(q, RangeQuery):
        rect = q.rect
    elif isinstance(q, CircleQuery):
        rect = q.circle.mbr()
    elif isinstance(q, KnnQuery):
        if dataset is None:
            raise ValueError("kNN filtering needs the dataset for its initial window")
        rect = _initial_knn_rect(dataset, q)
    else:
        raise TypeError(f"unknown query spec: {q!r}")
    return [d.id for d in descriptors if d.mbr is not None and rect_intersects(d.mbr, rect)]


class QueryEngine:
    """Executes queries over an immutable PartitionedDataset.

    Local searches for multi-candidate queries run on a transient thread
    pool of ``workers`` tasks; single-candidate queries run inline.  The
    merge step is order-independent, so results do not depend on the
    worker count.
    """

    def __init__(self, dataset: PartitionedDataset, workers: int = 8):
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self.dataset = dataset
        self.workers = workers

    # -- global filter ------------------------------------------------

    def candidates(self, q: QuerySpec) -> list[int]:
        return global_filter(self.dataset.descriptors, q, self.dataset)

    # -- partition-task fan-out ---------------------------------------

    def _run_tasks(self, ids: list[int], fn):
        """Apply fn to each candidate partition, preserving candidate order."""
        if len(ids) <= 1 or self.workers == 1:
            return [fn(pid) for pid in ids]
        with ThreadPoolExecutor(max_workers=min(self.workers, len(ids))) as pool:
            futures = [pool.submit(fn, pid) for pid in ids]
            return [f.result() for f in futures]

    def range_records(self, rect: Rect) -> np.ndarray:
        """All records inside the closed rect, merged canonically."""
        ds = self.dataset
        ids = self.candidates(RangeQuery(rect))

        def task(pid: int) -> np.ndarray:
            return local_range_search(
                ds.partitions[pid], ds.indexes[pid], rect, ds.key_strategy, ds.descriptors[pid].mbr
            )

        parts = self._run_tasks(ids, task)
        parts = [p for p in parts if len(p)]
        if not parts:
            return np.empty(0, dtype=RECORD_DTYPE)
        merged = parts[0] if len(parts) == 1 else np.concatenate(parts)
        order = np.lexsort((merged["payload"], merged["y"], merged["x"], merged["key"]))
        return merged[order]

    # -- execution ----------------------------------------------------

    def execute(self, q: QuerySpec) -> ResultSet:
        ds = self.dataset
        if isinstance(q, PointQuery):
            ids = self.candidates(q)
            hits = self._run_tasks(
                ids,
                lambda pid: local_point_search(
                    ds.partitions[pid], ds.indexes[pid], q.point, ds.key_strategy
                ),
            )
            return ResultSet(query=q, found=any(hits))
        if isinstance(q, RangeQuery):
            return ResultSet(query=q, records=self.range_records(q.rect))
        if isinstance(q, CircleQuery):
            return ResultSet(query=q, records=queries.circle_range_search(self, q.circle))
        if isinstance(q, KnnQuery):
            params = KnnParams(k=q.k, max_rounds=q.max_rounds)
            records, dists, rounds = queries.knn_query(self, q.point, params)
            return ResultSet(query=q, records=records, distances=dists, rounds=rounds)
        if isinstance(q, JoinQuery):
            groups = queries.spatial_join(self, list(q.polygons))
            return ResultSet(query=q, groups=groups)
        raise TypeError(f"unknown query spec: {q!r}")


def build_engine(
    xs: np.ndarray,
    ys: np.ndarray,
    payloads: Optional[np.ndarray] = None,
    config: Optional[EngineConfig] = None,
) -> QueryEngine:
    """Partition, sort, and index the points, returning a ready engine."""
    config = config or EngineConfig()
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if payloads is None:
        payloads = np.arange(len(xs), dtype=np.int64)
    strategy = config.partition_strategy
    if strategy is None:
        strategy = KDTree(max_leaf=auto_max_leaf(len(xs), config.sample_rate, config.workers))
    dataset = partition_dataset(
        xs,
        ys,
        payloads,
        strategy=strategy,
        key_strategy=config.key_strategy,
        epsilon=config.epsilon,
        radix_bits=config.radix_bits,
        sample_rate=config.sample_rate,
        seed=config.seed,
    )
    return QueryEngine(dataset, workers=config.workers)


def execute(dataset: PartitionedDataset, q: QuerySpec, workers: int = 8) -> ResultSet:
    """One-shot execution without keeping an engine around."""
    return QueryEngine(dataset, workers=workers).execute(q)
