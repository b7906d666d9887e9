"""Sampling-based spatial partitioning with an overflow grid.

A small uniform sample drives grid construction (fixed/adaptive grid,
quadtree, kd-tree, or R-tree leaves); every object then goes to the first
grid that contains it, or to the overflow partition when none does.  Each
partition is sorted by its projected key and gets a learned spline index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .geometry import Rect
from .rtree import str_leaf_mbrs
from .spline import KeyStrategy, SplineIndex, build_spline_index, project_keys

__all__ = [
    "FixedGrid",
    "AdaptiveGrid",
    "Quadtree",
    "KDTree",
    "RTreeLeaves",
    "PartitionStrategy",
    "GridDescriptor",
    "PartitionedDataset",
    "RECORD_DTYPE",
    "sample",
    "build_grids",
    "expand_to_cover",
    "assign",
    "partition_dataset",
]

RECORD_DTYPE = np.dtype([("key", "<f8"), ("x", "<f8"), ("y", "<f8"), ("payload", "<i8")])

_QUADTREE_MAX_DEPTH = 24


@dataclass(frozen=True)
class FixedGrid:
    """nx * ny uniform cells over the sample MBR."""

    nx: int = 8
    ny: int = 8

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid dimensions must be >= 1")


@dataclass(frozen=True)
class AdaptiveGrid:
    """nx * ny cells with edges at per-axis sample quantiles."""

    nx: int = 8
    ny: int = 8

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid dimensions must be >= 1")


@dataclass(frozen=True)
class Quadtree:
    """Recursive 4-way split of the sample until <= max_leaf points per leaf."""

    max_leaf: int = 256

    def __post_init__(self):
        if self.max_leaf < 1:
            raise ValueError("max_leaf must be >= 1")


@dataclass(frozen=True)
class KDTree:
    """Recursive alternating-axis median split until <= max_leaf points."""

    max_leaf: int = 256

    def __post_init__(self):
        if self.max_leaf < 1:
            raise ValueError("max_leaf must be >= 1")


@dataclass(frozen=True)
class RTreeLeaves:
    """Leaf MBRs of an STR-bulk-loaded R-tree over the sample.

    Leaves hug the sample, so objects outside every leaf land in the
    overflow partition; the other strategies expand to full coverage.
    """

    fanout: int = 64

    def __post_init__(self):
        if self.fanout < 2:
            raise ValueError("fanout must be >= 2")


PartitionStrategy = Union[FixedGrid, AdaptiveGrid, Quadtree, KDTree, RTreeLeaves]


@dataclass(frozen=True)
class GridDescriptor:
    """Coordinator-side view of one partition: id, tight MBR, counts."""

    id: int
    mbr: Optional[Rect]  # None iff the partition is empty
    overflow: bool
    count: int


@dataclass(frozen=True)
class PartitionedDataset:
    """Immutable partitioned dataset plus its per-partition learned indexes.

    ``partitions[i]`` is a RECORD_DTYPE array sorted canonically by
    (key, x, y, payload); ``indexes[i]`` is None iff the partition is empty.
    The last descriptor is always the overflow partition.
    """

    descriptors: list[GridDescriptor]
    partitions: list[np.ndarray]
    indexes: list[Optional[SplineIndex]]
    key_strategy: KeyStrategy
    epsilon: int
    radix_bits: int
    global_mbr: Optional[Rect]
    total: int

    def equals(self, other: "PartitionedDataset") -> bool:
        """Structural equality: descriptors, records, knots, radix, config."""
        if (
            self.key_strategy != other.key_strategy
            or self.epsilon != other.epsilon
            or self.radix_bits != other.radix_bits
            or self.global_mbr != other.global_mbr
            or self.total != other.total
            or self.descriptors != other.descriptors
            or len(self.partitions) != len(other.partitions)
        ):
            return False
        for mine, theirs in zip(self.partitions, other.partitions):
            if not np.array_equal(mine, theirs):
                return False
        for a, b in zip(self.indexes, other.indexes):
            if (a is None) != (b is None):
                return False
            if a is None:
                continue
            if a.epsilon != b.epsilon or a.size != b.size:
                return False
            if not np.array_equal(a.knot_keys, b.knot_keys):
                return False
            if not np.array_equal(a.knot_positions, b.knot_positions):
                return False
            if (a.radix is None) != (b.radix is None):
                return False
            if a.radix is not None:
                ra, rb = a.radix, b.radix
                if (ra.bits, ra.min_key, ra.max_key, ra.scale) != (rb.bits, rb.min_key, rb.max_key, rb.scale):
                    return False
                if not np.array_equal(ra.table, rb.table):
                    return False
        return True


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample(
    xs: np.ndarray, ys: np.ndarray, rate: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Uniform independent inclusion with probability ``rate``, seeded.

    Falls back to the first min(1000, N) points if the draw comes up empty.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    n = len(xs)
    if n == 0:
        raise ValueError("cannot sample an empty dataset")
    if not 0 < rate <= 1:
        raise ValueError(f"sampling rate must be in (0, 1], got {rate}")
    # salt the stream so a generator seeded identically for the data itself
    # cannot correlate with the inclusion draw
    rng = np.random.default_rng([seed, 0x5A11])
    mask = rng.random(n) < rate
    if not mask.any():
        k = min(1000, n)
        return xs[:k].copy(), ys[:k].copy()
    return xs[mask], ys[mask]


# ---------------------------------------------------------------------------
# Grid construction
# ---------------------------------------------------------------------------

def _points_mbr(xs: np.ndarray, ys: np.ndarray) -> Rect:
    return Rect(float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max()))


def _fixed_cells(mbr: Rect, nx: int, ny: int) -> list[Rect]:
    x_edges = np.linspace(mbr.x_lo, mbr.x_hi, nx + 1)
    y_edges = np.linspace(mbr.y_lo, mbr.y_hi, ny + 1)
    return _cells_from_edges(x_edges, y_edges)


def _cells_from_edges(x_edges: np.ndarray, y_edges: np.ndarray) -> list[Rect]:
    cells = []
    for iy in range(len(y_edges) - 1):
        for ix in range(len(x_edges) - 1):
            cells.append(
                Rect(
                    float(x_edges[ix]),
                    float(y_edges[iy]),
                    float(x_edges[ix + 1]),
                    float(y_edges[iy + 1]),
                )
            )
    return cells


def _adaptive_cells(xs: np.ndarray, ys: np.ndarray, nx: int, ny: int) -> list[Rect]:
    qs_x = np.quantile(xs, np.linspace(0.0, 1.0, nx + 1))
    qs_y = np.quantile(ys, np.linspace(0.0, 1.0, ny + 1))
    return _cells_from_edges(qs_x, qs_y)


def _quadtree_leaves(
    xs: np.ndarray, ys: np.ndarray, rect: Rect, max_leaf: int, depth: int, out: list[Rect]
) -> None:
    if len(xs) <= max_leaf or depth >= _QUADTREE_MAX_DEPTH:
        out.append(rect)
        return
    if (xs == xs[0]).all() and (ys == ys[0]).all():
        # coincident points can never be separated spatially
        out.append(rect)
        return
    cx = (rect.x_lo + rect.x_hi) / 2.0
    cy = (rect.y_lo + rect.y_hi) / 2.0
    west = xs < cx
    south = ys < cy
    quadrants = (
        (west & south, Rect(rect.x_lo, rect.y_lo, cx, cy)),
        (~west & south, Rect(cx, rect.y_lo, rect.x_hi, cy)),
        (west & ~south, Rect(rect.x_lo, cy, cx, rect.y_hi)),
        (~west & ~south, Rect(cx, cy, rect.x_hi, rect.y_hi)),
    )
    for mask, sub in quadrants:
        _quadtree_leaves(xs[mask], ys[mask], sub, max_leaf, depth + 1, out)


def _kdtree_leaves(
    xs: np.ndarray, ys: np.ndarray, rect: Rect, max_leaf: int, axis: int, out: list[Rect]
) -> None:
    n = len(xs)
    if n <= max_leaf:
        out.append(rect)
        return
    coords = xs if axis == 0 else ys
    order = np.argsort(coords, kind="stable")
    mid = n // 2
    split = float(coords[order[mid]])
    left, right = order[:mid], order[mid:]
    if axis == 0:
        rect_l = Rect(rect.x_lo, rect.y_lo, split, rect.y_hi)
        rect_r = Rect(split, rect.y_lo, rect.x_hi, rect.y_hi)
    else:
        rect_l = Rect(rect.x_lo, rect.y_lo, rect.x_hi, split)
        rect_r = Rect(rect.x_lo, split, rect.x_hi, rect.y_hi)
    _kdtree_leaves(xs[left], ys[left], rect_l, max_leaf, 1 - axis, out)
    _kdtree_leaves(xs[right], ys[right], rect_r, max_leaf, 1 - axis, out)


def build_grids(xs: np.ndarray, ys: np.ndarray, strategy: PartitionStrategy) -> list[Rect]:
    """Construct the grid list from a sample, in deterministic order."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if len(xs) == 0:
        raise ValueError("cannot build grids from an empty sample")
    mbr = _points_mbr(xs, ys)
    if isinstance(strategy, FixedGrid):
        return _fixed_cells(mbr, strategy.nx, strategy.ny)
    if isinstance(strategy, AdaptiveGrid):
        return _adaptive_cells(xs, ys, strategy.nx, strategy.ny)
    if isinstance(strategy, Quadtree):
        out: list[Rect] = []
        _quadtree_leaves(xs, ys, mbr, strategy.max_leaf, 0, out)
        return out
    if isinstance(strategy, KDTree):
        out = []
        _kdtree_leaves(xs, ys, mbr, strategy.max_leaf, 0, out)
        return out
    if isinstance(strategy, RTreeLeaves):
        return str_leaf_mbrs(xs, ys, strategy.fanout)
    raise TypeError(f"unknown partition strategy: {strategy!r}")


def expand_to_cover(grids: list[Rect], sample_mbr: Rect, data_mbr: Rect) -> list[Rect]:
    """Stretch cells on the sample-MBR boundary out to the full data MBR.

    Cells tile the sample MBR, so stretching only the outermost edges keeps
    the tiling while guaranteeing that no object overflows; R-tree leaves
    are deliberately never expanded.
    """
    out = []
    for g in grids:
        x_lo = min(g.x_lo, data_mbr.x_lo) if g.x_lo <= sample_mbr.x_lo else g.x_lo
        y_lo = min(g.y_lo, data_mbr.y_lo) if g.y_lo <= sample_mbr.y_lo else g.y_lo
        x_hi = max(g.x_hi, data_mbr.x_hi) if g.x_hi >= sample_mbr.x_hi else g.x_hi
        y_hi = max(g.y_hi, data_mbr.y_hi) if g.y_hi >= sample_mbr.y_hi else g.y_hi
        out.append(Rect(x_lo, y_lo, x_hi, y_hi))
    return out


# ---------------------------------------------------------------------------
# Assignment
# ---------------------------------------------------------------------------

def assign(
    xs: np.ndarray,
    ys: np.ndarray,
    payloads: np.ndarray,
    grids: list[Rect],
    key_strategy: KeyStrategy,
    epsilon: int = 32,
    radix_bits: int = 10,
) -> PartitionedDataset:
    """Route every object to the first grid that contains it; build indexes.

    Objects contained by no grid go to the overflow partition
    (id == len(grids)).  Each partition is then sorted by
    (key, x, y, payload) and indexed; descriptor MBRs are tightened to the
    members actually assigned.
    """
    if not grids:
        raise ValueError("grid list must be non-empty")
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    payloads = np.asarray(payloads, dtype=np.int64)
    n = len(xs)
    overflow_id = len(grids)
    ids = np.full(n, overflow_id, dtype=np.int64)
    unassigned = np.ones(n, dtype=bool)
    for gid, g in enumerate(grids):
        inside = unassigned & (xs >= g.x_lo) & (xs <= g.x_hi) & (ys >= g.y_lo) & (ys <= g.y_hi)
        ids[inside] = gid
        unassigned &= ~inside
        if not unassigned.any():
            break

    keys = project_keys(xs, ys, key_strategy)
    descriptors: list[GridDescriptor] = []
    partitions: list[np.ndarray] = []
    indexes: list[Optional[SplineIndex]] = []
    for pid in range(overflow_id + 1):
        member = np.flatnonzero(ids == pid)
        count = len(member)
        if count == 0:
            descriptors.append(GridDescriptor(id=pid, mbr=None, overflow=pid == overflow_id, count=0))
            empty = np.empty(0, dtype=RECORD_DTYPE)
            empty.flags.writeable = False
            partitions.append(empty)
            indexes.append(None)
            continue
        records = np.empty(count, dtype=RECORD_DTYPE)
        records["key"] = keys[member]
        records["x"] = xs[member]
        records["y"] = ys[member]
        records["payload"] = payloads[member]
        order = np.lexsort((records["payload"], records["y"], records["x"], records["key"]))
        records = records[order]
        records.flags.writeable = False
        mbr = Rect(
            float(records["x"].min()),
            float(records["y"].min()),
            float(records["x"].max()),
            float(records["y"].max()),
        )
        descriptors.append(
            GridDescriptor(id=pid, mbr=mbr, overflow=pid == overflow_id, count=count)
        )
        partitions.append(records)
        indexes.append(build_spline_index(records["key"], epsilon, radix_bits))

    global_mbr = _points_mbr(xs, ys) if n else None
    return PartitionedDataset(
        descriptors=descriptors,
        partitions=partitions,
        indexes=indexes,
        key_strategy=key_strategy,
        epsilon=int(epsilon),
        radix_bits=int(radix_bits),
        global_mbr=global_mbr,
        total=n,
    )


def partition_dataset(
    xs: np.ndarray,
    ys: np.ndarray,
    payloads: np.ndarray,
    strategy: PartitionStrategy,
    key_strategy: KeyStrategy,
    epsilon: int = 32,
    radix_bits: int = 10,
    sample_rate: float = 0.01,
    seed: int = 0,
) -> PartitionedDataset:
    """Full build pipeline: sample, construct grids, assign, sort, index."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if len(xs) == 0:
        raise ValueError("cannot partition an empty dataset")
    payloads = np.asarray(payloads, dtype=np.int64)
    sx, sy = sample(xs, ys, sample_rate, seed)
    grids = build_grids(sx, sy, strategy)
    if not isinstance(strategy, RTreeLeaves):
        grids = expand_to_cover(grids, _points_mbr(sx, sy), _points_mbr(xs, ys))
    return assign(xs, ys, payloads, grids, key_strategy, epsilon, radix_bits)


def auto_max_leaf(n_total: int, sample_rate: float, workers: int) -> int:
    """Leaf-size heuristic: aim for roughly 2x worker-count partitions."""
    expected_sample = max(1, int(n_total * sample_rate))
    target_leaves = max(1, 2 * workers)
    return max(1, -(-expected_sample // target_leaves))
