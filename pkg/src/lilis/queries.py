"""Local search algorithms executed inside candidate partitions.

Point lookup, key-interval range scan with an envelope short-circuit,
density-seeded expanding-window kNN, and broadcast polygon join.  All
results are exact; the learned index only narrows where scans start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import (
    Circle,
    Point,
    Polygon,
    Rect,
    points_in_polygon_mask,
    polygon_mbr,
    rect_envelops,
)
from .spline import AxisX, AxisY, KeyStrategy, SplineIndex, predict, project_key

__all__ = [
    "KnnParams",
    "local_point_search",
    "local_range_search",
    "circle_range_search",
    "knn_initial_radius",
    "knn_round_bound",
    "knn_query",
    "spatial_join",
]


@dataclass(frozen=True)
class KnnParams:
    """k plus the window-growth safety knobs."""

    k: int
    max_rounds: int = 64
    growth_k1: float = 2.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.max_rounds < 1:
            raise ValueError(f"max_rounds must be >= 1, got {self.max_rounds}")


def _key_interval(q: Rect, strategy: KeyStrategy) -> tuple[float, float]:
    """Key range guaranteed to contain every point inside q.

    Axis keys give the exact coordinate interval; Z-order gives the
    superset interval between the codes of the low and high corners.
    """
    if isinstance(strategy, AxisX):
        return q.x_lo, q.x_hi
    if isinstance(strategy, AxisY):
        return q.y_lo, q.y_hi
    lo = project_key(Point(q.x_lo, q.y_lo), strategy)
    hi = project_key(Point(q.x_hi, q.y_hi), strategy)
    return lo, hi


def _first_at_or_above(keys: np.ndarray, index: SplineIndex, key: float) -> int:
    """Smallest i with keys[i] >= key, located via the learned corridor."""
    n = len(keys)
    _, lo, hi = predict(index, key)
    i = lo + int(np.searchsorted(keys[lo : hi + 1], key, side="left"))
    while i > 0 and keys[i - 1] >= key:
        i -= 1
    while i < n and keys[i] < key:
        i += 1
    return i


def _first_above(keys: np.ndarray, index: SplineIndex, key: float) -> int:
    """Smallest i with keys[i] > key."""
    n = len(keys)
    _, lo, hi = predict(index, key)
    i = lo + int(np.searchsorted(keys[lo : hi + 1], key, side="right"))
    while i < n and keys[i] <= key:
        i += 1
    while i > 0 and keys[i - 1] > key:
        i -= 1
    return i


def local_point_search(
    records: np.ndarray,
    index: Optional[SplineIndex],
    q: Point,
    strategy: KeyStrategy,
) -> bool:
    """Exact membership test for q in one key-sorted partition.

    Binary-search the projected key inside the predicted corridor, then
    scan forward and backward across the equal-key run comparing exact
    (x, y) coordinates.
    """
    n = len(records)
    if n == 0 or index is None:
        return False
    key = project_key(q, strategy)
    keys = records["key"]
    _, lo, hi = predict(index, key)
    i = lo + int(np.searchsorted(keys[lo : hi + 1], key, side="left"))
    if i > hi or keys[i] != key:
        return False
    xs, ys = records["x"], records["y"]
    p = i
    while p < n and keys[p] == key:
        if xs[p] == q.x and ys[p] == q.y:
            return True
        p += 1
    p = i - 1
    while p >= 0 and keys[p] == key:
        if xs[p] == q.x and ys[p] == q.y:
            return True
        p -= 1
    return False


def local_range_search(
    records: np.ndarray,
    index: Optional[SplineIndex],
    q: Rect,
    strategy: KeyStrategy,
    partition_mbr: Optional[Rect],
) -> np.ndarray:
    """All partition records inside the closed rect q, in partition order.

    When q envelops the whole partition MBR, the records are returned
    without per-object checks.  Otherwise the learned index locates the
    key interval and a vectorized containment filter refines the slice
    (Z-order intervals are supersets, so the refine step is what makes
    them exact).
    """
    n = len(records)
    if n == 0 or index is None:
        return records[:0]
    if partition_mbr is not None and rect_envelops(q, partition_mbr):
        return records
    klo, khi = _key_interval(q, strategy)
    keys = records["key"]
    start = _first_at_or_above(keys, index, klo)
    stop = _first_above(keys, index, khi)
    if start >= stop:
        return records[:0]
    chunk = records[start:stop]
    xs, ys = chunk["x"], chunk["y"]
    mask = (xs >= q.x_lo) & (xs <= q.x_hi) & (ys >= q.y_lo) & (ys <= q.y_hi)
    return chunk[mask]


def circle_range_search(engine, c: Circle) -> np.ndarray:
    """Rect query over the circle's MBR, refined by exact distance."""
    candidates = engine.range_records(c.mbr())
    if len(candidates) == 0:
        return candidates
    dx = candidates["x"] - c.center.x
    dy = candidates["y"] - c.center.y
    keep = np.hypot(dx, dy) <= c.radius
    return candidates[keep]


def knn_initial_radius(k: int, n: int, area: float) -> float:
    """First search radius from the dataset density: r = sqrt(k * area / (pi * n))."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if area <= 0:
        raise ValueError(f"area must be positive, got {area}")
    return math.sqrt(k * area / (math.pi * n))


def knn_round_bound(k: int, n: int, data_mbr: Rect) -> int:
    """Upper bound on range-query rounds for a k >= 2 nearest-neighbor search.

    ceil((ln diagonal - ln r0) / ln(4k / (pi (k - 1)))), floored at 1,
    where r0 is the density-seeded initial radius.  Undefined at k = 1
    (the growth policy for k = 1 simply doubles the radius).
    """
    if k < 2:
        raise ValueError("round bound is undefined for k < 2")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    w, h = data_mbr.width, data_mbr.height
    if w <= 0 or h <= 0:
        raise ValueError("data MBR must be non-degenerate")
    diagonal = math.hypot(w, h)
    r0 = math.sqrt(k * w * h / (math.pi * n))
    growth = 4.0 * k / (math.pi * (k - 1))
    bound = math.ceil((math.log(diagonal) - math.log(r0)) / math.log(growth))
    return max(1, bound)


def _knn_growth(k: int, growth_k1: float) -> float:
    if k == 1:
        return growth_k1
    return 4.0 * k / (math.pi * (k - 1))


def _fallback_radius(mbr: Optional[Rect]) -> float:
    """Half-diagonal of a point-expanded box when the data MBR has no area."""
    if mbr is None:
        return 1.0
    w = mbr.width if mbr.width > 0 else 1.0
    h = mbr.height if mbr.height > 0 else 1.0
    return 0.5 * math.hypot(w, h)


def _top_k(records: np.ndarray, dists: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """k nearest under the (distance, key, x, y, payload) tie-break."""
    order = np.lexsort((records["payload"], records["y"], records["x"], records["key"], dists))
    take = order[:k]
    return records[take], dists[take]


def knn_query(engine, q: Point, params: KnnParams) -> tuple[np.ndarray, np.ndarray, int]:
    """Exact k nearest neighbors via expanding square range queries.

    Start from the density-seeded radius; while fewer than k candidates
    turn up, grow the window and repeat.  Once k candidates exist, the
    k-th distance decides: if it fits inside the window the answer is
    final, otherwise one extra window of that half-width closes the
    corner gap.  Returns (records, distances, rounds_used).
    """
    k = params.k
    n = engine.dataset.total
    if k > n:
        raise ValueError(f"k={k} exceeds dataset size {n}")
    mbr = engine.dataset.global_mbr
    area = mbr.area if mbr is not None else 0.0
    if area > 0:
        r = knn_initial_radius(k, n, area)
    else:
        r = _fallback_radius(mbr)
    growth = _knn_growth(k, params.growth_k1)
    rounds = 0
    while True:
        rounds += 1
        window = Rect(q.x - r, q.y - r, q.x + r, q.y + r)
        candidates = engine.range_records(window)
        if len(candidates) >= k:
            dists = np.hypot(candidates["x"] - q.x, candidates["y"] - q.y)
            top, top_d = _top_k(candidates, dists, k)
            d_k = float(top_d[-1])
            if d_k <= r:
                return top, top_d, rounds
            rounds += 1
            window = Rect(q.x - d_k, q.y - d_k, q.x + d_k, q.y + d_k)
            candidates = engine.range_records(window)
            dists = np.hypot(candidates["x"] - q.x, candidates["y"] - q.y)
            top, top_d = _top_k(candidates, dists, k)
            return top, top_d, rounds
        if rounds >= params.max_rounds:
            raise RuntimeError(
                f"kNN did not gather {k} candidates within {params.max_rounds} rounds"
            )
        r *= growth


def spatial_join(engine, polygons: list[Polygon]) -> list[tuple[str, np.ndarray]]:
    """Point-in-polygon join: MBR range filter, then exact refinement.

    Returns one (polygon id, matching records) group per input polygon, in
    input order; records within a group keep canonical order.
    """
    if not polygons:
        raise ValueError("polygon list must be non-empty")
    out: list[tuple[str, np.ndarray]] = []
    for pg in polygons:
        candidates = engine.range_records(polygon_mbr(pg))
        if len(candidates) == 0:
            out.append((pg.id, candidates))
            continue
        mask = points_in_polygon_mask(pg, candidates["x"], candidates["y"])
        out.append((pg.id, candidates[mask]))
    return out
