"""Independent brute-force oracles the engine is checked against.

Every oracle works straight off flat record arrays with no partitioning,
no learned index, and no filter phase, so agreement with the engine is
meaningful evidence of correctness.
"""

import numpy as np

from lilis.geometry import Point, point_in_polygon


def canonical(records: np.ndarray) -> np.ndarray:
    """Sort records by (key, x, y, payload)."""
    order = np.lexsort((records["payload"], records["y"], records["x"], records["key"]))
    return records[order]


def all_records(dataset) -> np.ndarray:
    parts = [p for p in dataset.partitions if len(p)]
    return canonical(np.concatenate(parts))


def brute_point(records: np.ndarray, x: float, y: float) -> bool:
    return bool(np.any((records["x"] == x) & (records["y"] == y)))


def brute_range(records: np.ndarray, rect) -> np.ndarray:
    xs, ys = records["x"], records["y"]
    mask = (xs >= rect.x_lo) & (xs <= rect.x_hi) & (ys >= rect.y_lo) & (ys <= rect.y_hi)
    return canonical(records[mask])


def brute_circle(records: np.ndarray, cx: float, cy: float, r: float) -> np.ndarray:
    d = np.hypot(records["x"] - cx, records["y"] - cy)
    return canonical(records[d <= r])


def brute_knn(records: np.ndarray, qx: float, qy: float, k: int):
    d = np.hypot(records["x"] - qx, records["y"] - qy)
    order = np.lexsort((records["payload"], records["y"], records["x"], records["key"], d))
    take = order[:k]
    return records[take], d[take]


def brute_join(records: np.ndarray, polygons):
    """Nested-loop containment join; one (id, records) group per polygon."""
    out = []
    for pg in polygons:
        keep = np.array(
            [point_in_polygon(pg, Point(float(x), float(y))) for x, y in zip(records["x"], records["y"])],
            dtype=bool,
        )
        out.append((pg.id, canonical(records[keep])))
    return out


def winding_inside_convex(pg, px: float, py: float) -> bool:
    """Convex-only containment via consistent cross-product signs (boundary inclusive)."""
    verts = pg.vertices
    sign = 0
    for a, b in zip(verts, verts[1:] + verts[:1]):
        cross = (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x)
        if cross == 0:
            continue
        s = 1 if cross > 0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            return False
    return True
