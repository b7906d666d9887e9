"""STR-bulk-loaded R-tree over points.

Serves two roles: the leaf-MBR engine behind the R-tree partitioning
strategy, and the traditional-index baseline the benchmark harness compares
build cost and range latency against.  The tree is immutable after loading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Rect, rect_envelops, rect_intersects

__all__ = ["RTreeNode", "RTree", "str_bulk_load", "str_leaf_mbrs", "rtree_range"]


@dataclass
class RTreeNode:
    """Internal node (children set) or leaf (entries set, as source indices)."""

    mbr: Rect
    children: Optional[list["RTreeNode"]] = None
    entries: Optional[np.ndarray] = None

    @property
    def is_leaf(self) -> bool:
        return self.entries is not None


@dataclass
class RTree:
    """Root node plus the coordinate arrays its leaves index into."""

    root: RTreeNode
    xs: np.ndarray
    ys: np.ndarray
    payloads: np.ndarray
    fanout: int


def _str_tiles(
    xs: np.ndarray, ys: np.ndarray, tiebreak: np.ndarray, fanout: int
) -> list[np.ndarray]:
    """Classic Sort-Tile-Recursive packing of one level.

    Sort by (x, y, tiebreak), slice into ceil(sqrt(n / fanout)) vertical
    slabs, re-sort each slab by (y, x, tiebreak), and cut runs of
    ``fanout``.  Returns the index groups in packing order.
    """
    n = len(xs)
    order = np.lexsort((tiebreak, ys, xs))
    n_slabs = max(1, math.ceil(math.sqrt(n / fanout)))
    slab_size = math.ceil(n / n_slabs)
    groups: list[np.ndarray] = []
    for s0 in range(0, n, slab_size):
        slab = order[s0 : s0 + slab_size]
        sub = np.lexsort((tiebreak[slab], xs[slab], ys[slab]))
        slab = slab[sub]
        for o in range(0, len(slab), fanout):
            groups.append(slab[o : o + fanout])
    return groups


def _group_mbrs(
    groups: list[np.ndarray], xs: np.ndarray, ys: np.ndarray
) -> list[Rect]:
    return [
        Rect(
            float(xs[g].min()),
            float(ys[g].min()),
            float(xs[g].max()),
            float(ys[g].max()),
        )
        for g in groups
    ]


def str_leaf_mbrs(xs: np.ndarray, ys: np.ndarray, fanout: int = 64) -> list[Rect]:
    """Leaf MBRs of an STR packing, in deterministic packing order."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if len(xs) == 0:
        raise ValueError("cannot bulk-load an empty point set")
    if fanout < 2:
        raise ValueError(f"fanout must be >= 2, got {fanout}")
    groups = _str_tiles(xs, ys, np.arange(len(xs)), fanout)
    return _group_mbrs(groups, xs, ys)


def str_bulk_load(
    xs: np.ndarray,
    ys: np.ndarray,
    payloads: Optional[np.ndarray] = None,
    fanout: int = 64,
) -> RTree:
    """Bulk-load the full tree: STR leaves, then STR packing of MBR centers upward."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    n = len(xs)
    if n == 0:
        raise ValueError("cannot bulk-load an empty point set")
    if fanout < 2:
        raise ValueError(f"fanout must be >= 2, got {fanout}")
    if payloads is None:
        payloads = np.arange(n, dtype=np.int64)
    else:
        payloads = np.asarray(payloads, dtype=np.int64)

    groups = _str_tiles(xs, ys, payloads, fanout)
    mbrs = _group_mbrs(groups, xs, ys)
    nodes = [RTreeNode(mbr=m, entries=g) for m, g in zip(mbrs, groups)]
    while len(nodes) > 1:
        cx = np.array([(nd.mbr.x_lo + nd.mbr.x_hi) / 2.0 for nd in nodes])
        cy = np.array([(nd.mbr.y_lo + nd.mbr.y_hi) / 2.0 for nd in nodes])
        idx = np.arange(len(nodes))
        parent_groups = _str_tiles(cx, cy, idx, fanout)
        parents = []
        for g in parent_groups:
            kids = [nodes[i] for i in g]
            mbr = Rect(
                min(k.mbr.x_lo for k in kids),
                min(k.mbr.y_lo for k in kids),
                max(k.mbr.x_hi for k in kids),
                max(k.mbr.y_hi for k in kids),
            )
            parents.append(RTreeNode(mbr=mbr, children=kids))
        nodes = parents
    return RTree(root=nodes[0], xs=xs, ys=ys, payloads=payloads, fanout=fanout)


def rtree_range(tree: RTree, q: Rect) -> np.ndarray:
    """Indices of all points inside the closed rect q, canonically ordered.

    Canonical order for the baseline is (x, y, payload).
    """
    hits: list[np.ndarray] = []
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if not rect_intersects(node.mbr, q):
            continue
        if node.is_leaf:
            e = node.entries
            if rect_envelops(q, node.mbr):
                hits.append(e)
                continue
            ex, ey = tree.xs[e], tree.ys[e]
            mask = (ex >= q.x_lo) & (ex <= q.x_hi) & (ey >= q.y_lo) & (ey <= q.y_hi)
            if mask.any():
                hits.append(e[mask])
        else:
            stack.extend(node.children)
    if not hits:
        return np.empty(0, dtype=np.int64)
    found = np.concatenate(hits)
    order = np.lexsort((tree.payloads[found], tree.ys[found], tree.xs[found]))
    return found[order]
