"""Scikit-learn style front end for the learned spatial index.

``LearnedSpatialIndex`` follows the estimator protocol (``fit`` /
``get_params`` / ``set_params``), so it clones, pipelines, and
grid-searches like any other sklearn object while exposing the exact
spatial query surface: membership, rectangle, circle, k nearest
neighbors, and polygon join.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator

from .geometry import Circle, Point, Polygon, Rect
from .partitioner import (
    AdaptiveGrid,
    FixedGrid,
    KDTree,
    Quadtree,
    RTreeLeaves,
    auto_max_leaf,
)
from .queries import circle_range_search
from .runtime import (
    EngineConfig,
    JoinQuery,
    KnnQuery,
    PointQuery,
    QueryEngine,
    build_engine,
)
from .spline import KEY_NAMES, AxisX, AxisY, ZOrder, key_tag
from .storage import load_snapshot, save_snapshot

__all__ = ["LearnedSpatialIndex", "check_points"]

_PARTITIONERS = ("fixed", "adaptive", "quadtree", "kdtree", "rtree")
_KEYS = ("x", "y", "zorder")


def check_points(X) -> np.ndarray:
    """Validate a point matrix: float64 array of shape (n, 2), all finite."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1 and X.shape[0] == 2:
        X = X.reshape(1, 2)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) point array, got shape {X.shape}")
    if len(X) == 0:
        raise ValueError("point array is empty")
    if not np.isfinite(X).all():
        raise ValueError("point coordinates must be finite")
    return X


class LearnedSpatialIndex(BaseEstimator):
    """Partition-parallel spatial index with per-partition learned splines.

    Parameters
    ----------
    partitioner : {"fixed", "adaptive", "quadtree", "kdtree", "rtree"}, default="kdtree"
        Grid construction strategy run over a small sample of the data.
    key : {"x", "y", "zorder"}, default="x"
        One-dimensional sort key the learned index models.
    epsilon : int, default=32
        Position error bound of the spline model.
    radix_bits : int, default=10
        log2 of the radix table size used to narrow knot searches.
    sample_rate : float, default=0.01
        Fraction of points sampled for grid construction.
    workers : int, default=8
        Concurrent local-search tasks per query.
    nx, ny : int, default=8
        Cell counts for the grid partitioners.
    max_leaf : int or None, default=None
        Leaf capacity for quadtree/kd-tree partitioners; None picks a size
        that aims for about twice ``workers`` partitions.
    fanout : int, default=64
        R-tree fanout (partitioner and baseline).
    zorder_bits : int, default=16
        Bits per axis when ``key="zorder"``.
    random_state : int, default=0
        Seed for sampling; the whole build is deterministic under it.

    Examples
    --------
    >>> import numpy as np
    >>> from lilis import LearnedSpatialIndex
    >>> X = np.random.default_rng(0).random((1000, 2))
    >>> idx = LearnedSpatialIndex().fit(X)
    >>> bool(idx.contains(X[:1])[0])
    True
    >>> dist, ind = idx.kneighbors(X[:2], n_neighbors=3)
    >>> ind.shape
    (2, 3)
    """

    def __init__(
        self,
        partitioner: str = "kdtree",
        key: str = "x",
        epsilon: int = 32,
        radix_bits: int = 10,
        sample_rate: float = 0.01,
        workers: int = 8,
        nx: int = 8,
        ny: int = 8,
        max_leaf: Optional[int] = None,
        fanout: int = 64,
        zorder_bits: int = 16,
        random_state: int = 0,
    ):
        self.partitioner = partitioner
        self.key = key
        self.epsilon = epsilon
        self.radix_bits = radix_bits
        self.sample_rate = sample_rate
        self.workers = workers
        self.nx = nx
        self.ny = ny
        self.max_leaf = max_leaf
        self.fanout = fanout
        self.zorder_bits = zorder_bits
        self.random_state = random_state

    # -- configuration ---------------------------------------------------

    def _partition_strategy(self, n: int):
        if self.partitioner not in _PARTITIONERS:
            raise ValueError(
                f"partitioner must be one of {_PARTITIONERS}, got {self.partitioner!r}"
            )
        max_leaf = self.max_leaf
        if max_leaf is None:
            max_leaf = auto_max_leaf(n, self.sample_rate, self.workers)
        return {
            "fixed": FixedGrid(self.nx, self.ny),
            "adaptive": AdaptiveGrid(self.nx, self.ny),
            "quadtree": Quadtree(max_leaf),
            "kdtree": KDTree(max_leaf),
            "rtree": RTreeLeaves(self.fanout),
        }[self.partitioner]

    def _key_strategy(self, X: np.ndarray):
        if self.key not in _KEYS:
            raise ValueError(f"key must be one of {_KEYS}, got {self.key!r}")
        if self.key == "x":
            return AxisX()
        if self.key == "y":
            return AxisY()
        domain = Rect(
            float(X[:, 0].min()),
            float(X[:, 1].min()),
            float(X[:, 0].max()),
            float(X[:, 1].max()),
        )
        if domain.width <= 0 or domain.height <= 0:
            domain = Rect(domain.x_lo, domain.y_lo, domain.x_lo + 1.0, domain.y_lo + 1.0)
        return ZOrder(bits_per_dim=self.zorder_bits, domain=domain)

    # -- estimator protocol -----------------------------------------------

    def fit(self, X, y=None) -> "LearnedSpatialIndex":
        """Partition and index the points in X.

        ``y``, when given, supplies integer payload identifiers; otherwise
        payloads are the row indices of X, which is what ``kneighbors``
        reports back.
        """
        X = check_points(X)
        if y is not None:
            payloads = np.asarray(y, dtype=np.int64)
            if payloads.shape != (len(X),):
                raise ValueError("y must be one integer payload per row of X")
        else:
            payloads = np.arange(len(X), dtype=np.int64)
        config = EngineConfig(
            workers=self.workers,
            key_strategy=self._key_strategy(X),
            epsilon=self.epsilon,
            radix_bits=self.radix_bits,
            partition_strategy=self._partition_strategy(len(X)),
            sample_rate=self.sample_rate,
            seed=self.random_state,
        )
        self.engine_ = build_engine(X[:, 0], X[:, 1], payloads, config)
        self.dataset_ = self.engine_.dataset
        self.n_samples_ = len(X)
        return self

    def _check_fitted(self) -> QueryEngine:
        engine = getattr(self, "engine_", None)
        if engine is None:
            raise RuntimeError("this index is not fitted; call fit or load first")
        return engine

    # -- queries -----------------------------------------------------------

    def contains(self, X) -> np.ndarray:
        """Exact membership test per query point; boolean array."""
        engine = self._check_fitted()
        X = check_points(X)
        return np.array(
            [engine.execute(PointQuery(Point(x, y))).found for x, y in X], dtype=bool
        )

    def query_range(self, bounds) -> np.ndarray:
        """All indexed records inside the closed rectangle (x_lo, y_lo, x_hi, y_hi)."""
        engine = self._check_fitted()
        x_lo, y_lo, x_hi, y_hi = (float(v) for v in bounds)
        return engine.range_records(Rect(x_lo, y_lo, x_hi, y_hi))

    def query_circle(self, center, radius: float) -> np.ndarray:
        """All indexed records within ``radius`` of ``center``."""
        engine = self._check_fitted()
        cx, cy = (float(v) for v in center)
        return circle_range_search(engine, Circle(Point(cx, cy), float(radius)))

    def kneighbors(self, X, n_neighbors: int = 10) -> tuple[np.ndarray, np.ndarray]:
        """Exact k nearest neighbors for each query row.

        Returns (distances, payloads), each of shape (len(X), n_neighbors);
        with default payloads these are row indices into the fitted X.
        """
        engine = self._check_fitted()
        X = check_points(X)
        dists = np.empty((len(X), n_neighbors), dtype=np.float64)
        ids = np.empty((len(X), n_neighbors), dtype=np.int64)
        for i, (x, y) in enumerate(X):
            rs = engine.execute(KnnQuery(Point(x, y), k=n_neighbors))
            dists[i] = rs.distances
            ids[i] = rs.records["payload"]
        return dists, ids

    def join(self, polygons: list[Polygon]) -> list[tuple[str, np.ndarray]]:
        """Polygon containment join; one (polygon id, records) group per polygon."""
        engine = self._check_fitted()
        return engine.execute(JoinQuery(tuple(polygons))).groups

    # -- persistence ---------------------------------------------------------

    def save(self, path: str) -> None:
        """Write the fitted index to a snapshot file."""
        self._check_fitted()
        save_snapshot(self.dataset_, path)

    @classmethod
    def load(cls, path: str, workers: int = 8) -> "LearnedSpatialIndex":
        """Restore a fitted index from a snapshot.

        The loaded estimator serves queries; build parameters that are not
        part of the snapshot (partitioner shape knobs) keep their defaults.
        """
        dataset = load_snapshot(path)
        est = cls(
            epsilon=dataset.epsilon,
            radix_bits=dataset.radix_bits,
            workers=workers,
            key=KEY_NAMES[key_tag(dataset.key_strategy)],
        )
        est.engine_ = QueryEngine(dataset, workers=workers)
        est.dataset_ = dataset
        est.n_samples_ = dataset.total
        return est
