"""lilis: a partition-parallel spatial query engine with learned spline indexes.

Points are spatially partitioned by a sample-driven grid, each partition is
sorted by a one-dimensional key and modeled by an error-bounded spline, and
queries run as a global MBR filter followed by concurrent exact local
searches.  ``LearnedSpatialIndex`` is the scikit-learn style entry point;
the lower-level modules expose every building block.
"""

from .estimator import LearnedSpatialIndex, check_points
from .geometry import Circle, Point, Polygon, Rect
from .partitioner import (
    AdaptiveGrid,
    FixedGrid,
    GridDescriptor,
    KDTree,
    PartitionedDataset,
    Quadtree,
    RTreeLeaves,
    partition_dataset,
)
from .runtime import (
    CircleQuery,
    EngineConfig,
    JoinQuery,
    KnnQuery,
    PointQuery,
    QueryEngine,
    RangeQuery,
    ResultSet,
    build_engine,
    execute,
    global_filter,
)
from .spline import AxisX, AxisY, SplineIndex, ZOrder, build_spline_index
from .storage import (
    CsvSchema,
    Gaussian,
    Skewed,
    SnapshotError,
    SyntheticSpec,
    Uniform,
    gen_synthetic,
    ingest_csv,
    load_snapshot,
    parse_polygons,
    save_snapshot,
)

__version__ = "0.1.0"

__all__ = [
    "LearnedSpatialIndex",
    "check_points",
    "Point",
    "Rect",
    "Polygon",
    "Circle",
    "AxisX",
    "AxisY",
    "ZOrder",
    "SplineIndex",
    "build_spline_index",
    "FixedGrid",
    "AdaptiveGrid",
    "Quadtree",
    "KDTree",
    "RTreeLeaves",
    "GridDescriptor",
    "PartitionedDataset",
    "partition_dataset",
    "PointQuery",
    "RangeQuery",
    "CircleQuery",
    "KnnQuery",
    "JoinQuery",
    "ResultSet",
    "EngineConfig",
    "QueryEngine",
    "build_engine",
    "execute",
    "global_filter",
    "CsvSchema",
    "SyntheticSpec",
    "Uniform",
    "Gaussian",
    "Skewed",
    "gen_synthetic",
    "ingest_csv",
    "parse_polygons",
    "save_snapshot",
    "load_snapshot",
    "SnapshotError",
    "__version__",
]
