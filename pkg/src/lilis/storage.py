"""Data in and out: CSV points, polygon files, synthetic data, snapshots.

Snapshot format ("LILIS1"): little-endian throughout.

    magic        6 bytes  b"LILIS1"
    version      u16      currently 1
    total        u64      object count across all partitions
    partitions   u32      descriptor count (overflow included)
    key tag      u8       0 = x axis, 1 = y axis, 2 = z-order
    zorder bits  u8       0 unless z-order
    zorder dom   4 f64    zeros unless z-order
    epsilon      u32
    radix bits   u32

followed by one block per partition, each protected by a trailing CRC32:

    id u32, overflow u8, has_mbr u8, mbr 4 f64, count u64,
    records count*32B (key f64, x f64, y f64, payload i64),
    knots u32, knot keys f64..., knot positions u64...,
    has_radix u8 [, bits u32, min f64, max f64, scale f64,
                   slots u32, table slots*u32],
    crc32 u32 over everything above in the block.
"""

from __future__ import annotations

import csv
import math
import struct
import zlib
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .geometry import Point, Polygon, Rect
from .partitioner import RECORD_DTYPE, GridDescriptor, PartitionedDataset
from .spline import (
    AxisX,
    AxisY,
    KeyStrategy,
    RadixTable,
    SplineIndex,
    ZOrder,
    key_tag,
    string_to_key,
)

__all__ = [
    "CsvSchema",
    "IngestResult",
    "ingest_csv",
    "parse_polygons",
    "Uniform",
    "Gaussian",
    "Skewed",
    "SyntheticSpec",
    "gen_synthetic",
    "generate_convex_polygons",
    "SnapshotError",
    "save_snapshot",
    "load_snapshot",
]

MAGIC = b"LILIS1"
VERSION = 1
_HEADER = struct.Struct("<6sHQIBB4dII")
HEADER_SIZE = _HEADER.size
_BLOCK_HEAD = struct.Struct("<IBB4dQ")
_RADIX_HEAD = struct.Struct("<IdddI")

_ZIPF_BUCKETS = 1024


class SnapshotError(Exception):
    """Raised for malformed, truncated, or corrupted snapshot files."""


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CsvSchema:
    """Column layout of a point CSV file."""

    x_column: int = 0
    y_column: int = 1
    payload_column: Optional[int] = None
    delimiter: str = ","
    has_header: bool = False

    def __post_init__(self):
        if self.x_column == self.y_column:
            raise ValueError("x_column and y_column must differ")


@dataclass
class IngestResult:
    """Parsed coordinates plus how many source rows were skipped."""

    xs: np.ndarray
    ys: np.ndarray
    payloads: np.ndarray
    skipped: int


def _parse_payload(raw: str) -> int:
    """Integer payloads pass through; anything else gets the 64-bit string hash."""
    try:
        return int(raw)
    except ValueError:
        unsigned = string_to_key(raw) if raw else 0
        return unsigned - (1 << 64) if unsigned >= (1 << 63) else unsigned


def ingest_csv(path: str, schema: CsvSchema = CsvSchema()) -> IngestResult:
    """Read points from CSV, skipping and counting malformed rows.

    Payload defaults to the valid-row ordinal, so it doubles as a stable
    row identifier.
    """
    xs: list[float] = []
    ys: list[float] = []
    payloads: list[int] = []
    skipped = 0
    needed = max(
        schema.x_column,
        schema.y_column,
        schema.payload_column if schema.payload_column is not None else 0,
    )
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        if schema.has_header:
            next(reader, None)
        for row in reader:
            if len(row) <= needed:
                skipped += 1
                continue
            try:
                x = float(row[schema.x_column])
                y = float(row[schema.y_column])
            except ValueError:
                skipped += 1
                continue
            if not (math.isfinite(x) and math.isfinite(y)):
                skipped += 1
                continue
            if schema.payload_column is not None:
                payloads.append(_parse_payload(row[schema.payload_column]))
            else:
                payloads.append(len(xs))
            xs.append(x)
            ys.append(y)
    if not xs:
        raise ValueError(f"no valid rows in {path}")
    return IngestResult(
        xs=np.array(xs, dtype=np.float64),
        ys=np.array(ys, dtype=np.float64),
        payloads=np.array(payloads, dtype=np.int64),
        skipped=skipped,
    )


# ---------------------------------------------------------------------------
# Polygon files: one per line, "id;x1,y1 x2,y2 x3,y3 ..."
# ---------------------------------------------------------------------------

def parse_polygons(path: str) -> tuple[list[Polygon], int]:
    """Parse the line-oriented polygon format; returns (polygons, skipped)."""
    polygons: list[Polygon] = []
    skipped = 0
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            pid, _, coords = line.partition(";")
            verts = []
            ok = bool(pid) and bool(coords)
            if ok:
                for token in coords.split():
                    parts = token.split(",")
                    try:
                        x, y = float(parts[0]), float(parts[1])
                    except (IndexError, ValueError):
                        ok = False
                        break
                    if not (math.isfinite(x) and math.isfinite(y)):
                        ok = False
                        break
                    verts.append(Point(x, y))
            if not ok or len(verts) < 3:
                skipped += 1
                continue
            polygons.append(Polygon(id=pid, vertices=tuple(verts)))
    if not polygons:
        raise ValueError(f"no valid polygons in {path}")
    return polygons, skipped


def write_polygons(polygons: list[Polygon], path: str) -> None:
    """Inverse of parse_polygons, used by the generator CLI."""
    with open(path, "w") as fh:
        for pg in polygons:
            coords = " ".join(f"{v.x!r},{v.y!r}" for v in pg.vertices)
            fh.write(f"{pg.id};{coords}\n")


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Uniform:
    pass


@dataclass(frozen=True)
class Gaussian:
    clusters: int = 4
    sigma: float = 0.05  # standard deviation in domain units

    def __post_init__(self):
        if self.clusters < 1:
            raise ValueError("clusters must be >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class Skewed:
    zipf_s: float = 1.2

    def __post_init__(self):
        if self.zipf_s <= 0:
            raise ValueError("zipf_s must be positive")


Distribution = Union[Uniform, Gaussian, Skewed]


@dataclass(frozen=True)
class SyntheticSpec:
    distribution: Distribution
    n: int
    domain: Rect = Rect(0.0, 0.0, 1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")


def gen_synthetic(spec: SyntheticSpec) -> IngestResult:
    """Seeded synthetic points; payloads are 0..n-1 ordinals."""
    rng = np.random.default_rng(spec.seed)
    dom = spec.domain
    n = spec.n
    dist = spec.distribution
    if isinstance(dist, Uniform):
        xs = rng.uniform(dom.x_lo, dom.x_hi, n)
        ys = rng.uniform(dom.y_lo, dom.y_hi, n)
    elif isinstance(dist, Gaussian):
        centers_x = rng.uniform(dom.x_lo, dom.x_hi, dist.clusters)
        centers_y = rng.uniform(dom.y_lo, dom.y_hi, dist.clusters)
        pick = rng.integers(0, dist.clusters, n)
        xs = np.clip(centers_x[pick] + rng.normal(0.0, dist.sigma, n), dom.x_lo, dom.x_hi)
        ys = np.clip(centers_y[pick] + rng.normal(0.0, dist.sigma, n), dom.y_lo, dom.y_hi)
    elif isinstance(dist, Skewed):
        # Zipf-rank transform on x: bucket ranks drawn with p(r) ~ r^-s,
        # uniform jitter inside the bucket; y stays uniform.
        ranks = np.arange(1, _ZIPF_BUCKETS + 1, dtype=np.float64)
        weights = ranks ** (-dist.zipf_s)
        weights /= weights.sum()
        bucket = rng.choice(_ZIPF_BUCKETS, size=n, p=weights)
        xs = dom.x_lo + (bucket + rng.random(n)) / _ZIPF_BUCKETS * dom.width
        ys = rng.uniform(dom.y_lo, dom.y_hi, n)
    else:
        raise TypeError(f"unknown distribution: {dist!r}")
    return IngestResult(
        xs=xs.astype(np.float64),
        ys=ys.astype(np.float64),
        payloads=np.arange(n, dtype=np.int64),
        skipped=0,
    )


def generate_convex_polygons(
    count: int,
    domain: Rect,
    seed: int = 0,
    mean_radius: Optional[float] = None,
    vertices: tuple[int, int] = (4, 10),
) -> list[Polygon]:
    """Seeded random convex polygons (sorted angles on a jittered circle)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    if mean_radius is None:
        mean_radius = 0.05 * min(domain.width, domain.height)
    out = []
    for i in range(count):
        cx = rng.uniform(domain.x_lo, domain.x_hi)
        cy = rng.uniform(domain.y_lo, domain.y_hi)
        k = int(rng.integers(vertices[0], vertices[1] + 1))
        angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, k))
        radius = mean_radius * rng.uniform(0.5, 1.5)
        verts = tuple(
            Point(float(cx + radius * math.cos(a)), float(cy + radius * math.sin(a)))
            for a in angles
        )
        out.append(Polygon(id=f"pg{i}", vertices=verts))
    return out


# ---------------------------------------------------------------------------
# Snapshot save / load
# ---------------------------------------------------------------------------

def _key_strategy_fields(ks: KeyStrategy) -> tuple[int, int, tuple[float, float, float, float]]:
    tag = key_tag(ks)
    if isinstance(ks, ZOrder):
        d = ks.domain
        return tag, ks.bits_per_dim, (d.x_lo, d.y_lo, d.x_hi, d.y_hi)
    return tag, 0, (0.0, 0.0, 0.0, 0.0)


def _key_strategy_from_fields(tag: int, bits: int, dom: tuple) -> KeyStrategy:
    if tag == 0:
        return AxisX()
    if tag == 1:
        return AxisY()
    if tag == 2:
        return ZOrder(bits_per_dim=bits, domain=Rect(*dom))
    raise SnapshotError(f"unknown key strategy tag {tag}")


def _partition_block(descriptor: GridDescriptor, records: np.ndarray, index) -> bytes:
    mbr = descriptor.mbr
    mbr_vals = (mbr.x_lo, mbr.y_lo, mbr.x_hi, mbr.y_hi) if mbr else (0.0, 0.0, 0.0, 0.0)
    parts = [
        _BLOCK_HEAD.pack(
            descriptor.id,
            int(descriptor.overflow),
            int(mbr is not None),
            *mbr_vals,
            descriptor.count,
        ),
        np.ascontiguousarray(records).tobytes(),
    ]
    if index is None:
        parts.append(struct.pack("<I", 0))
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<I", len(index.knot_keys)))
        parts.append(index.knot_keys.astype("<f8").tobytes())
        parts.append(index.knot_positions.astype("<u8").tobytes())
        radix = index.radix
        if radix is None:
            parts.append(struct.pack("<B", 0))
        else:
            parts.append(struct.pack("<B", 1))
            parts.append(
                _RADIX_HEAD.pack(
                    radix.bits, radix.min_key, radix.max_key, radix.scale, len(radix.table)
                )
            )
            parts.append(radix.table.astype("<u4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save_snapshot(dataset: PartitionedDataset, path: str) -> None:
    """Serialize a built dataset; loading restores it bit-for-bit."""
    tag, zbits, dom = _key_strategy_fields(dataset.key_strategy)
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        dataset.total,
        len(dataset.descriptors),
        tag,
        zbits,
        *dom,
        dataset.epsilon,
        dataset.radix_bits,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for descriptor, records, index in zip(
            dataset.descriptors, dataset.partitions, dataset.indexes
        ):
            fh.write(_partition_block(descriptor, records, index))


class _Cursor:
    """Bounds-checked sequential reader over the snapshot bytes."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise SnapshotError("snapshot is truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, s: struct.Struct) -> tuple:
        return s.unpack(self.take(s.size))


def load_snapshot(path: str) -> PartitionedDataset:
    """Load and verify a snapshot written by save_snapshot."""
    with open(path, "rb") as fh:
        data = fh.read()
    cur = _Cursor(data)
    magic, version, total, n_parts, tag, zbits, *rest = cur.unpack(_HEADER)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    dom = tuple(rest[:4])
    epsilon, radix_bits = rest[4], rest[5]
    key_strategy = _key_strategy_from_fields(tag, zbits, dom)

    descriptors: list[GridDescriptor] = []
    partitions: list[np.ndarray] = []
    indexes: list[Optional[SplineIndex]] = []
    for _ in range(n_parts):
        block_start = cur.pos
        pid, overflow, has_mbr, x_lo, y_lo, x_hi, y_hi, count = cur.unpack(_BLOCK_HEAD)
        mbr = Rect(x_lo, y_lo, x_hi, y_hi) if has_mbr else None
        rec_bytes = cur.take(count * RECORD_DTYPE.itemsize)
        records = np.frombuffer(rec_bytes, dtype=RECORD_DTYPE).copy()
        records.flags.writeable = False
        (n_knots,) = cur.unpack(struct.Struct("<I"))
        index = None
        if n_knots:
            kk = np.frombuffer(cur.take(8 * n_knots), dtype="<f8").copy()
            kp = np.frombuffer(cur.take(8 * n_knots), dtype="<u8").astype(np.int64)
            (has_radix,) = cur.unpack(struct.Struct("<B"))
            radix = None
            if has_radix:
                bits, kmin, kmax, scale, slots = cur.unpack(_RADIX_HEAD)
                table = np.frombuffer(cur.take(4 * slots), dtype="<u4").astype(np.int64)
                table.flags.writeable = False
                radix = RadixTable(bits=bits, min_key=kmin, max_key=kmax, scale=scale, table=table)
            index = SplineIndex(
                knot_keys=kk,
                knot_positions=kp,
                epsilon=epsilon,
                size=count,
                radix=radix,
            )
        else:
            (_,) = cur.unpack(struct.Struct("<B"))
        stored_crc = struct.unpack("<I", cur.take(4))[0]
        actual_crc = zlib.crc32(data[block_start : cur.pos - 4])
        if stored_crc != actual_crc:
            raise SnapshotError(f"checksum mismatch in partition block {pid}")
        descriptors.append(
            GridDescriptor(id=pid, mbr=mbr, overflow=bool(overflow), count=count)
        )
        partitions.append(records)
        indexes.append(index)

    global_mbr = None
    non_empty = [d.mbr for d in descriptors if d.mbr is not None]
    if non_empty:
        global_mbr = Rect(
            min(m.x_lo for m in non_empty),
            min(m.y_lo for m in non_empty),
            max(m.x_hi for m in non_empty),
            max(m.y_hi for m in non_empty),
        )
    return PartitionedDataset(
        descriptors=descriptors,
        partitions=partitions,
        indexes=indexes,
        key_strategy=key_strategy,
        epsilon=epsilon,
        radix_bits=radix_bits,
        global_mbr=global_mbr,
        total=total,
    )
