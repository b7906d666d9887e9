"""Per-partition learned index: key projection, error-bounded spline, radix table.

The index maps a sort key to an approximate array position with a hard
guarantee: for every distinct key in the indexed data, the first occurrence
position lies within ``predict``'s returned ``[lo, hi]`` window.  The model
is a greedy piecewise-linear fit over the key -> position curve whose knots
are actual data pairs, plus a flat radix table that narrows the knot search
to a couple of slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .geometry import Point, Rect

__all__ = [
    "AxisX",
    "AxisY",
    "ZOrder",
    "KeyStrategy",
    "project_key",
    "project_keys",
    "morton_encode",
    "string_to_key",
    "build_spline",
    "build_radix_table",
    "RadixTable",
    "SplineIndex",
    "build_spline_index",
    "predict",
]

_U64_MASK = 0xFFFFFFFFFFFFFFFF

# Corridor slopes are shrunk by this hair so that float64 round-off in the
# fit can never push the realized interpolation error past epsilon.
_CORRIDOR_MARGIN = 2.0**-20


# ---------------------------------------------------------------------------
# Key strategies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AxisX:
    """Sort key is the x coordinate."""


@dataclass(frozen=True)
class AxisY:
    """Sort key is the y coordinate."""


@dataclass(frozen=True)
class ZOrder:
    """Sort key is the Morton (Z-order) code of quantized coordinates.

    Coordinates are normalized to ``domain`` and floor-quantized to
    ``bits_per_dim`` bits per axis; values at or beyond the upper domain
    edge clamp to the last cell.  Codes are carried as float64 keys, which
    is exact for bits_per_dim <= 26.
    """

    bits_per_dim: int = 16
    domain: Rect = Rect(0.0, 0.0, 1.0, 1.0)

    def __post_init__(self):
        if not 1 <= self.bits_per_dim <= 31:
            raise ValueError(f"bits_per_dim must be in [1, 31], got {self.bits_per_dim}")
        if self.domain.width <= 0 or self.domain.height <= 0:
            raise ValueError("ZOrder domain must have positive width and height")


KeyStrategy = Union[AxisX, AxisY, ZOrder]

KEY_TAGS = {AxisX: 0, AxisY: 1, ZOrder: 2}
KEY_NAMES = {0: "x", 1: "y", 2: "zorder"}


def key_tag(strategy: KeyStrategy) -> int:
    """Stable wire tag for a key strategy (used by snapshots and reports)."""
    return KEY_TAGS[type(strategy)]


def _spread_bits_u64(v: np.ndarray) -> np.ndarray:
    """Spread the low 32 bits of each uint64 so bit i lands at bit 2i."""
    v = v & np.uint64(0xFFFFFFFF)
    v = (v | (v << np.uint64(16))) & np.uint64(0x0000FFFF0000FFFF)
    v = (v | (v << np.uint64(8))) & np.uint64(0x00FF00FF00FF00FF)
    v = (v | (v << np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    v = (v | (v << np.uint64(2))) & np.uint64(0x3333333333333333)
    v = (v | (v << np.uint64(1))) & np.uint64(0x5555555555555555)
    return v


def morton_encode(ix: int, iy: int, bits: int) -> int:
    """Interleave two ``bits``-wide integers; bit i of ix -> bit 2i, of iy -> bit 2i+1."""
    if not 1 <= bits <= 31:
        raise ValueError(f"bits must be in [1, 31], got {bits}")
    limit = 1 << bits
    if not (0 <= ix < limit and 0 <= iy < limit):
        raise ValueError(f"coordinates must be in [0, 2^{bits}), got ({ix}, {iy})")
    out = 0
    for i in range(bits):
        out |= ((ix >> i) & 1) << (2 * i)
        out |= ((iy >> i) & 1) << (2 * i + 1)
    return out


def _quantize(values: np.ndarray, lo: float, extent: float, bits: int) -> np.ndarray:
    """Floor-quantize to ``bits`` bits, clamping into [0, 2^bits - 1]."""
    cells = 1 << bits
    scaled = np.floor((values - lo) / extent * cells)
    return np.clip(scaled, 0, cells - 1).astype(np.uint64)


def project_keys(xs: np.ndarray, ys: np.ndarray, strategy: KeyStrategy) -> np.ndarray:
    """Project many points to float64 sort keys (vectorized)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
        raise ValueError("coordinates must be finite")
    if isinstance(strategy, AxisX):
        return xs.copy()
    if isinstance(strategy, AxisY):
        return ys.copy()
    dom = strategy.domain
    qx = _quantize(xs, dom.x_lo, dom.width, strategy.bits_per_dim)
    qy = _quantize(ys, dom.y_lo, dom.height, strategy.bits_per_dim)
    code = _spread_bits_u64(qx) | (_spread_bits_u64(qy) << np.uint64(1))
    return code.astype(np.float64)


def project_key(p: Point, strategy: KeyStrategy) -> float:
    """Project one point to its sort key."""
    return float(project_keys(np.array([p.x]), np.array([p.y]), strategy)[0])


def string_to_key(s: str) -> int:
    """Polynomial rolling hash over code points in unsigned 64-bit arithmetic.

    h = sum(c_i * 31^(L-1-i)) mod 2^64; the classic product-sum string hash.
    """
    if not s:
        raise ValueError("cannot key an empty string")
    h = 0
    for ch in s:
        h = (h * 31 + ord(ch)) & _U64_MASK
    return h


# ---------------------------------------------------------------------------
# Greedy corridor spline fit
# ---------------------------------------------------------------------------

def build_spline(
    keys: np.ndarray, positions: np.ndarray, epsilon: int
) -> tuple[np.ndarray, np.ndarray]:
    """Fit an error-bounded piecewise-linear model over (key, position) pairs.

    Greedy single pass: from the current base knot, keep the intersection of
    slope windows through every later point's position +- epsilon; the moment
    a point's true slope falls outside that corridor, the previous point
    becomes a knot and the corridor restarts there.  First and last pairs are
    always knots.  Linear interpolation between consecutive knots is then
    within epsilon of every input position.

    Keys must be strictly increasing (duplicates collapse to their first
    occurrence before fitting).  Returns (knot_keys, knot_positions).
    """
    keys = np.asarray(keys, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.int64)
    n = len(keys)
    if n == 0:
        raise ValueError("need at least one (key, position) pair")
    if len(positions) != n:
        raise ValueError("keys and positions must have equal length")
    if epsilon < 1:
        raise ValueError(f"epsilon must be >= 1, got {epsilon}")
    if n > 1 and not (np.diff(keys) > 0).all():
        raise ValueError("keys must be strictly increasing (no duplicates)")
    if n <= 2:
        return keys.copy(), positions.copy()

    pos_f = positions.astype(np.float64)
    eps = float(epsilon) - _CORRIDOR_MARGIN
    knot_idx = [0]
    base = 0
    cur_lo, cur_up = -math.inf, math.inf
    i = 1
    block = 64
    while i < n:
        j = min(n, i + block)
        with np.errstate(over="ignore"):
            dk = keys[i:j] - keys[base]
            off = pos_f[i:j] - pos_f[base]
            s = off / dk
            up = (off + eps) / dk
            lo = (off - eps) / dk
        # corridor *before* each point: carried window tightened by all
        # earlier points in this block (shift by one, seeded with the carry)
        c_up = np.minimum.accumulate(np.concatenate(([cur_up], up[:-1])))
        c_lo = np.maximum.accumulate(np.concatenate(([cur_lo], lo[:-1])))
        # a slope that overflows float64 (near-equal keys) gives no usable
        # window; force a knot there rather than under-constrain the fit
        viol = (s < c_lo) | (s > c_up) | ~np.isfinite(s) | ~np.isfinite(up) | ~np.isfinite(lo)
        hit = int(np.argmax(viol)) if viol.any() else -1
        if hit < 0:
            cur_up = min(c_up[-1], up[-1])
            cur_lo = max(c_lo[-1], lo[-1])
            i = j
            block = min(block * 4, 65536)
            continue
        t = i + hit  # first point outside the corridor
        if knot_idx[-1] != t - 1:
            knot_idx.append(t - 1)
        base = t - 1
        with np.errstate(over="ignore"):
            dk0 = keys[t] - keys[base]
            cur_up = (pos_f[t] - pos_f[base] + eps) / dk0
            cur_lo = (pos_f[t] - pos_f[base] - eps) / dk0
        if not (math.isfinite(cur_up) and math.isfinite(cur_lo)):
            # the gap to t is itself degenerate: pin t exactly
            knot_idx.append(t)
            base = t
            cur_lo, cur_up = -math.inf, math.inf
        i = t + 1
        block = 64
    if knot_idx[-1] != n - 1:
        knot_idx.append(n - 1)
    idx = np.array(knot_idx, dtype=np.int64)
    return keys[idx], positions[idx]


# ---------------------------------------------------------------------------
# Radix table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadixTable:
    """Flat bucket table over the knot key range.

    Slot k' of a key k is ``floor((k - min_key) * scale)``; the knot
    bracketing k is guaranteed to lie in knot-index range
    ``[table[k'], table[k' + 1]]``.
    """

    bits: int
    min_key: float
    max_key: float
    scale: float
    table: np.ndarray  # int64, length (1 << bits) + 2, non-decreasing

    def slot(self, key: float) -> int:
        raw = int((key - self.min_key) * self.scale)
        return min(max(raw, 0), 1 << self.bits)

    def knot_bounds(self, key: float) -> tuple[int, int]:
        k = self.slot(key)
        return int(self.table[k]), int(self.table[k + 1])


def build_radix_table(
    knot_keys: np.ndarray, knot_positions: np.ndarray, bits: int
) -> RadixTable:
    """Bucket the knot keys into 2^bits slots.

    Slot j holds the index of the first knot whose own slot is >= j;
    trailing slots repeat the last knot index, so any key's bracketing
    knots fall inside the two-slot bound it reads.
    """
    if not 1 <= bits <= 30:
        raise ValueError(f"radix bits must be in [1, 30], got {bits}")
    knot_keys = np.asarray(knot_keys, dtype=np.float64)
    m = len(knot_keys)
    if m < 2 or knot_keys[0] == knot_keys[-1]:
        raise ValueError("radix table needs >= 2 knots with distinct min/max keys")
    kmin = float(knot_keys[0])
    kmax = float(knot_keys[-1])
    cells = 1 << bits
    scale = cells / (kmax - kmin)
    if not math.isfinite(scale):
        # denormal key span: any finite scale keeps the slot function
        # monotone, which is all the two-slot bound needs
        scale = float(np.finfo(np.float64).max)
    curr = np.clip(((knot_keys - kmin) * scale).astype(np.int64), 0, cells)
    slots = np.arange(cells + 2, dtype=np.int64)
    table = np.minimum(np.searchsorted(curr, slots, side="left"), m - 1)
    table.flags.writeable = False
    return RadixTable(bits=bits, min_key=kmin, max_key=kmax, scale=scale, table=table)


# ---------------------------------------------------------------------------
# The assembled index
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplineIndex:
    """Knots + epsilon + radix table over one key-sorted partition of size n.

    ``radix`` is None when the partition has a single distinct key (no key
    range to bucket); predict degenerates to the clamped endpoints there.
    """

    knot_keys: np.ndarray
    knot_positions: np.ndarray
    epsilon: int
    size: int
    radix: Optional[RadixTable]

    def __post_init__(self):
        self.knot_keys.flags.writeable = False
        self.knot_positions.flags.writeable = False


def build_spline_index(
    sorted_keys: np.ndarray, epsilon: int = 32, radix_bits: int = 10
) -> SplineIndex:
    """Build the full learned index for one key-sorted array.

    Duplicate keys collapse to (distinct key, first occurrence position)
    for the fit; query-time scans recover full duplicate runs.
    """
    sorted_keys = np.asarray(sorted_keys, dtype=np.float64)
    n = len(sorted_keys)
    if n == 0:
        raise ValueError("cannot index an empty partition")
    first = np.empty(n, dtype=bool)
    first[0] = True
    np.not_equal(sorted_keys[1:], sorted_keys[:-1], out=first[1:])
    first_pos = np.flatnonzero(first)
    distinct = sorted_keys[first_pos]
    knot_keys, knot_pos = build_spline(distinct, first_pos, epsilon)
    radix = None
    if len(knot_keys) >= 2:
        radix = build_radix_table(knot_keys, knot_pos, radix_bits)
    return SplineIndex(
        knot_keys=knot_keys,
        knot_positions=knot_pos.astype(np.int64),
        epsilon=int(epsilon),
        size=n,
        radix=radix,
    )


def predict(idx: SplineIndex, key: float) -> tuple[float, int, int]:
    """Estimate the array position of ``key``: returns (p_hat, lo, hi).

    The radix table narrows the knot range, a binary search finds the
    bracketing knot pair, and p_hat interpolates between them.  For every
    distinct key in the indexed data, the first occurrence position is
    inside [lo, hi].  Out-of-range keys clamp to the array ends.
    """
    n = idx.size
    eps = idx.epsilon
    kk = idx.knot_keys
    if key < kk[0]:
        return 0.0, 0, min(n - 1, eps)
    if key > kk[-1]:
        return float(n - 1), max(0, n - 1 - eps), n - 1
    if idx.radix is None:
        p_hat = float(idx.knot_positions[0])
    else:
        lo_i, hi_i = idx.radix.knot_bounds(key)
        # rightmost knot with key <= query, searched only inside the bounds
        seg = lo_i + int(np.searchsorted(kk[lo_i : hi_i + 1], key, side="right")) - 1
        seg = min(max(seg, 0), len(kk) - 1)
        if seg == len(kk) - 1:
            p_hat = float(idx.knot_positions[seg])
        else:
            k0, k1 = kk[seg], kk[seg + 1]
            p0, p1 = idx.knot_positions[seg], idx.knot_positions[seg + 1]
            # ratio first: stays in [0, 1] even across denormal-width segments
            p_hat = float(p0) + (key - k0) / (k1 - k0) * (float(p1) - float(p0))
    lo = max(0, int(math.floor(p_hat)) - eps)
    hi = min(n - 1, int(math.ceil(p_hat)) + eps)
    return p_hat, lo, hi


def predict_many(idx: SplineIndex, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized ``predict`` over an array of keys (same windows)."""
    keys = np.asarray(keys, dtype=np.float64)
    n = idx.size
    eps = idx.epsilon
    kk = idx.knot_keys
    kp = idx.knot_positions.astype(np.float64)
    if len(kk) == 1:
        p_hat = np.full(keys.shape, float(kp[0]))
    else:
        p_hat = np.interp(keys, kk, kp)
    p_hat = np.where(keys < kk[0], 0.0, p_hat)
    p_hat = np.where(keys > kk[-1], float(n - 1), p_hat)
    lo = np.maximum(np.floor(p_hat).astype(np.int64) - eps, 0)
    hi = np.minimum(np.ceil(p_hat).astype(np.int64) + eps, n - 1)
    return p_hat, lo, hi
