"""Branch-to-camera distance from a boundary polygon and a depth map.

Two sampling strategies feed the same robust estimator:

* centroid sampling groups the boundary points into triangles of mutually
  close points, samples depth at each triangle centroid and at ``m``
  neighbouring pixels around it;
* polygon sampling rasterises the polygon and uses every enclosed pixel.

The sampled depths go through a median-absolute-deviation filter with
threshold ``k`` and the distance is the mean of what survives.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FusionError
from .geometry import StereoRig

__all__ = [
    "BranchPolygon",
    "CentroidSet",
    "SamplePool",
    "MadResult",
    "DistanceEstimate",
    "group_triangles",
    "ring_offsets",
    "expand_neighbourhood",
    "read_depths",
    "mad_filter",
    "estimate_distance_centroid",
    "estimate_distance_polygon",
    "rasterize_polygon",
    "polygon_area",
    "is_simple",
    "DEFAULT_K",
    "DEFAULT_M",
]

DEFAULT_K = 3.0
DEFAULT_M = 8


@dataclass(frozen=True)
class BranchPolygon:
    """Ordered boundary points ``(x, y)`` in continuous left-image pixel coordinates."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise FusionError(f"polygon points must be an (n, 2) array, got shape {pts.shape}")
        if len(pts) < 3:
            raise FusionError(f"need at least 3 boundary points, got {len(pts)}")
        if not np.all(np.isfinite(pts)):
            raise FusionError("polygon points must be finite")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def translated(self, dx: float, dy: float) -> BranchPolygon:
        return BranchPolygon(self.points + np.array([dx, dy]))


@dataclass
class CentroidSet:
    centroids: np.ndarray
    triangles: list

    def __len__(self):
        return len(self.centroids)


@dataclass
class SamplePool:
    """Sample locations (continuous ``(x, y)``) with their depth readings.

    ``from_centroid`` flags the centroid samples; the rest are expansion
    samples.  ``depths``/``valid`` are filled by :func:`read_depths`.
    """

    locations: np.ndarray
    from_centroid: np.ndarray
    dropped: int = 0
    depths: np.ndarray | None = None
    valid: np.ndarray | None = None

    def __len__(self):
        return len(self.locations)

    def valid_depths(self) -> np.ndarray:
        if self.depths is None:
            raise FusionError("depths have not been read yet")
        return self.depths[self.valid]


@dataclass
class MadResult:
    retained: np.ndarray
    keep: np.ndarray
    median: float
    mad: float
    k: float

    @property
    def rejected_count(self) -> int:
        return int(len(self.keep) - np.count_nonzero(self.keep))

    @property
    def band(self):
        if math.isinf(self.k):
            return (-math.inf, math.inf)
        return (self.median - self.k * self.mad, self.median + self.k * self.mad)


@dataclass
class DistanceEstimate:
    distance_m: float
    median_m: float
    mad_m: float
    retained: np.ndarray
    retained_locations: np.ndarray
    rejected_count: int
    k_used: float
    m_used: int | None
    variant: str
    pool: SamplePool = field(repr=False, default=None)

    @property
    def pool_size(self) -> int:
        return len(self.retained) + self.rejected_count

    @property
    def retained_fraction(self) -> float:
        return len(self.retained) / self.pool_size


def _pairwise_d2(pts: np.ndarray) -> np.ndarray:
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sum(diff * diff, axis=2)


def group_triangles(poly: BranchPolygon, mode: str = "nearest") -> CentroidSet:
    """Group boundary points into ``floor(n / 3)`` disjoint triples.

    ``mode="nearest"`` repeatedly takes, among the unused points, the one
    whose two nearest unused neighbours span the smallest perimeter, and
    groups it with them.  Ties are broken by coordinates, never by list
    position, so the grouping does not depend on where the boundary list
    starts.  ``mode="consecutive"`` groups runs of three boundary points
    in list order.  Leftover points (``n % 3``) are discarded.
    """
    pts = poly.points
    n = len(pts)
    if n < 3:
        raise FusionError(f"need at least 3 boundary points, got {n}")
    if mode == "consecutive":
        tris = [(i, i + 1, i + 2) for i in range(0, n - n % 3, 3)]
    elif mode == "nearest":
        tris = _greedy_triangles(pts)
    else:
        raise FusionError(f"unknown grouping mode {mode!r}")
    centroids = np.array([(pts[a] + pts[b] + pts[c]) / 3.0 for a, b, c in tris])
    return CentroidSet(centroids, tris)


def _greedy_triangles(pts: np.ndarray):
    d2 = _pairwise_d2(pts)
    dist = np.sqrt(d2)
    unused = set(range(len(pts)))
    tris = []

    def coord_key(j):
        return (pts[j, 0], pts[j, 1])

    while len(unused) >= 3:
        best = None
        for i in unused:
            others = sorted((j for j in unused if j != i), key=lambda j: (d2[i, j], *coord_key(j)))
            a, b = others[0], others[1]
            perim = dist[i, a] + dist[i, b] + dist[a, b]
            key = (perim, *coord_key(i))
            if best is None or key < best[0]:
                best = (key, i, a, b)
        _, i, a, b = best
        tris.append(tuple(sorted((i, a, b))))
        unused -= {i, a, b}
    return tris


def ring_offsets(m: int):
    """First ``m`` pixel offsets ``(dx, dy)`` around a centre pixel.

    Offsets come ring by ring (ring ``r`` is the shell of the
    ``(2r+1) x (2r+1)`` block), nearest first within a ring, then row-major.
    """
    out = []
    r = 0
    while len(out) < m:
        r += 1
        ring = [
            (dx, dy)
            for dy in range(-r, r + 1)
            for dx in range(-r, r + 1)
            if max(abs(dx), abs(dy)) == r
        ]
        ring.sort(key=lambda o: (o[0] ** 2 + o[1] ** 2, o[1], o[0]))
        out.extend(ring)
    return out[:m]


def expand_neighbourhood(centroids: CentroidSet, m: int, shape) -> SamplePool:
    """Pool of ``m`` neighbouring pixels per centroid followed by the centroids.

    Neighbours are pixel centres around the pixel containing each centroid.
    Samples outside a frame of ``shape = (height, width)`` are dropped and
    counted.
    """
    if m < 0:
        raise FusionError("m must be >= 0")
    h, w = shape
    offsets = ring_offsets(m)
    locs = []
    for cx, cy in centroids.centroids:
        px, py = math.floor(cx), math.floor(cy)
        locs.extend((px + dx + 0.5, py + dy + 0.5) for dx, dy in offsets)
    n_exp = len(locs)
    locs.extend((float(cx), float(cy)) for cx, cy in centroids.centroids)
    locs = np.array(locs, dtype=np.float64).reshape(-1, 2)
    flags = np.zeros(len(locs), dtype=bool)
    flags[n_exp:] = True
    inside = (locs[:, 0] >= 0) & (locs[:, 0] < w) & (locs[:, 1] >= 0) & (locs[:, 1] < h)
    return SamplePool(locs[inside], flags[inside], dropped=int(np.count_nonzero(~inside)))


def _to_range(values, locs, rig: StereoRig):
    x = (locs[:, 0] - rig.ox) * values / rig.fx
    y = (locs[:, 1] - rig.oy) * values / rig.fy
    return np.sqrt(x * x + y * y + values * values)


def read_depths(
    pool: SamplePool,
    depth: np.ndarray,
    mode: str = "nearest",
    rig: StereoRig | None = None,
    quantity: str = "z",
) -> SamplePool:
    """Look up depth at every pool location.

    ``nearest`` reads the pixel containing the location.  ``bilinear``
    interpolates between the four surrounding pixel centres (clamped at
    the frame edge) and is invalid if any of them is.  With
    ``quantity="range"`` the depth is converted to Euclidean distance from
    the left camera centre, which needs ``rig``.

    Raises:
        FusionError: if no sample reads a valid depth.
    """
    depth = np.asarray(depth, dtype=np.float64)
    h, w = depth.shape
    locs = pool.locations
    if len(locs) and (
        np.any(locs[:, 0] < 0) or np.any(locs[:, 0] >= w) or np.any(locs[:, 1] < 0) or np.any(locs[:, 1] >= h)
    ):
        raise FusionError("sample locations outside the depth map")
    if mode == "nearest":
        ix = np.floor(locs[:, 0]).astype(np.int64)
        iy = np.floor(locs[:, 1]).astype(np.int64)
        vals = depth[iy, ix]
    elif mode == "bilinear":
        u = locs[:, 0] - 0.5
        v = locs[:, 1] - 0.5
        x0 = np.floor(u).astype(np.int64)
        y0 = np.floor(v).astype(np.int64)
        fu = u - x0
        fv = v - y0
        xa, xb = np.clip(x0, 0, w - 1), np.clip(x0 + 1, 0, w - 1)
        ya, yb = np.clip(y0, 0, h - 1), np.clip(y0 + 1, 0, h - 1)
        vals = (
            depth[ya, xa] * (1 - fu) * (1 - fv)
            + depth[ya, xb] * fu * (1 - fv)
            + depth[yb, xa] * (1 - fu) * fv
            + depth[yb, xb] * fu * fv
        )
    else:
        raise FusionError(f"unknown read mode {mode!r}")
    valid = np.isfinite(vals) & (vals > 0)
    vals = np.where(valid, vals, np.nan)
    if quantity == "range":
        if rig is None:
            raise FusionError("range distances need the stereo rig")
        vals = _to_range(vals, locs, rig)
    elif quantity != "z":
        raise FusionError(f"unknown distance quantity {quantity!r}")
    if not np.any(valid):
        raise FusionError("no sample hit a valid depth")
    return SamplePool(locs, pool.from_centroid, pool.dropped, vals, valid)


def mad_filter(depths, k: float = DEFAULT_K) -> MadResult:
    """Keep values within ``median +/- k * MAD`` (inclusive).

    When the MAD is zero only values equal to the median survive; ``k=inf``
    keeps everything.
    """
    d = np.asarray(depths, dtype=np.float64).ravel()
    if d.size == 0:
        raise FusionError("MAD filter needs at least one value")
    if k < 0 or math.isnan(k):
        raise FusionError(f"k must be >= 0, got {k}")
    med = float(np.median(d))
    mad = float(np.median(np.abs(d - med)))
    if math.isinf(k):
        keep = np.ones(d.size, dtype=bool)
    elif mad == 0:
        keep = d == med
    else:
        keep = (d >= med - k * mad) & (d <= med + k * mad)
    return MadResult(d[keep], keep, med, mad, float(k))


def _finish(pool: SamplePool, k: float, m, variant: str) -> DistanceEstimate:
    depths = pool.depths[pool.valid]
    locs = pool.locations[pool.valid]
    res = mad_filter(depths, k)
    distance = math.fsum(res.retained) / len(res.retained)
    return DistanceEstimate(
        distance_m=distance,
        median_m=res.median,
        mad_m=res.mad,
        retained=res.retained,
        retained_locations=locs[res.keep],
        rejected_count=res.rejected_count,
        k_used=float(k),
        m_used=m,
        variant=variant,
        pool=pool,
    )


def estimate_distance_centroid(
    poly: BranchPolygon,
    depth_map: np.ndarray,
    k: float = DEFAULT_K,
    m: int = DEFAULT_M,
    read: str = "nearest",
    grouping: str = "nearest",
    rig: StereoRig | None = None,
    quantity: str = "z",
) -> DistanceEstimate:
    centroids = group_triangles(poly, grouping)
    pool = expand_neighbourhood(centroids, m, np.shape(depth_map))
    if len(pool) == 0:
        raise FusionError("every sample fell outside the depth map")
    pool = read_depths(pool, depth_map, read, rig, quantity)
    return _finish(pool, k, m, "centroid")


def polygon_area(points) -> float:
    """Signed shoelace area."""
    p = np.asarray(points, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _dedupe_ring(points: np.ndarray) -> np.ndarray:
    keep = np.any(points != np.roll(points, 1, axis=0), axis=1)
    if not np.any(keep):
        return points[:1]
    return points[keep]


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, c) -> bool:
    return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])


def _segments_touch(a, b, c, d) -> bool:
    o1, o2, o3, o4 = _orient(a, b, c), _orient(a, b, d), _orient(c, d, a), _orient(c, d, b)
    if ((o1 > 0 and o2 < 0) or (o1 < 0 and o2 > 0)) and ((o3 > 0 and o4 < 0) or (o3 < 0 and o4 > 0)):
        return True
    return (
        (o1 == 0 and _on_segment(a, b, c))
        or (o2 == 0 and _on_segment(a, b, d))
        or (o3 == 0 and _on_segment(c, d, a))
        or (o4 == 0 and _on_segment(c, d, b))
    )


def is_simple(points) -> bool:
    """True if no two non-adjacent edges meet (consecutive duplicates ignored)."""
    p = _dedupe_ring(np.asarray(points, dtype=np.float64))
    n = len(p)
    if n < 3:
        return False
    for i in range(n):
        a, b = p[i], p[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            if _segments_touch(a, b, p[j], p[(j + 1) % n]):
                return False
    return True


def rasterize_polygon(poly: BranchPolygon, shape) -> np.ndarray:
    """Boolean mask of pixels whose centre lies inside the polygon.

    Scanline fill at each row centre ``y + 0.5``.  An edge counts for a
    scanline when the scanline is in ``[y_low, y_high)`` of the edge, and a
    pixel centre exactly on a crossing belongs to the span it starts
    (left edges inclusive, right edges exclusive).

    Raises:
        FusionError: for self-intersecting or zero-area polygons.
    """
    pts = _dedupe_ring(poly.points)
    if len(pts) < 3 or abs(polygon_area(pts)) < 1e-12:
        raise FusionError("degenerate polygon with zero area")
    if not is_simple(pts):
        raise FusionError("polygon is self-intersecting")
    h, w = shape
    mask = np.zeros((h, w), dtype=bool)
    x0, y0 = pts[:, 0], pts[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    centres_x = np.arange(w) + 0.5
    row_lo = max(0, int(math.floor(y0.min() - 0.5)))
    row_hi = min(h - 1, int(math.ceil(y0.max())))
    for row in range(row_lo, row_hi + 1):
        yc = row + 0.5
        hit = ((y0 <= yc) & (yc < y1)) | ((y1 <= yc) & (yc < y0))
        if not np.any(hit):
            continue
        xs = x0[hit] + (yc - y0[hit]) * (x1[hit] - x0[hit]) / (y1[hit] - y0[hit])
        xs.sort()
        for xl, xr in zip(xs[0::2], xs[1::2]):
            mask[row] |= (centres_x >= xl) & (centres_x < xr)
    return mask


def estimate_distance_polygon(
    poly: BranchPolygon,
    depth_map: np.ndarray,
    k: float = DEFAULT_K,
    rig: StereoRig | None = None,
    quantity: str = "z",
) -> DistanceEstimate:
    """MAD-filtered mean depth over every pixel enclosed by ``poly``."""
    mask = rasterize_polygon(poly, np.shape(depth_map))
    iy, ix = np.nonzero(mask)
    if len(iy) == 0:
        raise FusionError("polygon encloses no pixel centre inside the frame")
    locs = np.column_stack([ix + 0.5, iy + 0.5])
    pool = SamplePool(locs, np.zeros(len(locs), dtype=bool))
    pool = read_depths(pool, depth_map, "nearest", rig, quantity)
    return _finish(pool, k, None, "polygon")
