"""Disparity and distance metrics, depth histograms, CSV reports."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import InputError
from .fusion import BranchPolygon, rasterize_polygon

__all__ = [
    "rmse",
    "bad_pixel_rate",
    "iqr",
    "DepthHistogram",
    "depth_histogram",
    "EvalRow",
    "write_report",
    "write_histogram_csv",
    "DEFAULT_BINS",
]

DEFAULT_BINS = np.linspace(0.5, 3.0, 51)


def _joint(pred, ref):
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape:
        raise InputError(f"map sizes differ: {pred.shape} vs {ref.shape}")
    both = np.isfinite(pred) & np.isfinite(ref)
    if not np.any(both):
        raise InputError("no pixel is valid in both maps")
    return pred[both] - ref[both]


def rmse(pred, ref) -> float:
    """Root mean squared difference over pixels valid in both maps."""
    diff = _joint(pred, ref)
    return math.sqrt(float(np.mean(diff * diff)))


def bad_pixel_rate(pred, ref, threshold_px: float = 1.0) -> float:
    diff = _joint(pred, ref)
    return float(np.count_nonzero(np.abs(diff) > threshold_px)) / diff.size


def iqr(values) -> float:
    q75, q25 = np.percentile(np.asarray(values, dtype=np.float64), [75, 25])
    return float(q75 - q25)


@dataclass
class DepthHistogram:
    """Histogram of in-polygon depths.

    Values outside the bin range are counted in the first or last bin, so
    ``counts.sum() == source_pixel_count`` always holds.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    source_pixel_count: int
    iqr_m: float
    median_m: float
    true_distance_m: float | None = None


def depth_histogram(depth, region: BranchPolygon, bins=None, true_distance_m=None) -> DepthHistogram:
    depth = np.asarray(depth, dtype=np.float64)
    edges = DEFAULT_BINS if bins is None else np.asarray(bins, dtype=np.float64)
    if isinstance(bins, int):
        edges = np.linspace(DEFAULT_BINS[0], DEFAULT_BINS[-1], bins + 1)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise InputError("bin edges must be strictly increasing")
    mask = rasterize_polygon(region, depth.shape)
    vals = depth[mask]
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        raise InputError("region contains no valid depth pixel")
    clipped = np.clip(vals, edges[0], edges[-1])
    counts, _ = np.histogram(clipped, bins=edges)
    return DepthHistogram(edges, counts, int(vals.size), iqr(vals), float(np.median(vals)), true_distance_m)


@dataclass
class EvalRow:
    scene_id: str
    backend: str
    rmse_px: float
    bad_pixel_rate: float
    distance_error_m: float
    retained_fraction: float
    branch: int = 0
    seed: int | None = None
    note: str = ""


def write_report(path, rows) -> None:
    names = [f.name for f in fields(EvalRow)]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=names, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            rec = asdict(row)
            for key, val in rec.items():
                if isinstance(val, float):
                    rec[key] = "nan" if math.isnan(val) else repr(val)
            writer.writerow(rec)


def write_histogram_csv(path, hist: DepthHistogram) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_lo_m", "bin_hi_m", "count"])
        for lo, hi, c in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts):
            writer.writerow([repr(float(lo)), repr(float(hi)), int(c)])
