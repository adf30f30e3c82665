"""Rectified stereo camera model and triangulation.

Coordinates follow the left camera frame: x right, y down, z along the
optical axis.  Pixel coordinates are continuous; integer pixel index ``i``
has its centre at ``i + 0.5``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CalibrationError, GeometryError

__all__ = [
    "CameraIntrinsics",
    "StereoRig",
    "ScenePoint",
    "PixelPair",
    "project",
    "triangulate",
    "disparity_to_depth",
    "depth_to_disparity",
    "pixel_centre",
    "load_rig",
    "save_rig",
]


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    ox: float
    oy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise GeometryError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (math.isfinite(self.ox) and math.isfinite(self.oy)):
            raise GeometryError("principal point must be finite")


@dataclass(frozen=True)
class StereoRig:
    """Rectified two-camera rig sharing ``intrinsics``.

    ``w`` is the baseline-focal product ``baseline_m * fx`` that turns a
    disparity in pixels into a depth in metres.
    """

    intrinsics: CameraIntrinsics
    baseline_m: float
    w: float = field(init=False)

    def __post_init__(self):
        if not self.baseline_m > 0:
            raise GeometryError(f"baseline must be positive, got {self.baseline_m}")
        object.__setattr__(self, "w", self.baseline_m * self.intrinsics.fx)

    @classmethod
    def from_values(cls, fx, fy, ox, oy, baseline_m) -> StereoRig:
        return cls(CameraIntrinsics(float(fx), float(fy), float(ox), float(oy)), float(baseline_m))

    @property
    def fx(self) -> float:
        return self.intrinsics.fx

    @property
    def fy(self) -> float:
        return self.intrinsics.fy

    @property
    def ox(self) -> float:
        return self.intrinsics.ox

    @property
    def oy(self) -> float:
        return self.intrinsics.oy


@dataclass(frozen=True)
class ScenePoint:
    x: float
    y: float
    z: float

    @property
    def range_m(self) -> float:
        """Euclidean distance from the left optical centre."""
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True)
class PixelPair:
    ul: float
    vl: float
    ur: float
    vr: float

    @property
    def disparity(self) -> float:
        return self.ul - self.ur


def project(rig: StereoRig, p: ScenePoint) -> PixelPair:
    if not p.z > 0:
        raise GeometryError(f"cannot project a point with z={p.z}")
    fx, fy, ox, oy = rig.fx, rig.fy, rig.ox, rig.oy
    ul = fx * p.x / p.z + ox
    vl = fy * p.y / p.z + oy
    ur = fx * (p.x - rig.baseline_m) / p.z + ox
    return PixelPair(ul, vl, ur, vl)


def triangulate(rig: StereoRig, px: PixelPair) -> ScenePoint:
    d = px.ul - px.ur
    if d == 0:
        raise GeometryError("zero disparity: point at infinity")
    if d < 0:
        raise GeometryError(f"negative disparity {d}: point behind camera")
    b = rig.baseline_m
    x = b * (px.ul - rig.ox) / d
    y = b * rig.fx * (px.vl - rig.oy) / (rig.fy * d)
    z = b * rig.fx / d
    return ScenePoint(x, y, z)


def disparity_to_depth(rig: StereoRig, d):
    """Depth ``W / d`` for scalar or array disparities.

    Scalars must be strictly positive.  Arrays map non-positive or NaN
    disparities to NaN (invalid) instead of raising, so whole maps convert
    in one call.
    """
    if np.ndim(d) == 0:
        d = float(d)
        if not d > 0:
            raise GeometryError(f"disparity must be positive, got {d}")
        return rig.w / d
    d = np.asarray(d, dtype=np.float64)
    out = np.full(d.shape, np.nan)
    ok = d > 0
    out[ok] = rig.w / d[ok]
    return out


def depth_to_disparity(rig: StereoRig, z):
    if np.ndim(z) == 0:
        z = float(z)
        if not z > 0:
            raise GeometryError(f"depth must be positive, got {z}")
        return rig.w / z
    z = np.asarray(z, dtype=np.float64)
    out = np.full(z.shape, np.nan)
    ok = z > 0
    out[ok] = rig.w / z[ok]
    return out


def pixel_centre(index):
    """Continuous coordinate of the centre of integer pixel ``index``."""
    return np.asarray(index, dtype=np.float64) + 0.5


_RIG_KEYS = ("fx", "fy", "ox", "oy", "baseline_m")
_LINE = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:=|:|\s)\s*(\S+)\s*$")


def load_rig(path) -> StereoRig:
    """Read a ``key = value`` calibration file (``#`` starts a comment)."""
    values = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if m is None:
            raise CalibrationError(f"{path}:{lineno}: cannot parse {raw!r}")
        key, val = m.groups()
        if key not in _RIG_KEYS:
            raise CalibrationError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = float(val)
        except ValueError:
            raise CalibrationError(f"{path}:{lineno}: {key} is not a number: {val!r}") from None
    missing = [k for k in _RIG_KEYS if k not in values]
    if missing:
        raise CalibrationError(f"{path}: missing keys {', '.join(missing)}")
    try:
        return StereoRig.from_values(**values)
    except GeometryError as exc:
        raise CalibrationError(f"{path}: {exc}") from None


def save_rig(rig: StereoRig, path) -> None:
    lines = ["# rectified stereo rig"]
    for key in _RIG_KEYS:
        val = getattr(rig, key)
        lines.append(f"{key} = {val!r}")
    Path(path).write_text("\n".join(lines) + "\n")
