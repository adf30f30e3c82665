"""Per-pixel matching costs and cost-volume assembly.

Matching convention: left pixel ``x`` is compared with right pixel
``x - d`` for disparity ``d >= 0`` (a point's right-image column is its
left-image column minus the disparity).  Cells whose correspondence
falls outside the right frame are NaN, the invalid-cost marker.

Volumes are ``(height, width, n_disp)`` float64 arrays indexed by
``d - d_min`` on the last axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError

__all__ = [
    "WindowSpec",
    "CostVolume",
    "COST_KINDS",
    "as_gray",
    "cost_ad",
    "cost_sd",
    "cost_ncc",
    "build_cost_volume",
    "shifted_right",
]

COST_KINDS = ("ad", "sd", "ncc")

# Patches with summed squared deviation at or below this are textureless.
# 8-bit data has a minimum non-zero value near 1.5e-5.
_VAR_EPS = 1e-12


@dataclass(frozen=True)
class WindowSpec:
    half_width: int = 0
    half_height: int = 0

    def __post_init__(self):
        if self.half_width < 0 or self.half_height < 0:
            raise ConfigurationError(f"window half sizes must be >= 0: {self}")

    @classmethod
    def from_size(cls, width: int, height: int | None = None) -> WindowSpec:
        """Build from full odd sizes, e.g. ``from_size(5, 5)`` for a 5x5 window."""
        height = width if height is None else height
        if width < 1 or height < 1 or width % 2 == 0 or height % 2 == 0:
            raise ConfigurationError(f"window sizes must be odd and positive, got {width}x{height}")
        return cls(width // 2, height // 2)

    @classmethod
    def parse(cls, text: str) -> WindowSpec:
        """Parse ``"WxH"`` or ``"N"``."""
        try:
            parts = [int(p) for p in text.lower().split("x")]
        except ValueError:
            raise ConfigurationError(f"bad window {text!r}; expected WxH") from None
        if len(parts) == 1:
            return cls.from_size(parts[0])
        if len(parts) == 2:
            return cls.from_size(parts[0], parts[1])
        raise ConfigurationError(f"bad window {text!r}; expected WxH")

    @property
    def width(self) -> int:
        return 2 * self.half_width + 1

    @property
    def height(self) -> int:
        return 2 * self.half_height + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    def offsets(self):
        """Window offsets ``(dy, dx)`` in row-major order."""
        return [
            (dy, dx)
            for dy in range(-self.half_height, self.half_height + 1)
            for dx in range(-self.half_width, self.half_width + 1)
        ]


@dataclass
class CostVolume:
    cost: np.ndarray
    d_min: int
    d_max: int

    def __post_init__(self):
        if self.d_min < 0 or self.d_max < self.d_min:
            raise ConfigurationError(f"bad disparity range [{self.d_min}, {self.d_max}]")
        if self.cost.ndim != 3 or self.cost.shape[2] != self.d_max - self.d_min + 1:
            raise ConfigurationError(
                f"cost array shape {self.cost.shape} does not match range [{self.d_min}, {self.d_max}]"
            )

    @property
    def height(self) -> int:
        return self.cost.shape[0]

    @property
    def width(self) -> int:
        return self.cost.shape[1]

    @property
    def disparities(self) -> np.ndarray:
        return np.arange(self.d_min, self.d_max + 1)

    @property
    def valid(self) -> np.ndarray:
        return ~np.isnan(self.cost)

    def at(self, x: int, y: int, d: int) -> float:
        return float(self.cost[y, x, d - self.d_min])

    def with_cost(self, cost: np.ndarray) -> CostVolume:
        return CostVolume(cost, self.d_min, self.d_max)


def as_gray(image) -> np.ndarray:
    """Validate a grayscale image: 2-D, finite, values in [0, 1]."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise InputError(f"expected a 2-D grayscale image, got shape {img.shape}")
    if img.size == 0:
        raise InputError("empty image")
    if not np.all(np.isfinite(img)) or img.min() < 0 or img.max() > 1:
        raise InputError("image intensities must be finite and in [0, 1]")
    return img


def _right_col(right: np.ndarray, x: int, d: int):
    xr = x - d
    if xr < 0 or xr >= right.shape[1]:
        return None
    return xr


def cost_ad(left, right, x: int, y: int, d: int) -> float:
    """Absolute intensity difference; NaN when ``x - d`` is off-frame."""
    xr = _right_col(right, x, d)
    if xr is None:
        return math.nan
    return abs(float(left[y, x]) - float(right[y, xr]))


def cost_sd(left, right, x: int, y: int, d: int) -> float:
    xr = _right_col(right, x, d)
    if xr is None:
        return math.nan
    diff = float(left[y, x]) - float(right[y, xr])
    return diff * diff


def cost_ncc(left, right, x: int, y: int, d: int, window: WindowSpec) -> float:
    """Zero-mean normalised cross-correlation score in [-1, 1].

    Returns NaN if the window leaves either frame and 0.0 if either patch
    has no variance.
    """
    h, w = left.shape
    hh, hw = window.half_height, window.half_width
    if y - hh < 0 or y + hh >= h or x - hw < 0 or x + hw >= w or x - d - hw < 0 or x - d + hw >= w:
        return math.nan
    offs = window.offsets()
    n = len(offs)
    lv = [float(left[y + dy, x + dx]) for dy, dx in offs]
    rv = [float(right[y + dy, x - d + dx]) for dy, dx in offs]
    sl = 0.0
    sr = 0.0
    for a, b in zip(lv, rv):
        sl += a
        sr += b
    mu_l = sl / n
    mu_r = sr / n
    num = vl = vr = 0.0
    for a, b in zip(lv, rv):
        a -= mu_l
        b -= mu_r
        num += a * b
        vl += a * a
        vr += b * b
    if vl <= _VAR_EPS or vr <= _VAR_EPS:
        return 0.0
    return min(1.0, max(-1.0, num / math.sqrt(vl * vr)))


def shifted_right(right: np.ndarray, d_min: int, d_max: int) -> np.ndarray:
    """Stack ``R[y, x - d]`` over the disparity range, NaN where off-frame."""
    h, w = right.shape
    out = np.full((h, w, d_max - d_min + 1), np.nan)
    for k, d in enumerate(range(d_min, d_max + 1)):
        if d < w:
            out[:, d:, k] = right[:, : w - d]
    return out


def _ncc_volume(left, right, d_min, d_max, window: WindowSpec) -> np.ndarray:
    hh, hw = window.half_height, window.half_width
    rs = shifted_right(right, d_min, d_max)
    lp = np.pad(left, ((hh, hh), (hw, hw)), constant_values=np.nan)[:, :, None]
    rp = np.pad(rs, ((hh, hh), (hw, hw), (0, 0)), constant_values=np.nan)
    h, w = left.shape
    offs = window.offsets()
    n = len(offs)

    def patch(arr, dy, dx):
        return arr[hh + dy : hh + dy + h, hw + dx : hw + dx + w]

    sl = np.zeros((h, w, 1))
    sr = np.zeros(rs.shape)
    for dy, dx in offs:
        sl = sl + patch(lp, dy, dx)
        sr = sr + patch(rp, dy, dx)
    mu_l = sl / n
    mu_r = sr / n
    num = np.zeros(rs.shape)
    vl = np.zeros(rs.shape)
    vr = np.zeros(rs.shape)
    for dy, dx in offs:
        a = patch(lp, dy, dx) - mu_l
        b = patch(rp, dy, dx) - mu_r
        num = num + a * b
        vl = vl + a * a
        vr = vr + b * b
    with np.errstate(invalid="ignore", divide="ignore"):
        ncc = num / np.sqrt(vl * vr)
    flat = (vl <= _VAR_EPS) | (vr <= _VAR_EPS)
    ncc[flat] = 0.0
    ncc = np.minimum(1.0, np.maximum(-1.0, ncc))
    return 1.0 - ncc


def build_cost_volume(
    left,
    right,
    d_min: int,
    d_max: int,
    cost_kind: str = "ad",
    window: WindowSpec | None = None,
) -> CostVolume:
    """Matching cost for every pixel and disparity in ``[d_min, d_max]``.

    ``ad`` and ``sd`` are per-pixel; ``ncc`` uses ``window`` and stores
    ``1 - NCC`` so that lower is better for every kind.
    """
    left = as_gray(left)
    right = as_gray(right)
    if left.shape != right.shape:
        raise InputError(f"image sizes differ: {left.shape} vs {right.shape}")
    if d_min < 0 or d_max < d_min:
        raise ConfigurationError(f"empty or negative disparity range [{d_min}, {d_max}]")
    if cost_kind not in COST_KINDS:
        raise ConfigurationError(f"unknown cost kind {cost_kind!r}; choose from {COST_KINDS}")
    if cost_kind == "ncc":
        cost = _ncc_volume(left, right, d_min, d_max, window or WindowSpec(2, 2))
    else:
        diff = left[:, :, None] - shifted_right(right, d_min, d_max)
        cost = np.abs(diff) if cost_kind == "ad" else diff * diff
    return CostVolume(cost, d_min, d_max)
