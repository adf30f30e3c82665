"""Synthetic rectified stereo scenes with exact ground truth.

A scene is a fronto-parallel textured background plane with optional
vertical bars (thin branches) in front of it.  Every surface carries its own
seeded value-noise texture, defined in left-image column/row units, so the
right image is an exact warp of the left one.

Texture coordinates put pixel ``j`` at ``j`` (not ``j + 0.5``); a bar
covering columns ``x_left .. x_left + width - 1`` occupies
``[x_left - 0.5, x_left + width - 0.5)`` in that space.  Polygons use the
usual continuous convention where the same bar spans
``[x_left, x_left + width]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .fusion import BranchPolygon, rasterize_polygon
from .geometry import StereoRig

__all__ = [
    "Bar",
    "TextureSpec",
    "SceneSpec",
    "GroundTruth",
    "render",
    "corrupt",
    "bar_polygon",
    "scene_from_dict",
    "scene_to_dict",
]


@dataclass(frozen=True)
class Bar:
    """Vertical bar covering columns ``[x_left, x_left + width_px)`` and rows ``[y_top, y_bottom)``."""

    x_left: int
    width_px: int
    depth_m: float
    y_top: int = 0
    y_bottom: int | None = None
    label: str = "branch"

    def __post_init__(self):
        if self.width_px < 1:
            raise ConfigurationError("bar width must be at least 1 px")
        if not self.depth_m > 0:
            raise ConfigurationError("bar depth must be positive")


@dataclass(frozen=True)
class TextureSpec:
    """Multi-octave value noise: lattice spacings in pixels and their amplitudes."""

    spacings: tuple = (1, 2, 4, 8)
    amplitudes: tuple = (0.4, 0.3, 0.2, 0.1)
    contrast: float = 1.0

    def __post_init__(self):
        if len(self.spacings) != len(self.amplitudes) or not self.spacings:
            raise ConfigurationError("texture needs one amplitude per spacing")
        if any(s < 1 for s in self.spacings) or any(a < 0 for a in self.amplitudes):
            raise ConfigurationError("texture spacings must be >= 1 and amplitudes >= 0")
        if not 0 <= self.contrast <= 1:
            raise ConfigurationError("texture contrast must be in [0, 1]")


@dataclass(frozen=True)
class SceneSpec:
    rig: StereoRig
    width: int
    height: int
    background_depth_m: float
    bars: tuple = ()
    texture: TextureSpec = field(default_factory=TextureSpec)
    noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    seed: int = 0
    boundary_spacing_px: float | None = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigurationError("scene dimensions must be positive")
        if not self.background_depth_m > 0:
            raise ConfigurationError("background depth must be positive")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be >= 0")
        if not 0 <= self.outlier_fraction < 0.5:
            raise ConfigurationError("outlier_fraction must be in [0, 0.5)")
        for bar in self.bars:
            if bar.x_left < 0 or bar.x_left + bar.width_px > self.width:
                raise ConfigurationError(f"bar {bar} does not fit in width {self.width}")
            bottom = self.height if bar.y_bottom is None else bar.y_bottom
            if not 0 <= bar.y_top < bottom <= self.height:
                raise ConfigurationError(f"bar {bar} rows out of range")


@dataclass
class GroundTruth:
    """Exact disparity/depth (NaN where occluded or unmatched) and bar annotations."""

    disparity: np.ndarray
    depth: np.ndarray
    polygons: list
    true_distances: list
    labels: list
    background_depth_m: float
    corrupted_depth: np.ndarray | None = None


class _Texture:
    def __init__(self, spec: TextureSpec, rng: np.random.Generator, x_range, y_range):
        self.spec = spec
        self.layers = []
        x_lo, x_hi = x_range
        y_lo, y_hi = y_range
        for s in spec.spacings:
            ix0 = math.floor(x_lo / s) - 1
            iy0 = math.floor(y_lo / s) - 1
            nx = math.ceil(x_hi / s) - ix0 + 2
            ny = math.ceil(y_hi / s) - iy0 + 2
            self.layers.append((s, ix0, iy0, rng.random((ny, nx))))
        self.norm = float(sum(spec.amplitudes))

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        total = np.zeros(np.broadcast(x, y).shape)
        for (s, ix0, iy0, lattice), amp in zip(self.layers, self.spec.amplitudes):
            u = x / s - ix0
            v = y / s - iy0
            i = np.floor(u).astype(np.int64)
            j = np.floor(v).astype(np.int64)
            fu = u - i
            fv = v - j
            val = (
                lattice[j, i] * (1 - fu) * (1 - fv)
                + lattice[j, i + 1] * fu * (1 - fv)
                + lattice[j + 1, i] * (1 - fu) * fv
                + lattice[j + 1, i + 1] * fu * fv
            )
            total = total + amp * val
        c = self.spec.contrast
        return 0.5 + c * (total / self.norm - 0.5)


def bar_polygon(bar: Bar, height: int, spacing: float | None = None) -> BranchPolygon:
    """Boundary points around a bar: down the left edge, up the right edge.

    ``spacing`` defaults to twice the bar width so that a point's nearest
    neighbour lies across the bar rather than along the same edge.
    """
    bottom = height if bar.y_bottom is None else bar.y_bottom
    if spacing is None:
        spacing = max(2.0 * bar.width_px, 4.0)
    n_side = max(2, int(math.ceil((bottom - bar.y_top) / spacing)) + 1)
    ys = np.linspace(bar.y_top, bottom, n_side)
    xl, xr = float(bar.x_left), float(bar.x_left + bar.width_px)
    left = np.column_stack([np.full(n_side, xl), ys])
    right = np.column_stack([np.full(n_side, xr), ys[::-1]])
    return BranchPolygon(np.vstack([left, right]))


def _elements(spec: SceneSpec):
    """(disparity, column extent in texture space, row extent) for each bar."""
    out = []
    for bar in spec.bars:
        bottom = spec.height if bar.y_bottom is None else bar.y_bottom
        d = spec.rig.w / bar.depth_m
        out.append((d, (bar.x_left - 0.5, bar.x_left + bar.width_px - 0.5), (bar.y_top, bottom)))
    return out


def render(spec: SceneSpec):
    """Render ``(left, right, ground_truth)``; images are float64 in [0, 1]."""
    h, w = spec.height, spec.width
    d_bg = spec.rig.w / spec.background_depth_m
    elements = _elements(spec)
    for d, _, _ in elements:
        if d >= w:
            raise ConfigurationError(f"bar disparity {d:.2f} px exceeds image width {w}")
    if d_bg >= w:
        raise ConfigurationError(f"background disparity {d_bg:.2f} px exceeds image width {w}")

    rng = np.random.default_rng(spec.seed)
    streams = rng.spawn(len(elements) + 2)
    d_max = max([d_bg] + [d for d, _, _ in elements])
    x_range = (-2.0, w + d_max + 2.0)
    y_range = (-2.0, h + 2.0)
    bg_tex = _Texture(spec.texture, streams[0], x_range, y_range)
    bar_tex = [_Texture(spec.texture, s, x_range, y_range) for s in streams[1 : len(elements) + 1]]

    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)

    # Left view: nearest element covering each pixel.
    left = bg_tex(xs, ys)
    disp = np.full((h, w), d_bg)
    for (d, (x0, x1), (y0, y1)), tex in sorted(zip(elements, bar_tex), key=lambda e: e[0][0]):
        cover = (xs >= x0) & (xs < x1) & (ys >= y0) & (ys < y1)
        left[cover] = tex(xs, ys)[cover]
        disp[cover] = d

    # Right view: pixel xr shows the element whose left footprint holds xr + d.
    right = bg_tex(xs + d_bg, ys)
    best = np.full((h, w), d_bg)
    for (d, (x0, x1), (y0, y1)), tex in sorted(zip(elements, bar_tex), key=lambda e: e[0][0]):
        p = xs + d
        cover = (p >= x0) & (p < x1) & (ys >= y0) & (ys < y1) & (d > best)
        right[cover] = tex(p, ys)[cover]
        best[cover] = d

    # A left pixel is matchable if its right position is in frame and not hidden.
    gt_disp = disp.copy()
    pos = xs - disp
    invalid = pos < 0
    for d, (x0, x1), (y0, y1) in elements:
        hidden = (pos + d >= x0) & (pos + d < x1) & (ys >= y0) & (ys < y1) & (d > disp)
        invalid |= hidden
    gt_disp[invalid] = np.nan
    gt_depth = np.full((h, w), np.nan)
    ok = ~invalid
    gt_depth[ok] = spec.rig.w / gt_disp[ok]

    if spec.noise_sigma > 0:
        noise_rng = streams[-1]
        left = left + noise_rng.normal(0.0, spec.noise_sigma, left.shape)
        right = right + noise_rng.normal(0.0, spec.noise_sigma, right.shape)
    left = np.clip(left, 0.0, 1.0)
    right = np.clip(right, 0.0, 1.0)

    polygons = [bar_polygon(bar, h, spec.boundary_spacing_px) for bar in spec.bars]
    gt = GroundTruth(
        disparity=gt_disp,
        depth=gt_depth,
        polygons=polygons,
        true_distances=[bar.depth_m for bar in spec.bars],
        labels=[bar.label for bar in spec.bars],
        background_depth_m=spec.background_depth_m,
    )
    if spec.outlier_fraction > 0:
        gt.corrupted_depth = corrupt(gt, spec.outlier_fraction, spec.seed)
    return left, right, gt


def corrupt(gt: GroundTruth, fraction: float, seed: int, depth: np.ndarray | None = None) -> np.ndarray:
    """Replace ``round(fraction * n)`` in-polygon pixels with background depth.

    ``n`` counts the pixels of each polygon separately; the pixels are
    chosen with a generator seeded by ``seed``.  Works on a copy of
    ``depth`` (default: the exact ground-truth depth).
    """
    if not 0 <= fraction < 0.5:
        raise ConfigurationError("corruption fraction must be in [0, 0.5)")
    base = gt.depth if depth is None else np.asarray(depth, dtype=np.float64)
    out = base.copy()
    if fraction == 0:
        return out
    rng = np.random.default_rng(seed)
    for poly in gt.polygons:
        iy, ix = np.nonzero(rasterize_polygon(poly, out.shape))
        count = int(round(fraction * len(iy)))
        pick = rng.choice(len(iy), size=count, replace=False)
        out[iy[pick], ix[pick]] = gt.background_depth_m
    return out


def scene_from_dict(data: dict) -> SceneSpec:
    """Build a scene from its JSON form (see ``docs/formats.md``)."""
    problems = []
    rig_d = data.get("rig")
    rig = None
    if not isinstance(rig_d, dict):
        problems.append("missing 'rig' object")
    else:
        try:
            rig = StereoRig.from_values(**{k: rig_d[k] for k in ("fx", "fy", "ox", "oy", "baseline_m")})
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"bad rig: {exc}")
    for key in ("width", "height", "background_depth_m"):
        if key not in data:
            problems.append(f"missing {key!r}")
    if problems:
        raise ConfigurationError("; ".join(problems))
    bars = []
    for i, b in enumerate(data.get("bars", [])):
        try:
            bars.append(Bar(**b))
        except (TypeError, ValueError) as exc:
            problems.append(f"bar {i}: {exc}")
    tex = data.get("texture", {})
    try:
        texture = TextureSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in tex.items()})
    except (TypeError, ValueError) as exc:
        problems.append(f"texture: {exc}")
        texture = None
    if problems:
        raise ConfigurationError("; ".join(problems))
    return SceneSpec(
        rig=rig,
        width=int(data["width"]),
        height=int(data["height"]),
        background_depth_m=float(data["background_depth_m"]),
        bars=tuple(bars),
        texture=texture,
        noise_sigma=float(data.get("noise_sigma", 0.0)),
        outlier_fraction=float(data.get("outlier_fraction", 0.0)),
        seed=int(data.get("seed", 0)),
        boundary_spacing_px=data.get("boundary_spacing_px"),
    )


def scene_to_dict(spec: SceneSpec) -> dict:
    return {
        "rig": {k: getattr(spec.rig, k) for k in ("fx", "fy", "ox", "oy", "baseline_m")},
        "width": spec.width,
        "height": spec.height,
        "background_depth_m": spec.background_depth_m,
        "bars": [
            {
                "x_left": b.x_left,
                "width_px": b.width_px,
                "depth_m": b.depth_m,
                "y_top": b.y_top,
                "y_bottom": b.y_bottom,
                "label": b.label,
            }
            for b in spec.bars
        ],
        "texture": {
            "spacings": list(spec.texture.spacings),
            "amplitudes": list(spec.texture.amplitudes),
            "contrast": spec.texture.contrast,
        },
        "noise_sigma": spec.noise_sigma,
        "outlier_fraction": spec.outlier_fraction,
        "seed": spec.seed,
        "boundary_spacing_px": spec.boundary_spacing_px,
    }
