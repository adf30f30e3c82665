"""End-to-end disparity pipeline and branch-distance helpers.

Stage names carry a letter prefix in pipeline order:
``a_left``/``b_right`` inputs, ``c_left_pre``/``d_right_pre`` after the
optional pre-processing hook, ``e_disparity`` after selection and the
classical post-processing, ``f_wls`` after WLS smoothing.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .aggregate import AggregationSpec, SgmSpec, aggregate, aggregate_fixed, select_wta, sgm_aggregate
from .cost import WindowSpec, as_gray, build_cost_volume
from .errors import ConfigurationError
from .fusion import DEFAULT_K, DEFAULT_M, BranchPolygon, estimate_distance_centroid, estimate_distance_polygon
from .geometry import StereoRig, disparity_to_depth
from .postproc import LrSpec, WlsSpec, lr_check, median_filter, subpixel_refine, wls_filter

__all__ = ["PipelineConfig", "compute_disparity", "disparity_volume", "estimate_distance", "depth_from_disparity"]

AGG_KINDS = ("fixed", "multi", "diffusion", "sgm")


@dataclass(frozen=True)
class PipelineConfig:
    d_min: int = 0
    d_max: int = 64
    cost: str = "ad"
    window: WindowSpec = field(default_factory=lambda: WindowSpec(2, 2))
    agg: str = "sgm"
    shifted_windows: tuple = ((0, 0), (-2, 0), (2, 0), (0, -2), (0, 2))
    diffusion_weights: tuple = (1.0, 1.0, 1.0)
    lam: float = 1.0
    p1: float | None = None
    p2: float | None = None
    dirs: int = 8
    lr_maxdiff: float | None = None
    subpixel: bool = True
    median: WindowSpec | None = field(default_factory=lambda: WindowSpec(1, 1))
    wls_lambda: float | None = None
    wls_sigma: float = 0.05
    k: float = DEFAULT_K
    m: int = DEFAULT_M
    variant: str = "centroid"
    read: str = "nearest"
    preprocess: Callable | None = None

    def __post_init__(self):
        if self.agg not in AGG_KINDS:
            raise ConfigurationError(f"unknown aggregation {self.agg!r}; choose from {AGG_KINDS}")
        if self.variant not in ("centroid", "polygon"):
            raise ConfigurationError(f"unknown fusion variant {self.variant!r}")
        if self.read not in ("nearest", "bilinear"):
            raise ConfigurationError(f"unknown read mode {self.read!r}")
        if self.k < 0 or self.m < 0:
            raise ConfigurationError("k and m must be non-negative")
        self.sgm_spec()

    def sgm_spec(self) -> SgmSpec:
        area = self.window.area
        p1 = 8.0 * area / 255.0 if self.p1 is None else self.p1
        p2 = 32.0 * area / 255.0 if self.p2 is None else self.p2
        return SgmSpec(self.lam, p1, p2, self.dirs)

    def agg_spec(self) -> AggregationSpec:
        if self.agg == "multi":
            return AggregationSpec("multi", self.window, tuple(self.shifted_windows))
        if self.agg == "diffusion":
            w = tuple(self.diffusion_weights)
            return AggregationSpec("diffusion", self.window, diffusion_iterations=len(w), diffusion_weights=w)
        return AggregationSpec("fixed", self.window)

    def without_post(self) -> PipelineConfig:
        return replace(self, lr_maxdiff=None, subpixel=False, median=None, wls_lambda=None)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["window"] = f"{self.window.width}x{self.window.height}"
        out["median"] = None if self.median is None else f"{self.median.width}x{self.median.height}"
        out["preprocess"] = None if self.preprocess is None else getattr(self.preprocess, "__name__", "custom")
        sgm = self.sgm_spec()
        out["p1"], out["p2"] = sgm.p1, sgm.p2
        out["shifted_windows"] = [list(s) for s in self.shifted_windows]
        out["diffusion_weights"] = list(self.diffusion_weights)
        if math.isinf(self.k):
            out["k"] = "inf"
        return out


def disparity_volume(left, right, config: PipelineConfig):
    """Cost volume after aggregation (and SGM when ``agg == "sgm"``)."""
    vol = build_cost_volume(left, right, config.d_min, config.d_max, config.cost, config.window)
    if config.agg == "sgm":
        if config.cost != "ncc":
            vol = aggregate_fixed(vol, config.window)
        return sgm_aggregate(vol, config.sgm_spec())
    return aggregate(vol, config.agg_spec())


def _raw_disparity(left, right, config: PipelineConfig):
    vol = disparity_volume(left, right, config)
    disp = select_wta(vol)
    if config.subpixel:
        disp = subpixel_refine(vol, disp)
    return disp


def compute_disparity(left, right, config: PipelineConfig | None = None, stages: dict | None = None) -> np.ndarray:
    """Left-view disparity map (NaN = invalid).

    Pass a dict as ``stages`` to collect intermediate maps keyed by stage name.
    """
    config = config or PipelineConfig()
    left = as_gray(left)
    right = as_gray(right)
    if stages is not None:
        stages["a_left"] = left
        stages["b_right"] = right
    if config.preprocess is not None:
        left = as_gray(config.preprocess(left))
        right = as_gray(config.preprocess(right))
    if stages is not None:
        stages["c_left_pre"] = left
        stages["d_right_pre"] = right
    disp = _raw_disparity(left, right, config)
    if config.lr_maxdiff is not None:
        # Right-view map: run the same matcher on the mirrored, swapped pair.
        flipped = _raw_disparity(right[:, ::-1].copy(), left[:, ::-1].copy(), config)
        disp = lr_check(disp, flipped[:, ::-1], LrSpec(config.lr_maxdiff))
    if config.median is not None:
        disp = median_filter(disp, config.median)
    if stages is not None:
        stages["e_disparity"] = disp
    if config.wls_lambda is not None and config.wls_lambda > 0:
        disp = wls_filter(disp, left, WlsSpec(config.wls_lambda, config.wls_sigma))
        if stages is not None:
            stages["f_wls"] = disp
    return disp


def depth_from_disparity(rig: StereoRig, disp) -> np.ndarray:
    return disparity_to_depth(rig, np.asarray(disp, dtype=np.float64))


def estimate_distance(poly: BranchPolygon, depth, config: PipelineConfig | None = None, rig=None, quantity="z"):
    config = config or PipelineConfig()
    if config.variant == "polygon":
        return estimate_distance_polygon(poly, depth, config.k, rig=rig, quantity=quantity)
    return estimate_distance_centroid(poly, depth, config.k, config.m, config.read, rig=rig, quantity=quantity)
