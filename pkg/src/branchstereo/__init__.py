"""Stereo disparity, triangulation and robust branch-to-camera distance.

Typical use::

    from branchstereo import PipelineConfig, compute_disparity, depth_from_disparity
    from branchstereo.fusion import estimate_distance_centroid

    disp = compute_disparity(left, right, PipelineConfig(d_max=64))
    depth = depth_from_disparity(rig, disp)
    est = estimate_distance_centroid(polygon, depth, k=3, m=8)
"""
from .errors import (
    AnnotationError,
    BranchStereoError,
    ConfigurationError,
    ConvergenceError,
    FusionError,
    GeometryError,
    InputError,
    NumericalError,
    ParseError,
)
from .geometry import StereoRig, CameraIntrinsics, ScenePoint, PixelPair
from .cost import CostVolume, WindowSpec, build_cost_volume
from .fusion import BranchPolygon, DistanceEstimate, estimate_distance_centroid, estimate_distance_polygon, mad_filter
from .pipeline import PipelineConfig, compute_disparity, depth_from_disparity, estimate_distance

__version__ = "0.1.0"
