import math

import numpy as np
import pytest

from branchstereo.errors import ConfigurationError
from branchstereo.fusion import estimate_distance_centroid, rasterize_polygon
from branchstereo.geometry import StereoRig
from branchstereo.pipeline import PipelineConfig, compute_disparity
from branchstereo.synth import Bar, SceneSpec, TextureSpec, corrupt, render, scene_from_dict, scene_to_dict


def test_plane_disparity_exact(rig100):
    _, _, gt = render(SceneSpec(rig100, 96, 64, 2.5))
    valid = np.isfinite(gt.disparity)
    assert np.all(gt.disparity[valid] == 40.0)
    # columns whose match would fall left of the frame are invalid
    assert not valid[:, :40].any() and valid[:, 40:].all()


def test_bar_over_plane_disparities(rig100):
    _, _, gt = render(SceneSpec(rig100, 160, 32, 3.0, bars=(Bar(120, 6, 1.0),)))
    assert np.all(gt.disparity[:, 120:126] == 100.0)
    bg = gt.disparity[:, 60:110]
    assert np.nanmax(np.abs(bg - 100 / 3)) < 1e-12
    assert gt.true_distances == [1.0]


def test_depth_times_disparity_is_w(rig100):
    _, _, gt = render(SceneSpec(rig100, 160, 32, 2.7, bars=(Bar(100, 5, 1.3), Bar(130, 3, 0.9))))
    ok = np.isfinite(gt.depth)
    assert np.all(np.isfinite(gt.disparity) == ok)
    rel = np.abs(gt.depth[ok] * gt.disparity[ok] - rig100.w) / rig100.w
    assert rel.max() <= 1e-12


def test_deterministic():
    rig = StereoRig.from_values(800, 800, 40, 20, 0.1)
    spec = SceneSpec(rig, 80, 40, 3.0, bars=(Bar(50, 4, 1.5),), noise_sigma=0.01, outlier_fraction=0.1, seed=9)
    a, b = render(spec), render(spec)
    for x, y in zip(a[:2], b[:2]):
        assert x.tobytes() == y.tobytes()
    assert a[2].disparity.tobytes() == b[2].disparity.tobytes()
    assert a[2].corrupted_depth.tobytes() == b[2].corrupted_depth.tobytes()
    other = render(SceneSpec(rig, 80, 40, 3.0, bars=(Bar(50, 4, 1.5),), noise_sigma=0.01, seed=10))
    assert other[0].tobytes() != a[0].tobytes()


def test_warp_consistency_integer_disparities():
    # W = 120: bar at 1.5 m -> 80 px, background at 3 m -> 40 px
    rig = StereoRig.from_values(1200, 1200, 0, 0, 0.1)
    left, right, gt = render(SceneSpec(rig, 200, 24, 3.0, bars=(Bar(150, 7, 1.5, 4, 20),)))
    h, w = left.shape
    checked = 0
    for y in range(h):
        for x in range(w):
            d = gt.disparity[y, x]
            if np.isfinite(d):
                assert d == int(d)
                assert left[y, x] == right[y, x - int(d)]
                checked += 1
    assert checked > 0.5 * h * w
    # bar pixels are matched too
    assert np.sum(gt.disparity == 80) == 7 * 16


def test_occluded_background_invalid(rig100):
    _, _, gt = render(SceneSpec(rig100, 200, 16, 2.0, bars=(Bar(150, 10, 1.0),)))
    # background left of the bar is hidden behind it in the right view
    assert np.isnan(gt.disparity[:, 100:110]).all()
    assert np.isfinite(gt.disparity[:, 110:]).all()


def test_bar_too_wide_rejected(rig100):
    with pytest.raises(ConfigurationError, match="exceeds image width"):
        render(SceneSpec(rig100, 90, 16, 3.0, bars=(Bar(10, 4, 1.0),)))


def test_polygon_covers_bar(rig100):
    _, _, gt = render(SceneSpec(rig100, 160, 40, 3.0, bars=(Bar(120, 6, 1.0, 5, 35),)))
    mask = rasterize_polygon(gt.polygons[0], gt.depth.shape)
    assert mask.sum() == 6 * 30
    assert np.all(gt.depth[mask] == 1.0)


def bar_gt():
    rig = StereoRig.from_values(1000, 1000, 64, 64, 0.063)
    return render(SceneSpec(rig, 128, 128, 3.0, bars=(Bar(60, 5, 1.5, 14, 34),)))[2]


def test_corrupt_counts():
    gt = bar_gt()
    assert corrupt(gt, 0.0, 1).tobytes() == gt.depth.tobytes()
    out = corrupt(gt, 0.2, 1)
    changed = (out != gt.depth) & np.isfinite(gt.depth)
    assert np.count_nonzero(changed) == 20
    assert np.array_equal(np.isnan(out), np.isnan(gt.depth))
    assert np.all(out[changed] == 3.0)
    assert corrupt(gt, 0.2, 1).tobytes() == out.tobytes()
    for bad in (0.5, 0.7, -0.1):
        with pytest.raises(ConfigurationError):
            corrupt(gt, bad, 1)


def test_filtered_estimate_beats_mean_on_corruption():
    rig = StereoRig.from_values(1000, 1000, 64, 64, 0.063)
    _, _, gt = render(SceneSpec(rig, 128, 128, 3.0, bars=(Bar(60, 6, 1.5, 8, 120),)))
    depth = corrupt(gt, 0.2, 4)
    poly = gt.polygons[0]
    filt = abs(estimate_distance_centroid(poly, depth).distance_m - 1.5)
    mask = rasterize_polygon(poly, depth.shape)
    raw = abs(float(np.mean(depth[mask])) - 1.5)
    assert filt <= 0.02
    assert raw > 5 * 0.02


def test_textureless_mode_is_flat(rig100):
    left, right, _ = render(SceneSpec(rig100, 64, 16, 3.0, texture=TextureSpec(contrast=0.0)))
    assert np.ptp(left) == 0 and np.ptp(right) == 0


def test_outlier_fraction_bounds(rig100):
    with pytest.raises(ConfigurationError):
        SceneSpec(rig100, 64, 16, 3.0, outlier_fraction=0.5)


def test_scene_dict_round_trip(rig100):
    spec = SceneSpec(rig100, 120, 40, 3.0, bars=(Bar(100, 3, 1.2, 2, 30),), noise_sigma=0.01, seed=3)
    again = scene_from_dict(scene_to_dict(spec))
    assert again == spec
    with pytest.raises(ConfigurationError, match="missing"):
        scene_from_dict({"width": 3})


@pytest.mark.slow
def test_pipeline_recovers_plane():
    rig = StereoRig.from_values(1000, 1000, 64, 64, 0.1)
    left, right, gt = render(SceneSpec(rig, 128, 96, 2.5, seed=1))
    disp = compute_disparity(left, right, PipelineConfig(d_max=48))
    core = np.zeros(gt.disparity.shape, bool)
    core[3:-3, 52:-3] = True
    err = np.abs(disp[core] - gt.disparity[core])
    assert np.mean(err <= 1.0) >= 0.99
    assert not math.isnan(float(np.nanmean(disp)))
