"""Cost aggregation and disparity selection.

Disparity maps are float64 arrays with NaN marking invalid pixels.

Window sums clamp indices to the frame edge.  NaN (invalid) cells are left
out of every sum, and a window that only partly overlaps valid cells has its
sum rescaled by ``area / n_valid`` so it stays comparable with full windows.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cost import CostVolume, WindowSpec
from .errors import ConfigurationError

__all__ = [
    "AggregationSpec",
    "SgmSpec",
    "aggregate",
    "aggregate_fixed",
    "aggregate_multi",
    "aggregate_diffusion",
    "select_wta",
    "sgm_aggregate",
    "sgm_optimize",
    "energy",
    "DIFFUSION_STENCIL",
    "SGM_DIRECTIONS",
]

# Centre first, then the 4-connected neighbours.
DIFFUSION_STENCIL = ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1))

# (dy, dx) scan directions; the first four are the horizontal/vertical ones.
SGM_DIRECTIONS = ((0, 1), (0, -1), (1, 0), (-1, 0), (1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass(frozen=True)
class AggregationSpec:
    kind: str = "fixed"
    window: WindowSpec = field(default_factory=lambda: WindowSpec(2, 2))
    shifted_windows: tuple = ((0, 0),)
    diffusion_iterations: int = 0
    diffusion_weights: tuple = ()

    def __post_init__(self):
        if self.kind not in ("fixed", "multi", "diffusion"):
            raise ConfigurationError(f"unknown aggregation kind {self.kind!r}")
        if self.kind == "multi" and len(self.shifted_windows) < 1:
            raise ConfigurationError("multi-window aggregation needs at least one window")
        if self.kind == "diffusion":
            if self.diffusion_iterations < 0:
                raise ConfigurationError("diffusion_iterations must be >= 0")
            if len(self.diffusion_weights) != self.diffusion_iterations:
                raise ConfigurationError("need exactly one diffusion weight per iteration")
            if any(w < 0 for w in self.diffusion_weights):
                raise ConfigurationError("diffusion weights must be non-negative")


@dataclass(frozen=True)
class SgmSpec:
    """Semi-global matching parameters.

    The path penalty for a one-pixel disparity step is ``lam * p1`` and for
    any larger step ``lam * p2``.
    """

    lam: float = 1.0
    p1: float = 8.0 / 255.0
    p2: float = 32.0 / 255.0
    directions: int = 8

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigurationError("lambda must be >= 0")
        if self.directions not in (4, 8):
            raise ConfigurationError("directions must be 4 or 8")
        if self.lam > 0 and not (0 < self.p1 <= self.p2):
            raise ConfigurationError(f"need 0 < p1 <= p2, got p1={self.p1}, p2={self.p2}")
        if self.lam == 0 and (self.p1 < 0 or self.p2 < self.p1):
            raise ConfigurationError(f"need 0 <= p1 <= p2, got p1={self.p1}, p2={self.p2}")

    @classmethod
    def scaled(cls, window: WindowSpec, lam=1.0, directions=8) -> SgmSpec:
        """Penalties 8|T| and 32|T| in 8-bit intensity units."""
        return cls(lam, 8.0 * window.area / 255.0, 32.0 * window.area / 255.0, directions)


def _window_sum(cost: np.ndarray, window: WindowSpec, shift=(0, 0)) -> np.ndarray:
    h, w = cost.shape[:2]
    sy, sx = shift
    total = np.zeros(cost.shape)
    count = np.zeros(cost.shape, dtype=np.int64)
    for dy, dx in window.offsets():
        rows = np.clip(np.arange(h) + sy + dy, 0, h - 1)
        cols = np.clip(np.arange(w) + sx + dx, 0, w - 1)
        cell = cost[rows][:, cols]
        ok = ~np.isnan(cell)
        total = total + np.where(ok, cell, 0.0)
        count += ok
    out = np.full(cost.shape, np.nan)
    has = count > 0
    out[has] = total[has] * (window.area / count[has])
    return out


def aggregate_fixed(vol: CostVolume, window: WindowSpec) -> CostVolume:
    return vol.with_cost(_window_sum(vol.cost, window))


def aggregate_multi(vol: CostVolume, spec: AggregationSpec) -> CostVolume:
    """Sum of window sums over the shifted windows ``spec.shifted_windows``.

    Each shift is ``(dy, dx)``: the window is centred at ``(y + dy, x + dx)``.
    """
    n = len(spec.shifted_windows)
    total = np.zeros(vol.cost.shape)
    count = np.zeros(vol.cost.shape, dtype=np.int64)
    for shift in spec.shifted_windows:
        part = _window_sum(vol.cost, spec.window, tuple(shift))
        ok = ~np.isnan(part)
        total = total + np.where(ok, part, 0.0)
        count += ok
    out = np.full(vol.cost.shape, np.nan)
    has = count > 0
    out[has] = total[has] * (n / count[has])
    return vol.with_cost(out)


def _diffuse_step(cost: np.ndarray) -> np.ndarray:
    h, w = cost.shape[:2]
    total = np.zeros(cost.shape)
    count = np.zeros(cost.shape, dtype=np.int64)
    for dy, dx in DIFFUSION_STENCIL:
        rows = np.clip(np.arange(h) + dy, 0, h - 1)
        cols = np.clip(np.arange(w) + dx, 0, w - 1)
        cell = cost[rows][:, cols]
        ok = ~np.isnan(cell)
        total = total + np.where(ok, cell, 0.0)
        count += ok
    out = np.full(cost.shape, np.nan)
    has = count > 0
    out[has] = total[has] / count[has]
    return out


def aggregate_diffusion(vol: CostVolume, spec: AggregationSpec) -> CostVolume:
    """Weighted sum of successively diffused volumes.

    With ``C0 = C`` and ``C(n)`` the 5-point neighbourhood mean of
    ``C(n-1)``, returns ``sum_n w_n * C(n-1)`` for ``n = 1..N``.  ``N = 0``
    returns the input unchanged.
    """
    if spec.diffusion_iterations == 0:
        return vol.with_cost(vol.cost.copy())
    current = vol.cost
    out = np.zeros(vol.cost.shape)
    for n, weight in enumerate(spec.diffusion_weights):
        if n > 0:
            current = _diffuse_step(current)
        out = out + weight * current
    return vol.with_cost(out)


def aggregate(vol: CostVolume, spec: AggregationSpec) -> CostVolume:
    if spec.kind == "fixed":
        return aggregate_fixed(vol, spec.window)
    if spec.kind == "multi":
        return aggregate_multi(vol, spec)
    return aggregate_diffusion(vol, spec)


def select_wta(vol: CostVolume) -> np.ndarray:
    """Per-pixel cost argmin; ties go to the smaller disparity."""
    cost = np.where(np.isnan(vol.cost), np.inf, vol.cost)
    idx = np.argmin(cost, axis=2)
    disp = (idx + vol.d_min).astype(np.float64)
    disp[np.all(np.isnan(vol.cost), axis=2)] = np.nan
    return disp


def _scan(cost: np.ndarray, cross: int, p1: float, p2: float) -> np.ndarray:
    """Path costs along axis 1 of ``cost`` (lines, steps, D).

    The predecessor of line ``i`` at step ``j`` is line ``i - cross`` at
    step ``j - 1``; lines without a predecessor restart the path.
    """
    n_lines, n_steps, _ = cost.shape
    out = np.empty(cost.shape)
    out[:, 0] = cost[:, 0]
    for j in range(1, n_steps):
        prev = out[:, j - 1]
        if cross == 0:
            pred = prev
            lo, hi = 0, n_lines
        elif cross > 0:
            pred = prev[:-1]
            lo, hi = 1, n_lines
            out[0, j] = cost[0, j]
        else:
            pred = prev[1:]
            lo, hi = 0, n_lines - 1
            out[-1, j] = cost[-1, j]
        m = pred.min(axis=1, keepdims=True)
        best = np.minimum(pred, m + p2)
        best[:, 1:] = np.minimum(best[:, 1:], pred[:, :-1] + p1)
        best[:, :-1] = np.minimum(best[:, :-1], pred[:, 1:] + p1)
        out[lo:hi, j] = cost[lo:hi, j] + (best - m)
    return out


def _path_cost(cost: np.ndarray, direction, p1: float, p2: float) -> np.ndarray:
    dy, dx = direction
    if dx != 0:
        c = cost if dx > 0 else cost[:, ::-1]
        path = _scan(c, dy, p1, p2)
        return path if dx > 0 else path[:, ::-1]
    c = np.transpose(cost, (1, 0, 2))
    if dy < 0:
        c = c[:, ::-1]
    path = _scan(c, 0, p1, p2)
    if dy < 0:
        path = path[:, ::-1]
    return np.transpose(path, (1, 0, 2))


def sgm_aggregate(vol: CostVolume, spec: SgmSpec) -> CostVolume:
    """Semi-global aggregated cost volume.

    Each direction's path cost contributes its smoothing part ``L_r - C``
    and the data cost is added once, so the data term is not counted once
    per direction.  On a single scanline this gives exact min-marginals of
    the chain energy.  Cells invalid in the input stay invalid.
    """
    invalid = np.isnan(vol.cost)
    p1 = spec.lam * spec.p1
    p2 = spec.lam * spec.p2
    if np.all(invalid):
        return vol.with_cost(vol.cost.copy())
    cmax = float(np.max(vol.cost[~invalid]))
    h, w = vol.height, vol.width
    bound = (abs(cmax) + p2) * (h + w) * spec.directions
    if not np.isfinite(bound) or bound > 1e300:
        raise ConfigurationError("accumulated path costs would overflow float64")
    filled = np.where(invalid, cmax, vol.cost)
    total = np.zeros(vol.cost.shape)
    for direction in SGM_DIRECTIONS[: spec.directions]:
        total = total + (_path_cost(filled, direction, p1, p2) - filled)
    total = total + filled
    total[invalid] = np.nan
    return vol.with_cost(total)


def sgm_optimize(vol: CostVolume, spec: SgmSpec) -> np.ndarray:
    return select_wta(sgm_aggregate(vol, spec))


def _rho(step: np.ndarray, p1: float, p2: float) -> np.ndarray:
    step = np.abs(step)
    return np.where(step == 0, 0.0, np.where(step == 1, p1, p2))


def energy(vol: CostVolume, disp: np.ndarray, spec: SgmSpec) -> float:
    """Data cost plus ``lam`` times the two-level smoothness cost of ``disp``.

    Only valid pixels enter the data term and only pairs of valid
    horizontal/vertical neighbours the smoothness term.  Disparities are
    rounded to the integer grid.
    """
    d = np.asarray(disp, dtype=np.float64)
    valid = ~np.isnan(d)
    idx = np.zeros(d.shape, dtype=np.int64)
    idx[valid] = np.rint(d[valid]).astype(np.int64) - vol.d_min
    ys, xs = np.nonzero(valid)
    data_cells = vol.cost[ys, xs, idx[ys, xs]]
    e_data = float(np.sum(data_cells[~np.isnan(data_cells)]))
    di = np.where(valid, idx, 0)
    horiz = valid[:, :-1] & valid[:, 1:]
    vert = valid[:-1, :] & valid[1:, :]
    e_smooth = float(
        np.sum(_rho(di[:, :-1] - di[:, 1:], spec.p1, spec.p2)[horiz])
        + np.sum(_rho(di[:-1, :] - di[1:, :], spec.p1, spec.p2)[vert])
    )
    return e_data + spec.lam * e_smooth
