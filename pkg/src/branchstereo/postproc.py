"""Disparity refinement: left-right check, subpixel fit, median and WLS filters."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .cost import CostVolume, WindowSpec
from .errors import ConfigurationError, ConvergenceError, InputError

__all__ = [
    "LrSpec",
    "WlsSpec",
    "lr_check",
    "subpixel_refine",
    "median_filter",
    "wls_filter",
    "wls_system",
    "wls_objective",
    "similarity_weights",
]


@dataclass(frozen=True)
class LrSpec:
    max_diff: float = 1.0

    def __post_init__(self):
        if self.max_diff < 0:
            raise ConfigurationError("max_diff must be >= 0")


@dataclass(frozen=True)
class WlsSpec:
    """Weighted-least-squares smoothing parameters.

    ``sigma`` is in normalised intensity units (images in [0, 1]).  Invalid
    pixels get zero data weight, so the solve also fills holes; set
    ``fill_holes=False`` to put them back to NaN afterwards.
    """

    lam: float = 5.0
    sigma: float = 0.05
    fill_holes: bool = True
    tol: float = 1e-8

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigurationError("WLS lambda must be >= 0")
        if not self.sigma > 0:
            raise ConfigurationError("WLS sigma must be > 0")
        if not (0 < self.tol <= 1e-6):
            raise ConfigurationError("WLS tolerance must be in (0, 1e-6]")


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise InputError(f"shape mismatch: {a.shape} vs {b.shape}")


def lr_check(left_disp: np.ndarray, right_disp: np.ndarray, spec: LrSpec) -> np.ndarray:
    """Invalidate left disparities that disagree with the right-view map.

    Pixel ``(x, y)`` looks up the right map at column
    ``floor(x - d_L + 0.5)``; off-frame lookups and invalid right values
    invalidate the pixel.
    """
    _check_same_shape(left_disp, right_disp)
    h, w = left_disp.shape
    out = left_disp.astype(np.float64, copy=True)
    valid = ~np.isnan(left_disp)
    xs = np.broadcast_to(np.arange(w), (h, w))
    xr = np.floor(xs - np.where(valid, left_disp, 0.0) + 0.5).astype(np.int64)
    inside = valid & (xr >= 0) & (xr < w)
    rows = np.broadcast_to(np.arange(h)[:, None], (h, w))
    dr = np.full((h, w), np.nan)
    dr[inside] = right_disp[rows[inside], xr[inside]]
    with np.errstate(invalid="ignore"):
        keep = inside & (np.abs(left_disp - dr) <= spec.max_diff)
    out[~keep] = np.nan
    return out


def subpixel_refine(vol: CostVolume, disp: np.ndarray) -> np.ndarray:
    """Parabola fit through the costs at ``d - 1, d, d + 1``.

    The correction is clamped to [-0.5, 0.5].  Pixels at the ends of the
    search range, with an invalid neighbour cost, or with non-positive
    curvature keep their integer disparity.
    """
    h, w = disp.shape
    out = disp.astype(np.float64, copy=True)
    valid = ~np.isnan(disp)
    k = np.zeros((h, w), dtype=np.int64)
    k[valid] = np.rint(disp[valid]).astype(np.int64) - vol.d_min
    n = vol.cost.shape[2]
    ok = valid & (k >= 1) & (k <= n - 2)
    ys, xs = np.nonzero(ok)
    kk = k[ys, xs]
    c0 = vol.cost[ys, xs, kk]
    cm = vol.cost[ys, xs, kk - 1]
    cp = vol.cost[ys, xs, kk + 1]
    denom = 2.0 * (cp + cm - 2.0 * c0)
    good = np.isfinite(denom) & (denom > 0)
    delta = np.zeros(len(ys))
    delta[good] = (cp[good] - cm[good]) / denom[good]
    delta = np.clip(delta, -0.5, 0.5)
    out[ys[good], xs[good]] = (kk[good] + vol.d_min) - delta[good]
    return out


def median_filter(disp: np.ndarray, window: WindowSpec) -> np.ndarray:
    """Median over the valid pixels of ``window``; even counts take the lower middle.

    Invalid pixels stay invalid; off-frame neighbours are ignored.
    """
    hh, hw = window.half_height, window.half_width
    padded = np.pad(disp.astype(np.float64), ((hh, hh), (hw, hw)), constant_values=np.nan)
    view = np.lib.stride_tricks.sliding_window_view(padded, (window.height, window.width))
    stack = np.sort(view.reshape(disp.shape + (-1,)), axis=2)
    count = np.sum(~np.isnan(stack), axis=2)
    pick = np.maximum(count - 1, 0) // 2
    med = np.take_along_axis(stack, pick[..., None], axis=2)[..., 0]
    return np.where(np.isnan(disp), np.nan, med)


def similarity_weights(guide: np.ndarray, sigma: float):
    """Edge weights for right and down neighbours of every pixel."""
    g = np.asarray(guide, dtype=np.float64)
    two_s2 = 2.0 * sigma * sigma
    w_right = np.exp(-((g[:, :-1] - g[:, 1:]) ** 2) / two_s2)
    w_down = np.exp(-((g[:-1, :] - g[1:, :]) ** 2) / two_s2)
    return w_right, w_down


def _data_weights(disp: np.ndarray, data_weights):
    if data_weights is None:
        return (~np.isnan(disp)).astype(np.float64)
    dw = np.asarray(data_weights, dtype=np.float64)
    _check_same_shape(dw, disp)
    if np.any(dw < 0):
        raise InputError("data weights must be non-negative")
    return np.where(np.isnan(disp), 0.0, dw)


def wls_system(disp: np.ndarray, guide: np.ndarray, spec: WlsSpec, data_weights=None):
    """Normal equations ``A x = b`` of the WLS objective, as sparse CSR."""
    h, w = disp.shape
    n = h * w
    dw = _data_weights(disp, data_weights)
    w_right, w_down = similarity_weights(guide, spec.sigma)
    idx = np.arange(n).reshape(h, w)
    src = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    dst = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    wt = spec.lam * np.concatenate([w_right.ravel(), w_down.ravel()])
    diag = dw.ravel().copy()
    np.add.at(diag, src, wt)
    np.add.at(diag, dst, wt)
    rows = np.concatenate([np.arange(n), src, dst])
    cols = np.concatenate([np.arange(n), dst, src])
    vals = np.concatenate([diag, -wt, -wt])
    a = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    b = (dw * np.where(np.isnan(disp), 0.0, disp)).ravel()
    return a, b


def wls_objective(d_prime, disp, guide, spec: WlsSpec, data_weights=None) -> float:
    dw = _data_weights(disp, data_weights)
    resid = np.where(dw > 0, d_prime - np.where(np.isnan(disp), 0.0, disp), 0.0)
    w_right, w_down = similarity_weights(guide, spec.sigma)
    smooth = np.sum(w_right * (d_prime[:, :-1] - d_prime[:, 1:]) ** 2) + np.sum(
        w_down * (d_prime[:-1, :] - d_prime[1:, :]) ** 2
    )
    return float(np.sum(dw * resid**2) + spec.lam * smooth)


def wls_filter(disp: np.ndarray, guide: np.ndarray, spec: WlsSpec, data_weights=None) -> np.ndarray:
    """Edge-preserving smoothing guided by ``guide`` intensities.

    Solves the normal equations with Jacobi-preconditioned conjugate
    gradients, capped at ``10 * sqrt(n_pixels)`` iterations.

    Raises:
        ConvergenceError: if the relative residual is still above
            ``spec.tol`` at the cap.
    """
    disp = np.asarray(disp, dtype=np.float64)
    guide = np.asarray(guide, dtype=np.float64)
    _check_same_shape(disp, guide)
    if spec.lam == 0:
        return disp.copy()
    valid = ~np.isnan(disp)
    if not np.any(valid):
        raise InputError("WLS needs at least one valid disparity")
    a, b = wls_system(disp, guide, spec, data_weights)
    diag = a.diagonal()
    precond = sp.diags(np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0))
    x0 = np.where(valid, disp, np.nanmean(disp)).ravel()
    max_iter = max(1, int(math.ceil(10 * math.sqrt(disp.size))))
    x, _ = cg(a, b, x0=x0, rtol=spec.tol, atol=0.0, maxiter=max_iter, M=precond)
    bnorm = float(np.linalg.norm(b))
    resid = float(np.linalg.norm(b - a @ x)) / (bnorm if bnorm > 0 else 1.0)
    if not resid <= max(spec.tol, 1e-6):
        raise ConvergenceError("WLS solve did not converge", resid, max_iter)
    out = x.reshape(disp.shape)
    if not spec.fill_holes:
        out[~valid] = np.nan
    return out
