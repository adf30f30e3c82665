"""Brute-force reference implementations, written as plain per-cell loops.

These share no code with the package.  Where a test demands bit-exact
agreement the loops add terms in the same order as the documented
definition (window offsets row-major, top-left first).
"""
import itertools
import math

import numpy as np


def _clamp(v, lo, hi):
    return lo if v < lo else hi if v > hi else v


def ad_volume(left, right, d_min, d_max, squared=False):
    h, w = left.shape
    out = np.full((h, w, d_max - d_min + 1), np.nan)
    for y in range(h):
        for x in range(w):
            for k, d in enumerate(range(d_min, d_max + 1)):
                xr = x - d
                if 0 <= xr < w:
                    diff = float(left[y, x]) - float(right[y, xr])
                    out[y, x, k] = diff * diff if squared else abs(diff)
    return out


def ncc_score(left, right, x, y, d, hw, hh):
    h, w = left.shape
    if y - hh < 0 or y + hh >= h or x - hw < 0 or x + hw >= w or x - d - hw < 0 or x - d + hw >= w:
        return math.nan
    n = (2 * hw + 1) * (2 * hh + 1)
    sum_l = 0.0
    sum_r = 0.0
    for j in range(-hh, hh + 1):
        for i in range(-hw, hw + 1):
            sum_l += float(left[y + j, x + i])
            sum_r += float(right[y + j, x - d + i])
    mu_l = sum_l / n
    mu_r = sum_r / n
    num = 0.0
    var_l = 0.0
    var_r = 0.0
    for j in range(-hh, hh + 1):
        for i in range(-hw, hw + 1):
            a = float(left[y + j, x + i]) - mu_l
            b = float(right[y + j, x - d + i]) - mu_r
            num += a * b
            var_l += a * a
            var_r += b * b
    if var_l <= 1e-12 or var_r <= 1e-12:
        return 0.0
    return min(1.0, max(-1.0, num / math.sqrt(var_l * var_r)))


def ncc_volume(left, right, d_min, d_max, hw, hh):
    h, w = left.shape
    out = np.full((h, w, d_max - d_min + 1), np.nan)
    for y in range(h):
        for x in range(w):
            for k, d in enumerate(range(d_min, d_max + 1)):
                s = ncc_score(left, right, x, y, d, hw, hh)
                if not math.isnan(s):
                    out[y, x, k] = 1.0 - s
    return out


def _window_sum_cell(cost, y, x, k, hw, hh, sy=0, sx=0):
    h, w = cost.shape[:2]
    total = 0.0
    count = 0
    for j in range(-hh, hh + 1):
        for i in range(-hw, hw + 1):
            v = cost[_clamp(y + sy + j, 0, h - 1), _clamp(x + sx + i, 0, w - 1), k]
            if not math.isnan(v):
                total += v
                count += 1
    if count == 0:
        return math.nan
    area = (2 * hw + 1) * (2 * hh + 1)
    return total * (area / count)


def fixed_sum(cost, hw, hh):
    out = np.empty(cost.shape)
    for y, x, k in itertools.product(*map(range, cost.shape)):
        out[y, x, k] = _window_sum_cell(cost, y, x, k, hw, hh)
    return out


def multi_sum(cost, hw, hh, shifts):
    out = np.empty(cost.shape)
    n = len(shifts)
    for y, x, k in itertools.product(*map(range, cost.shape)):
        total = 0.0
        count = 0
        for sy, sx in shifts:
            v = _window_sum_cell(cost, y, x, k, hw, hh, sy, sx)
            if not math.isnan(v):
                total += v
                count += 1
        out[y, x, k] = total * (n / count) if count else math.nan
    return out


def diffusion(cost, weights):
    """sum_n w_n C(n-1), C(n) = mean over centre, up, down, left, right."""
    if len(weights) == 0:
        return cost.copy()
    h, w, dn = cost.shape
    current = cost.copy()
    out = np.zeros(cost.shape)
    for n, wn in enumerate(weights):
        if n > 0:
            nxt = np.empty(cost.shape)
            for y, x, k in itertools.product(range(h), range(w), range(dn)):
                total = 0.0
                count = 0
                for j, i in ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)):
                    v = current[_clamp(y + j, 0, h - 1), _clamp(x + i, 0, w - 1), k]
                    if not math.isnan(v):
                        total += v
                        count += 1
                nxt[y, x, k] = total / count if count else math.nan
            current = nxt
        for y, x, k in itertools.product(range(h), range(w), range(dn)):
            out[y, x, k] = out[y, x, k] + wn * current[y, x, k]
    return out


def wta(cost, d_min):
    h, w, dn = cost.shape
    out = np.full((h, w), np.nan)
    for y in range(h):
        for x in range(w):
            best = None
            for k in range(dn):
                v = cost[y, x, k]
                if math.isnan(v):
                    continue
                if best is None or v < best[0]:
                    best = (v, k)
            if best is not None:
                out[y, x] = d_min + best[1]
    return out


def chain_energy(costs, labels, lam, p1, p2):
    e = sum(costs[i, d] for i, d in enumerate(labels))
    for a, b in zip(labels[:-1], labels[1:]):
        step = abs(a - b)
        e += lam * (0.0 if step == 0 else p1 if step == 1 else p2)
    return e


def chain_minimum(costs, lam, p1, p2):
    n, dn = costs.shape
    return min(chain_energy(costs, seq, lam, p1, p2) for seq in itertools.product(range(dn), repeat=n))


def lr_check(dl, dr, max_diff):
    h, w = dl.shape
    out = dl.copy()
    for y in range(h):
        for x in range(w):
            d = dl[y, x]
            if math.isnan(d):
                continue
            xr = math.floor(x - d + 0.5)
            if not 0 <= xr < w or math.isnan(dr[y, xr]) or abs(d - dr[y, xr]) > max_diff:
                out[y, x] = math.nan
    return out


def median(disp, hw, hh):
    h, w = disp.shape
    out = disp.copy()
    for y in range(h):
        for x in range(w):
            if math.isnan(disp[y, x]):
                continue
            vals = sorted(
                disp[j, i]
                for j in range(max(0, y - hh), min(h, y + hh + 1))
                for i in range(max(0, x - hw), min(w, x + hw + 1))
                if not math.isnan(disp[j, i])
            )
            out[y, x] = vals[(len(vals) - 1) // 2]
    return out


def wls_dense(disp, guide, lam, sigma):
    """Dense normal equations of the WLS objective, solved directly."""
    h, w = disp.shape
    n = h * w
    a = np.zeros((n, n))
    b = np.zeros(n)

    def idx(y, x):
        return y * w + x

    for y in range(h):
        for x in range(w):
            p = idx(y, x)
            if not math.isnan(disp[y, x]):
                a[p, p] += 1.0
                b[p] += disp[y, x]
            for ny, nx in ((y, x + 1), (y + 1, x)):
                if ny < h and nx < w:
                    q = idx(ny, nx)
                    wt = lam * math.exp(-((guide[y, x] - guide[ny, nx]) ** 2) / (2 * sigma * sigma))
                    a[p, p] += wt
                    a[q, q] += wt
                    a[p, q] -= wt
                    a[q, p] -= wt
    return np.linalg.solve(a, b).reshape(h, w)


def rmse(pred, ref):
    total = 0.0
    n = 0
    for p, r in zip(np.ravel(pred), np.ravel(ref)):
        if math.isfinite(p) and math.isfinite(r):
            total += (p - r) ** 2
            n += 1
    return math.sqrt(total / n)


def bad_count(pred, ref, thr):
    bad = n = 0
    for p, r in zip(np.ravel(pred), np.ravel(ref)):
        if math.isfinite(p) and math.isfinite(r):
            n += 1
            bad += abs(p - r) > thr
    return bad, n


def point_in_polygon(px, py, pts):
    """Even-odd ray casting."""
    inside = False
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        if (y0 > py) != (y1 > py):
            xc = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
            if px < xc:
                inside = not inside
    return inside


def raster_mask(pts, shape):
    h, w = shape
    return np.array([[point_in_polygon(x + 0.5, y + 0.5, pts) for x in range(w)] for y in range(h)])


def best_partition_centroids(pts):
    """Exhaustive search over partitions of 6 points into two triangles, minimum total perimeter."""
    pts = np.asarray(pts, dtype=float)
    best = None
    idx = list(range(len(pts)))
    for first in itertools.combinations(idx, 3):
        if 0 not in first:
            continue
        second = tuple(i for i in idx if i not in first)
        per = 0.0
        for tri in (first, second):
            for a, b in itertools.combinations(tri, 2):
                per += float(np.hypot(*(pts[a] - pts[b])))
        if best is None or per < best[0]:
            best = (per, first, second)
    return sorted(tuple(pts[list(t)].mean(axis=0)) for t in best[1:])
