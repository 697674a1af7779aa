"""Numpy implementations of the inner loops, used when the extension is absent.

Same signatures and bit-identical results as ``_ckernels``.
"""
import numpy as np


def _step(x, y, ell, two_ell, w):
    in_a = x < ell
    in_b = ~in_a & (x < 0.5)
    in_c = (x >= 0.5) & (x < 0.75)
    in_d = x >= 0.75
    mx = np.empty_like(x)
    my = np.empty_like(y)
    mx[in_a] = x[in_a] / two_ell + 0.5
    my[in_a] = 0.5 * y[in_a] + 0.5
    mx[in_b] = (x[in_b] - ell) / w
    my[in_b] = w * y[in_b] + two_ell
    mx[in_c] = 2.0 * x[in_c] - 0.5
    my[in_c] = 0.5 * y[in_c]
    mx[in_d] = 2.0 * x[in_d] - 1.5
    my[in_d] = two_ell * y[in_d]
    lam = in_d.astype(np.int32) - in_a.astype(np.int32)
    return 1.0 - my, mx, lam


def net_counts(xs, ys, ell, skip, steps):
    x = np.array(xs, dtype=np.float64)
    y = np.array(ys, dtype=np.float64)
    two_ell = 2.0 * ell
    w = 1.0 - 2.0 * ell
    for _ in range(skip):
        x, y, _lam = _step(x, y, ell, two_ell, w)
    k = np.zeros(x.shape[0], dtype=np.int32)
    for _ in range(steps):
        x, y, lam = _step(x, y, ell, two_ell, w)
        k += lam
    return k


def _capture(x, y, geometry, tol):
    bx0, bx1, by0, by1, pdx, pdy, xc, yd, has_cdcd = geometry
    code = np.zeros(x.shape[0], dtype=np.int8)
    cdcd = np.zeros(x.shape[0], dtype=bool)
    if has_cdcd:
        dv = np.maximum(np.abs(x - xc), np.maximum(0.0, np.maximum(y - 0.5, -y)))
        dh = np.maximum(np.abs(y - yd), np.maximum(0.0, np.maximum(0.75 - x, x - 1.0)))
        cdcd = (dv <= tol) | (dh <= tol)
    pd = (np.abs(x - pdx) <= tol) & (np.abs(y - pdy) <= tol)
    # open rectangles: boundary points of B_inv and C_inv leave them
    cinv = (0.5 < x) & (x < 0.75) & (0.5 < y) & (y < 1.0)
    binv = (bx0 < x) & (x < bx1) & (by0 < y) & (y < by1)
    # lowest-priority first so that earlier checks overwrite
    code[cdcd] = 2
    code[pd] = 1
    code[cinv] = 4
    code[binv] = 3
    return code


def classify(xs, ys, ell, max_iter, tol, geometry):
    n = len(xs)
    x = np.array(xs, dtype=np.float64)
    y = np.array(ys, dtype=np.float64)
    codes = np.zeros(n, dtype=np.int8)
    steps = np.full(n, max_iter, dtype=np.int64)
    live = np.arange(n)
    two_ell = 2.0 * ell
    w = 1.0 - 2.0 * ell
    s = 0
    while live.size:
        c = _capture(x, y, geometry, tol)
        hit = c != 0
        if hit.any():
            codes[live[hit]] = c[hit]
            steps[live[hit]] = s
            keep = ~hit
            live, x, y = live[keep], x[keep], y[keep]
        if s == max_iter or not live.size:
            break
        x, y, _lam = _step(x, y, ell, two_ell, w)
        s += 1
    return codes, steps
