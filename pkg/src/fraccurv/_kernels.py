"""Numba kernels: exact squared-distance transform and marching squares.

Falls back to the same code uncompiled when numba is unavailable (slow but
identical results).
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap

    prange = range


@njit(cache=True)
def _edt_1d_pass(f, v, z, out):
    """Lower envelope of parabolas j -> (q - j)^2 + f[j] (Felzenszwalb)."""
    n = f.shape[0]
    k = 0
    v[0] = 0
    z[0] = -1e30
    z[1] = 1e30
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = 1e30
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        out[q] = (q - v[k]) * (q - v[k]) + f[v[k]]


@njit(cache=True, parallel=True)
def squared_edt(seeds):
    """Exact squared Euclidean distance (integer cell units) to the seeds.

    Two dimension-wise passes: a column sweep for the nearest seed within each
    column, then a row-wise parabola envelope.  All arithmetic stays on exact
    integers representable in float64.
    """
    h, w = seeds.shape
    inf = 1.0e12
    col = np.empty((h, w), dtype=np.float64)
    for j in prange(w):
        d = inf
        for i in range(h):
            if seeds[i, j]:
                d = 0.0
            elif d < inf:
                d += 1.0
            col[i, j] = d
        d = inf
        for i in range(h - 1, -1, -1):
            if seeds[i, j]:
                d = 0.0
            elif d < inf:
                d += 1.0
            if d < col[i, j]:
                col[i, j] = d
    # squared column distances feed the row envelopes
    sq = np.empty((h, w), dtype=np.float64)
    for j in prange(w):
        for i in range(h):
            c = col[i, j]
            sq[i, j] = c * c if c < inf else inf
    out = np.empty((h, w), dtype=np.float64)
    for i in prange(h):
        v = np.empty(w + 1, dtype=np.int64)
        z = np.empty(w + 2, dtype=np.float64)
        _edt_1d_pass(sq[i], v, z, out[i])
    return out


# Marching-squares segment table: for each of the 16 corner codes the list of
# (edge_in, edge_out) pairs; edges 0=bottom, 1=right, 2=top, 3=left of the
# 2x2 dual cell.  Codes with bit set = corner inside.  Ambiguous saddles (5,
# 10) are resolved by the cell-center average.
@njit(cache=True)
def _interp(a, b):
    # crossing parameter on an edge with field values a (inside<=0) and b
    return a / (a - b)


@njit(cache=True)
def marching_squares(field, level):
    """Sub-pixel contour of {field == level} with linear edge interpolation.

    Returns (segments, n) where segments is an (n, 4) array of x0,y0,x1,y1 in
    cell-index coordinates (multiply by spacing and offset by the grid origin
    for world units).
    """
    h, w = field.shape
    max_segs = 0
    # counting pass
    for i in range(h - 1):
        for j in range(w - 1):
            s00 = field[i, j] - level
            s10 = field[i, j + 1] - level
            s11 = field[i + 1, j + 1] - level
            s01 = field[i + 1, j] - level
            code = 0
            if s00 <= 0.0:
                code += 1
            if s10 <= 0.0:
                code += 2
            if s11 <= 0.0:
                code += 4
            if s01 <= 0.0:
                code += 8
            if code == 0 or code == 15:
                continue
            if code == 5 or code == 10:
                max_segs += 2
            else:
                max_segs += 1
    segs = np.empty((max_segs, 4), dtype=np.float64)
    n = 0
    for i in range(h - 1):
        for j in range(w - 1):
            s00 = field[i, j] - level
            s10 = field[i, j + 1] - level
            s11 = field[i + 1, j + 1] - level
            s01 = field[i + 1, j] - level
            code = 0
            if s00 <= 0.0:
                code += 1
            if s10 <= 0.0:
                code += 2
            if s11 <= 0.0:
                code += 4
            if s01 <= 0.0:
                code += 8
            if code == 0 or code == 15:
                continue
            # edge crossing points (x, y) in cell coordinates
            xb = j + _interp(s00, s10)
            yb = float(i)
            xr = float(j + 1)
            yr = i + _interp(s10, s11)
            xt = j + _interp(s01, s11)
            yt = float(i + 1)
            xl = float(j)
            yl = i + _interp(s00, s01)
            if code == 1 or code == 14:
                segs[n, 0], segs[n, 1], segs[n, 2], segs[n, 3] = xb, yb, xl, yl
                n += 1
            elif code == 2 or code == 13:
                segs[n, 0], segs[n, 1], segs[n, 2], segs[n, 3] = xb, yb, xr, yr
                n += 1
            elif code == 3 or code == 12:
                segs[n, 0], segs[n, 1], segs[n, 2], segs[n, 3] = xl, yl, xr, yr
                n += 1
            elif code == 4 or code == 11:
                segs[n, 0], segs[n, 1], segs[n, 2], segs[n, 3] = xr, yr, xt, yt
                n += 1
            elif code == 6 or code == 9:
                segs[n, 0], segs[n, 1], segs[n, 2], segs[n, 3] = xb, yb, xt, yt
                n += 1
            elif code == 7 or code == 8:
                segs[n, 0], segs[n, 1], segs[n, 2], segs[n, 3] = xl, yl, xt, yt
                n += 1
            elif code == 5 or code == 10:
                center = 0.25 * (s00 + s10 + s11 + s01)
                inside_center = center <= 0.0
                if (code == 5) == inside_center:
                    # connect bottom-right and top-left
                    segs[n, 0], segs[n, 1], segs[n, 2], segs[n, 3] = xb, yb, xr, yr
                    n += 1
                    segs[n, 0], segs[n, 1], segs[n, 2], segs[n, 3] = xt, yt, xl, yl
                    n += 1
                else:
                    segs[n, 0], segs[n, 1], segs[n, 2], segs[n, 3] = xb, yb, xl, yl
                    n += 1
                    segs[n, 0], segs[n, 1], segs[n, 2], segs[n, 3] = xr, yr, xt, yt
                    n += 1
    return segs, n
