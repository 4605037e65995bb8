"""Jitted twins of the numpy kernels; see numpy_impl for the shared contract.

Every predicate here uses the exact float expressions of ``numpy_impl`` so the
two backends stay bit-identical.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _row_crossings(vx, vy, yj, xs):
    """Collect sorted scanline crossings for row yj into xs; returns count."""
    n = vx.shape[0]
    m = 0
    for e in range(n):
        y1 = vy[e]
        y2 = vy[(e + 1) % n]
        if (y1 > yj) != (y2 > yj):
            x1 = vx[e]
            x2 = vx[(e + 1) % n]
            xs[m] = (yj - y1) * (x2 - x1) / (y2 - y1) + x1
            m += 1
    for i in range(1, m):
        key = xs[i]
        k = i - 1
        while k >= 0 and xs[k] > key:
            xs[k + 1] = xs[k]
            k -= 1
        xs[k + 1] = key
    return m


@njit(cache=True)
def _overlay_boundary_mask(out, vx, vy):
    height, width = out.shape
    n = vx.shape[0]
    for e in range(n):
        x1 = vx[e]
        y1 = vy[e]
        x2 = vx[(e + 1) % n]
        y2 = vy[(e + 1) % n]
        if y1 == y2:
            if 0.0 <= y1 <= height - 1 and y1 == math.floor(y1):
                j = int(y1)
                lo = int(math.ceil(min(x1, x2)))
                hi = int(math.floor(max(x1, x2)))
                if lo < 0:
                    lo = 0
                if hi > width - 1:
                    hi = width - 1
                for i in range(lo, hi + 1):
                    out[j, i] = 1
            continue
        ylo = min(y1, y2)
        yhi = max(y1, y2)
        xlo = min(x1, x2)
        xhi = max(x1, x2)
        jlo = int(math.ceil(ylo))
        jhi = int(math.floor(yhi))
        if jlo < 0:
            jlo = 0
        if jhi > height - 1:
            jhi = height - 1
        for j in range(jlo, jhi + 1):
            xe = x1 + (j - y1) / (y2 - y1) * (x2 - x1)
            base = int(math.floor(xe))
            for i in range(base - 2, base + 3):
                if 0 <= i < width and xlo <= i <= xhi:
                    cross = (x2 - x1) * (j - y1) - (y2 - y1) * (i - x1)
                    if cross == 0.0:
                        out[j, i] = 1


@njit(cache=True)
def fill_polygon(vx, vy, width, height):
    out = np.zeros((height, width), dtype=np.uint8)
    n = vx.shape[0]
    xs = np.empty(n, dtype=np.float64)
    for j in range(height):
        m = _row_crossings(vx, vy, float(j), xs)
        for t in range(0, m - 1, 2):
            lo = int(math.ceil(xs[t]))
            hi = int(math.ceil(xs[t + 1])) - 1
            if lo < 0:
                lo = 0
            if hi > width - 1:
                hi = width - 1
            for i in range(lo, hi + 1):
                out[j, i] = 1
    _overlay_boundary_mask(out, vx, vy)
    return out


@njit(cache=True)
def _overlay_boundary_labels(labels, vx, vy, value, only_background):
    height, width = labels.shape
    n = vx.shape[0]
    for e in range(n):
        x1 = vx[e]
        y1 = vy[e]
        x2 = vx[(e + 1) % n]
        y2 = vy[(e + 1) % n]
        if y1 == y2:
            if 0.0 <= y1 <= height - 1 and y1 == math.floor(y1):
                j = int(y1)
                lo = int(math.ceil(min(x1, x2)))
                hi = int(math.floor(max(x1, x2)))
                if lo < 0:
                    lo = 0
                if hi > width - 1:
                    hi = width - 1
                for i in range(lo, hi + 1):
                    if not only_background or labels[j, i] == 0:
                        labels[j, i] = value
            continue
        ylo = min(y1, y2)
        yhi = max(y1, y2)
        xlo = min(x1, x2)
        xhi = max(x1, x2)
        jlo = int(math.ceil(ylo))
        jhi = int(math.floor(yhi))
        if jlo < 0:
            jlo = 0
        if jhi > height - 1:
            jhi = height - 1
        for j in range(jlo, jhi + 1):
            xe = x1 + (j - y1) / (y2 - y1) * (x2 - x1)
            base = int(math.floor(xe))
            for i in range(base - 2, base + 3):
                if 0 <= i < width and xlo <= i <= xhi:
                    cross = (x2 - x1) * (j - y1) - (y2 - y1) * (i - x1)
                    if cross == 0.0:
                        if not only_background or labels[j, i] == 0:
                            labels[j, i] = value


@njit(cache=True)
def paint_polygon(labels, vx, vy, value, only_background):
    height, width = labels.shape
    n = vx.shape[0]
    xs = np.empty(n, dtype=np.float64)
    for j in range(height):
        m = _row_crossings(vx, vy, float(j), xs)
        for t in range(0, m - 1, 2):
            lo = int(math.ceil(xs[t]))
            hi = int(math.ceil(xs[t + 1])) - 1
            if lo < 0:
                lo = 0
            if hi > width - 1:
                hi = width - 1
            for i in range(lo, hi + 1):
                if not only_background or labels[j, i] == 0:
                    labels[j, i] = value
    _overlay_boundary_labels(labels, vx, vy, value, only_background)


@njit(cache=True)
def points_in_polygon(px, py, vx, vy):
    m = px.shape[0]
    n = vx.shape[0]
    out = np.zeros(m, dtype=np.bool_)
    for p in range(m):
        x = px[p]
        y = py[p]
        inside = False
        hit_edge = False
        for e in range(n):
            x1 = vx[e]
            y1 = vy[e]
            x2 = vx[(e + 1) % n]
            y2 = vy[(e + 1) % n]
            cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
            if (
                cross == 0.0
                and min(x1, x2) <= x <= max(x1, x2)
                and min(y1, y2) <= y <= max(y1, y2)
            ):
                hit_edge = True
                break
            if (y1 > y) != (y2 > y):
                xint = (y - y1) * (x2 - x1) / (y2 - y1) + x1
                if x < xint:
                    inside = not inside
        out[p] = inside or hit_edge
    return out


@njit(cache=True)
def first_hit_along_line(mask, x0, y0, x1, y1):
    dx = abs(x1 - x0)
    sx = 1 if x0 < x1 else -1
    dy = -abs(y1 - y0)
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x = x0
    y = y0
    while True:
        if mask[y, x] != 0:
            return x, y, True
        if x == x1 and y == y1:
            return -1, -1, False
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
