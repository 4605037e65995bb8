"""Pure-numpy implementations of the hot geometry kernels.

This module is the fallback backend selected by ``POLYSEG_NO_NUMBA=1``; the
jitted twin in ``numba_impl`` must stay bit-identical to it.

Conventions shared by every kernel (and by the scalar reference predicate in
``polyseg.geometry``):

* a polygon is a closed ring of ``n`` vertices ``(vx[k], vy[k])``, edge ``k``
  running from vertex ``k`` to vertex ``(k + 1) % n``;
* a pixel ``(i, j)`` is sampled at the integer point ``x = i, y = j``;
* a point exactly on an edge counts as inside (``cross == 0`` plus a bounding
  box test on the edge);
* otherwise the even-odd rule applies: the point is inside when an odd number
  of edges satisfy ``(y1 > y) != (y2 > y)`` and
  ``x < (y - y1) * (x2 - x1) / (y2 - y1) + x1``.

The scanline fill reproduces this pixel set exactly: row spans cover the
odd-parity intervals, and a boundary overlay pass adds the lattice points that
lie exactly on edges (the parity intervals are half-open on the right, so a
pixel sitting precisely on a right crossing is handled by the overlay).
"""

import math

import numpy as np


def _parity_rows(vx, vy, width, height):
    """Yield (row, lo, hi) spans of odd even-odd parity, clipped to the grid."""
    x1 = vx
    y1 = vy
    x2 = np.roll(vx, -1)
    y2 = np.roll(vy, -1)
    for j in range(height):
        yj = float(j)
        sel = (y1 > yj) != (y2 > yj)
        if not sel.any():
            continue
        xs = np.sort((yj - y1[sel]) * (x2[sel] - x1[sel]) / (y2[sel] - y1[sel]) + x1[sel])
        for t in range(0, xs.shape[0] - 1, 2):
            lo = int(math.ceil(xs[t]))
            hi = int(math.ceil(xs[t + 1])) - 1
            if lo < 0:
                lo = 0
            if hi > width - 1:
                hi = width - 1
            if lo <= hi:
                yield j, lo, hi


def _boundary_pixels(vx, vy, width, height):
    """Yield (row, lo, hi) runs of lattice points exactly on polygon edges."""
    n = vx.shape[0]
    for e in range(n):
        x1 = vx[e]
        y1 = vy[e]
        x2 = vx[(e + 1) % n]
        y2 = vy[(e + 1) % n]
        if y1 == y2:
            # Horizontal (or degenerate) edge: only an exactly integral row
            # can satisfy cross == 0.
            if 0.0 <= y1 <= height - 1 and y1 == math.floor(y1):
                j = int(y1)
                lo = int(math.ceil(min(x1, x2)))
                hi = int(math.floor(max(x1, x2)))
                if lo < 0:
                    lo = 0
                if hi > width - 1:
                    hi = width - 1
                if lo <= hi:
                    yield j, lo, hi
            continue
        ylo = min(y1, y2)
        yhi = max(y1, y2)
        xlo = min(x1, x2)
        xhi = max(x1, x2)
        jlo = max(0, int(math.ceil(ylo)))
        jhi = min(height - 1, int(math.floor(yhi)))
        for j in range(jlo, jhi + 1):
            xe = x1 + (j - y1) / (y2 - y1) * (x2 - x1)
            base = int(math.floor(xe))
            for i in range(base - 2, base + 3):
                if 0 <= i < width and xlo <= i <= xhi:
                    cross = (x2 - x1) * (j - y1) - (y2 - y1) * (i - x1)
                    if cross == 0.0:
                        yield j, i, i


def fill_polygon(vx, vy, width, height):
    """Rasterize the polygon into a fresh uint8 mask (1 = covered)."""
    out = np.zeros((height, width), dtype=np.uint8)
    for j, lo, hi in _parity_rows(vx, vy, width, height):
        out[j, lo:hi + 1] = 1
    for j, lo, hi in _boundary_pixels(vx, vy, width, height):
        out[j, lo:hi + 1] = 1
    return out


def paint_polygon(labels, vx, vy, value, only_background):
    """Write ``value`` over the polygon's pixels in a label grid, in place.

    With ``only_background`` only pixels still equal to 0 are claimed.
    """
    height, width = labels.shape
    mask = fill_polygon(vx, vy, width, height).astype(bool)
    if only_background:
        mask &= labels == 0
    labels[mask] = value


def points_in_polygon(px, py, vx, vy):
    """Vectorized inside test for many points against one polygon.

    Applies the scalar predicate (boundary inclusive, even-odd) independently
    per point; this is the per-pixel route used to cross-check the scanline.
    """
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    inside = np.zeros(px.shape, dtype=bool)
    on_edge = np.zeros(px.shape, dtype=bool)
    n = vx.shape[0]
    for e in range(n):
        x1 = vx[e]
        y1 = vy[e]
        x2 = vx[(e + 1) % n]
        y2 = vy[(e + 1) % n]
        cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        on_edge |= (
            (cross == 0.0)
            & (px >= min(x1, x2)) & (px <= max(x1, x2))
            & (py >= min(y1, y2)) & (py <= max(y1, y2))
        )
        if y1 != y2:
            sel = (y1 > py) != (y2 > py)
            xint = (py - y1) * (x2 - x1) / (y2 - y1) + x1
            inside ^= sel & (px < xint)
    return inside | on_edge


def first_hit_along_line(mask, x0, y0, x1, y1):
    """Walk the Bresenham line from (x0, y0) to (x1, y1) over a uint8 grid.

    Returns ``(x, y, True)`` for the first set pixel on the walk, or
    ``(-1, -1, False)`` when the line is exhausted without a hit.
    """
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
