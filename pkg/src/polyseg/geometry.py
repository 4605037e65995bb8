"""Core 2-D primitives: boxes, polygons, masks, rasterization and IoU.

Representation conventions used across the package:

* instance masks are boolean ``(height, width)`` arrays, pixel ``(x, y)``
  stored at ``mask[y, x]`` and sampled at the integer point ``(x, y)``;
* polygons are float64 ``(n, 2)`` arrays of ``[x, y]`` vertices forming a
  closed ring (last vertex connects back to the first);
* boxes are ``(x0, y0, x1, y1)`` with ``x0 <= x1`` and ``y0 <= y1``.

Fill rule: even-odd, with points exactly on an edge counting as inside.
Coordinates stay real-valued everywhere; masks are the only quantized
representation.
"""

import numpy as np

from . import _kernels
from .errors import DimensionMismatchError, EmptyMaskError, PolysegError


def as_polygon(poly):
    """Validate and convert to a contiguous float64 (n, 2) vertex array."""
    arr = np.ascontiguousarray(poly, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise PolysegError(f"polygon must be an (n, 2) array, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise PolysegError("polygon vertices must be finite")
    return arr


def as_mask(mask):
    """Validate and convert to a boolean (height, width) array."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise PolysegError(f"mask must be 2-D, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def tight_bbox(mask):
    """Minimal axis-aligned box (x0, y0, x1, y1) containing all set pixels."""
    mask = as_mask(mask)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        raise EmptyMaskError("mask has no set pixels")
    cols = np.flatnonzero(mask.any(axis=0))
    return int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1])


def point_in_polygon(point, poly):
    """Boundary-inclusive even-odd test for a single point.

    This scalar routine is the reference predicate: the batch kernel and the
    scanline rasterizer are required to agree with it pixel for pixel.
    """
    poly = as_polygon(poly)
    x = float(point[0])
    y = float(point[1])
    vx = poly[:, 0]
    vy = poly[:, 1]
    n = poly.shape[0]
    inside = False
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
            return True
        if (y1 > y) != (y2 > y):
            xint = (y - y1) * (x2 - x1) / (y2 - y1) + x1
            if x < xint:
                inside = not inside
    return inside


def points_in_polygon(points, poly):
    """Batch version of :func:`point_in_polygon` (same predicate per point)."""
    poly = as_polygon(poly)
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise PolysegError(f"points must be an (m, 2) array, got shape {pts.shape}")
    return _kernels.points_in_polygon(
        np.ascontiguousarray(pts[:, 0]),
        np.ascontiguousarray(pts[:, 1]),
        np.ascontiguousarray(poly[:, 0]),
        np.ascontiguousarray(poly[:, 1]),
    )


def rasterize_polygon(poly, width, height):
    """Scanline-rasterize a polygon into a boolean mask.

    Pixel (i, j) is set exactly when :func:`point_in_polygon` holds at the
    integer point (i, j); degenerate polygons produce empty or thin masks.
    """
    if width <= 0 or height <= 0:
        raise PolysegError("mask dimensions must be positive")
    poly = as_polygon(poly)
    out = _kernels.fill_polygon(
        np.ascontiguousarray(poly[:, 0]),
        np.ascontiguousarray(poly[:, 1]),
        int(width),
        int(height),
    )
    return out.view(bool)


def mask_iou(a, b):
    """Intersection over union of two same-shape masks; 0.0 on empty union."""
    a = as_mask(a)
    b = as_mask(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"mask shapes differ: {a.shape} vs {b.shape}")
    inter = np.count_nonzero(a & b)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return inter / union


def polygon_centroid(poly):
    """Arithmetic mean of the vertices (the contour center of gravity)."""
    poly = as_polygon(poly)
    return poly.mean(axis=0)


def polygon_vertex_bbox(poly):
    """Float bounding box (x0, y0, x1, y1) of the vertex coordinates."""
    poly = as_polygon(poly)
    return (
        float(poly[:, 0].min()),
        float(poly[:, 1].min()),
        float(poly[:, 0].max()),
        float(poly[:, 1].max()),
    )
