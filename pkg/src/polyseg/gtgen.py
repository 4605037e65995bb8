"""Ground-truth generation: masks to fixed-N polygons and dense head targets.

An annotated image is a list of :class:`Annotation` records ordered by the
annotation file, furthest object first; that order is the only depth signal.
:func:`build_gt` turns the list into the per-image tensors consumed by the
loss and decode stages: per-class center heatmaps at 1/stride resolution,
per-object polygon offsets, relative depth ranks and sub-pixel center
offsets, padded to a fixed object budget.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    BadVertexCountError,
    DimensionMismatchError,
    OutOfBoundsError,
    PolysegError,
    TooManyObjectsError,
)
from .geometry import as_mask, polygon_centroid, tight_bbox

DEFAULT_MIN_OVERLAP = 0.7


@dataclass
class Annotation:
    """One annotated instance: class id, visible mask, file position."""

    class_id: int
    mask: np.ndarray
    order_index: int


@dataclass
class EllipseSpec:
    """Elliptical Gaussian parameters in feature-map units."""

    center: tuple
    r_small: float
    r_large: float
    long_axis: str  # "horizontal" | "vertical"

    def __post_init__(self):
        if self.r_large < self.r_small:
            raise PolysegError("r_large must be >= r_small")
        if self.r_small <= 0.0:
            raise PolysegError("radii must be positive")
        if self.long_axis not in ("horizontal", "vertical"):
            raise PolysegError(f"bad long_axis: {self.long_axis!r}")


@dataclass
class GtTensors:
    """Dense per-image ground truth for all four heads.

    heatmaps: (classes, hd, wd) in [0, 1], one exact-1.0 cell per object.
    poly_offsets: (2n, k) vertex offsets from the center, feature units,
        interleaved (x1, y1, x2, y2, ...).
    depth: (k,) relative depth ranks in (0, 1], larger = closer.
    subpixel_offsets: (2, k) fractional center position within its cell.
    center_cells: (k,) flat row-major cell indices (y * wd + x).
    valid: (k,) True for real objects, False for padding.
    stride: image-to-feature downsampling factor.
    """

    heatmaps: np.ndarray
    poly_offsets: np.ndarray
    depth: np.ndarray
    subpixel_offsets: np.ndarray
    center_cells: np.ndarray
    valid: np.ndarray
    stride: int

    @property
    def num_classes(self):
        return self.heatmaps.shape[0]

    @property
    def feature_shape(self):
        return self.heatmaps.shape[1:]

    @property
    def num_vertices(self):
        return self.poly_offsets.shape[0] // 2

    @property
    def max_objects(self):
        return self.valid.shape[0]


def _round_half_up(v):
    return int(math.floor(v + 0.5))


def select_vertices(mask, num_vertices):
    """Pick a fixed-count bounding polygon by casting rays from the bbox.

    The bbox boundary is sampled at num_vertices/4 evenly spaced points per
    side, clockwise from the top-left corner. Each sample walks the discrete
    line toward the bbox center and takes the first set pixel; a ray that
    reaches the center without a hit falls back to its boundary sample so the
    vertex count and angular ordering are preserved. The first output vertex
    is always the one from the top-left corner's ray.
    """
    if num_vertices < 4 or num_vertices % 4 != 0:
        raise BadVertexCountError(f"vertex count must be a multiple of 4, got {num_vertices}")
    mask = as_mask(mask)
    x0, y0, x1, y1 = tight_bbox(mask)
    cx = _round_half_up((x0 + x1) / 2.0)
    cy = _round_half_up((y0 + y1) / 2.0)
    per_side = num_vertices // 4
    w = float(x1 - x0)
    h = float(y1 - y0)

    samples = []
    for i in range(per_side):  # top, left to right
        samples.append((x0 + w * i / per_side, float(y0)))
    for i in range(per_side):  # right, top to bottom
        samples.append((float(x1), y0 + h * i / per_side))
    for i in range(per_side):  # bottom, right to left
        samples.append((x1 - w * i / per_side, float(y1)))
    for i in range(per_side):  # left, bottom to top
        samples.append((float(x0), y1 - h * i / per_side))

    grid = np.ascontiguousarray(mask, dtype=np.uint8)
    verts = np.empty((num_vertices, 2), dtype=np.float64)
    for k, (sx, sy) in enumerate(samples):
        sxi = _round_half_up(sx)
        syi = _round_half_up(sy)
        hx, hy, found = _kernels.first_hit_along_line(grid, sxi, syi, cx, cy)
        if found:
            verts[k, 0] = hx
            verts[k, 1] = hy
        else:
            verts[k, 0] = sxi
            verts[k, 1] = syi
    return verts


def gaussian_radius(box_w, box_h, min_overlap):
    """Largest center-shift radius keeping box IoU above ``min_overlap``.

    Standard corner-keypoint bound: three shift scenarios, each a quadratic
    in the radius, and the binding root is the smallest of the three.
    """
    if box_w <= 0 or box_h <= 0:
        raise PolysegError("box dimensions must be positive")
    if not 0.0 < min_overlap < 1.0:
        raise PolysegError("min_overlap must be in (0, 1)")
    w = float(box_w)
    h = float(box_h)
    o = float(min_overlap)

    # Diagonal shift: intersection (w-r)(h-r) against union 2wh - (w-r)(h-r).
    b1 = h + w
    c1 = w * h * (1.0 - o) / (1.0 + o)
    r1 = (b1 - math.sqrt(b1 * b1 - 4.0 * c1)) / 2.0

    # Both corners pulled inward: box shrinks to (w-2r)(h-2r).
    a2 = 4.0
    b2 = 2.0 * (h + w)
    c2 = (1.0 - o) * w * h
    r2 = (b2 - math.sqrt(b2 * b2 - 4.0 * a2 * c2)) / (2.0 * a2)

    # Both corners pushed outward: box grows to (w+2r)(h+2r).
    a3 = 4.0 * o
    b3 = 2.0 * o * (h + w)
    c3 = (o - 1.0) * w * h
    r3 = (-b3 + math.sqrt(b3 * b3 - 4.0 * a3 * c3)) / (2.0 * a3)

    return max(0.0, min(r1, r2, r3))


def render_elliptical_gaussian(heatmap, spec):
    """Max-merge an elliptical Gaussian bump into a single-class heatmap.

    The bump is centered on the cell containing ``spec.center`` so that cell
    reads exactly 1.0; the axis sigmas follow (2r + 1) / 6 with the large
    radius along ``spec.long_axis``.
    """
    if heatmap.ndim != 2:
        raise DimensionMismatchError("heatmap must be a single-class 2-D map")
    hd, wd = heatmap.shape
    px = int(math.floor(spec.center[0]))
    py = int(math.floor(spec.center[1]))
    if not (0 <= px < wd and 0 <= py < hd):
        raise OutOfBoundsError(f"gaussian center cell ({px}, {py}) outside {wd}x{hd} map")
    if spec.long_axis == "horizontal":
        rx, ry = spec.r_large, spec.r_small
    else:
        rx, ry = spec.r_small, spec.r_large
    sx = (2.0 * rx + 1.0) / 6.0
    sy = (2.0 * ry + 1.0) / 6.0
    dx = np.arange(wd, dtype=np.float64) - px
    dy = np.arange(hd, dtype=np.float64) - py
    bump = np.exp(-(dx[None, :] ** 2 / (2.0 * sx * sx) + dy[:, None] ** 2 / (2.0 * sy * sy)))
    np.maximum(heatmap, bump, out=heatmap)


def depth_rank_values(annotations):
    """Relative depth targets (i+1)/k for a furthest-first annotation list."""
    k = len(annotations)
    if k == 0:
        raise PolysegError("annotation list is empty")
    return (np.arange(k, dtype=np.float64) + 1.0) / k


def ellipse_spec_for_box(x0, y0, x1, y1, stride, min_overlap=DEFAULT_MIN_OVERLAP):
    """Elliptical Gaussian radii for a tight pixel box, in feature units.

    The small radius is the circular overlap bound of the feature-scale box;
    the large one scales it by the box aspect ratio, lying along the longer
    side.
    """
    w = float(x1 - x0 + 1)
    h = float(y1 - y0 + 1)
    r_small = gaussian_radius(w / stride, h / stride, min_overlap)
    r_small = max(r_small, 1e-6)
    ratio = max(w, h) / min(w, h)
    return r_small, r_small * ratio, ("horizontal" if w >= h else "vertical")


def build_gt(
    annotations,
    img_w,
    img_h,
    num_classes,
    num_vertices=16,
    stride=4,
    max_objects=128,
    min_overlap=DEFAULT_MIN_OVERLAP,
):
    """Assemble the dense ground-truth tensors for one annotated image.

    Per object: the bounding polygon comes from :func:`select_vertices`, the
    keypoint is the polygon's center of gravity, the heatmap bump is an
    elliptical Gaussian max-merged per class, and the regression targets are
    stored at the object's feature cell (floor of center / stride).
    """
    if stride < 1:
        raise PolysegError("stride must be >= 1")
    if num_classes < 1:
        raise PolysegError("need at least one class")
    if len(annotations) > max_objects:
        raise TooManyObjectsError(
            f"{len(annotations)} annotations exceed the budget of {max_objects}"
        )
    wd = (img_w + stride - 1) // stride
    hd = (img_h + stride - 1) // stride

    heatmaps = np.zeros((num_classes, hd, wd), dtype=np.float64)
    poly_offsets = np.zeros((2 * num_vertices, max_objects), dtype=np.float64)
    depth = np.zeros(max_objects, dtype=np.float64)
    subpix = np.zeros((2, max_objects), dtype=np.float64)
    cells = np.zeros(max_objects, dtype=np.int64)
    valid = np.zeros(max_objects, dtype=bool)

    ranks = depth_rank_values(annotations) if annotations else np.empty(0)
    for k, ann in enumerate(annotations):
        if not 0 <= ann.class_id < num_classes:
            raise PolysegError(f"class id {ann.class_id} outside [0, {num_classes})")
        mask = as_mask(ann.mask)
        if mask.shape != (img_h, img_w):
            raise DimensionMismatchError(
                f"mask shape {mask.shape} does not match image {img_h}x{img_w}"
            )
        poly = select_vertices(mask, num_vertices)
        center = polygon_centroid(poly)
        fx = center[0] / stride
        fy = center[1] / stride
        cx = int(math.floor(fx))
        cy = int(math.floor(fy))
        cells[k] = cy * wd + cx
        subpix[0, k] = fx - cx
        subpix[1, k] = fy - cy
        poly_offsets[0::2, k] = (poly[:, 0] - center[0]) / stride
        poly_offsets[1::2, k] = (poly[:, 1] - center[1]) / stride
        depth[k] = ranks[k]
        valid[k] = True

        x0, y0, x1, y1 = tight_bbox(mask)
        r_small, r_large, long_axis = ellipse_spec_for_box(x0, y0, x1, y1, stride, min_overlap)
        spec = EllipseSpec((fx, fy), r_small, r_large, long_axis)
        render_elliptical_gaussian(heatmaps[ann.class_id], spec)

    return GtTensors(heatmaps, poly_offsets, depth, subpix, cells, valid, int(stride))
