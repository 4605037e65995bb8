"""Resolve overlapping polygon detections into a single label map.

Painting happens in two passes. Confident detections (score at or above the
occluder threshold) are painted furthest-first with overwrite, so closer
instances claim contested pixels. Low-confidence detections may never hide
anything: they are painted afterwards onto still-background pixels only,
closest-first among themselves so that raising an instance's depth can only
grow its painted set.

Ties in depth are broken by score (higher score in front), then by input
order (later in front), keeping the output deterministic.
"""

import numpy as np

from . import _kernels
from .errors import PolysegError
from .geometry import as_polygon

DEFAULT_OCCLUDER_THRESHOLD = 0.5


def _paint(labels, polygon, value, only_background):
    poly = as_polygon(polygon)
    _kernels.paint_polygon(
        labels,
        np.ascontiguousarray(poly[:, 0]),
        np.ascontiguousarray(poly[:, 1]),
        value,
        only_background,
    )


def composite(detections, width, height, occluder_threshold=DEFAULT_OCCLUDER_THRESHOLD):
    """Paint detections into a uint16 label map (0 = background).

    Instance ids are 1..M following the input order of ``detections``.
    """
    if width <= 0 or height <= 0:
        raise PolysegError("label map dimensions must be positive")
    if len(detections) > np.iinfo(np.uint16).max:
        raise PolysegError("too many detections for 16-bit instance ids")
    labels = np.zeros((height, width), dtype=np.uint16)

    occluders = []
    modest = []
    for idx, det in enumerate(detections):
        key = (det.rel_depth, det.score, idx)
        if det.score >= occluder_threshold:
            occluders.append((key, idx))
        else:
            modest.append((key, idx))

    # Pass 1: furthest first, later paint overwrites.
    for _, idx in sorted(occluders):
        _paint(labels, detections[idx].polygon, idx + 1, False)
    # Pass 2: closest first, background pixels only.
    for _, idx in sorted(modest, reverse=True):
        _paint(labels, detections[idx].polygon, idx + 1, True)
    return labels


def depth_map_image(detections, label_map):
    """Grayscale relative-depth rendering: darker means closer.

    Background stays white; each instance's pixels take an intensity that
    decreases with its relative depth.
    """
    img = np.full(label_map.shape, 255, dtype=np.uint8)
    if not detections:
        return img
    depths = np.array([d.rel_depth for d in detections], dtype=np.float64)
    lo = depths.min()
    hi = depths.max()
    span = hi - lo if hi > lo else 1.0
    for idx, det in enumerate(detections):
        shade = int(round(230.0 * (1.0 - (det.rel_depth - lo) / span)))
        img[label_map == idx + 1] = shade
    return img


def label_map_image(label_map, seed=0):
    """Color visualization of a label map (background black)."""
    rng = np.random.default_rng(seed)
    nids = int(label_map.max())
    palette = np.zeros((nids + 1, 3), dtype=np.uint8)
    if nids:
        palette[1:] = rng.integers(40, 256, size=(nids, 3), dtype=np.uint8)
    return palette[label_map]


def save_png(image, path):
    """Write a uint8 grayscale or RGB image as PNG."""
    from PIL import Image

    Image.fromarray(image).save(path, format="PNG")
