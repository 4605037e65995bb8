"""Turn dense head outputs into scored polygon detections.

Peak extraction keeps cells that are maxima of their 3x3 neighbourhood (ties
resolved toward the smaller row-major index, so a flat plateau yields exactly
one peak) and takes the top-K scores across all class maps. Assembly then
reads the regression fields at each peak cell and scales everything back to
image pixels.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import PolysegError


class Peak(NamedTuple):
    class_id: int
    x: int
    y: int
    score: float


@dataclass
class Detection:
    """One decoded instance, coordinates in image pixels."""

    class_id: int
    score: float
    center: np.ndarray
    polygon: np.ndarray
    rel_depth: float


# Neighbour offsets split by row-major position relative to the center cell:
# a peak must beat earlier neighbours strictly and later ones weakly.
_EARLIER = ((-1, -1), (-1, 0), (-1, 1), (0, -1))
_LATER = ((0, 1), (1, -1), (1, 0), (1, 1))


def extract_peaks(heatmaps, max_peaks=128):
    """Top-K 3x3-maximum cells across all classes, by descending score."""
    if max_peaks < 1:
        raise PolysegError("max_peaks must be >= 1")
    hm = np.asarray(heatmaps, dtype=np.float64)
    if hm.ndim != 3:
        raise PolysegError(f"heatmaps must be (classes, hd, wd), got {hm.shape}")
    c, hd, wd = hm.shape
    padded = np.pad(hm, ((0, 0), (1, 1), (1, 1)), constant_values=-np.inf)
    is_peak = np.ones(hm.shape, dtype=bool)
    for dy, dx in _EARLIER:
        is_peak &= hm > padded[:, 1 + dy:1 + dy + hd, 1 + dx:1 + dx + wd]
    for dy, dx in _LATER:
        is_peak &= hm >= padded[:, 1 + dy:1 + dy + hd, 1 + dx:1 + dx + wd]

    flat = np.flatnonzero(is_peak.reshape(-1))
    scores = hm.reshape(-1)[flat]
    order = np.argsort(-scores, kind="stable")[:max_peaks]
    peaks = []
    for i in order:
        idx = flat[i]
        cls, rem = divmod(int(idx), hd * wd)
        y, x = divmod(rem, wd)
        peaks.append(Peak(cls, x, y, float(scores[i])))
    return peaks


def assemble(peaks, outputs, stride, score_threshold=0.01):
    """Build detections from peaks and the dense regression fields.

    center = (cell + sub-pixel offset) * stride; vertex n = center + the
    n-th (x, y) offset pair read at the peak cell, scaled by stride.
    """
    if stride < 1:
        raise PolysegError("stride must be >= 1")
    num_vertices = outputs.poly_field.shape[0] // 2
    detections = []
    for pk in peaks:
        if pk.score < score_threshold:
            continue
        ox = outputs.offset_field[0, pk.y, pk.x]
        oy = outputs.offset_field[1, pk.y, pk.x]
        cx = (pk.x + ox) * stride
        cy = (pk.y + oy) * stride
        offsets = outputs.poly_field[:, pk.y, pk.x]
        polygon = np.empty((num_vertices, 2), dtype=np.float64)
        polygon[:, 0] = cx + offsets[0::2] * stride
        polygon[:, 1] = cy + offsets[1::2] * stride
        detections.append(
            Detection(
                class_id=pk.class_id,
                score=float(pk.score),
                center=np.array([cx, cy]),
                polygon=polygon,
                rel_depth=float(outputs.depth_field[pk.y, pk.x]),
            )
        )
    detections.sort(key=lambda d: -d.score)
    return detections


def decode_outputs(outputs, stride, max_peaks=128, score_threshold=0.01):
    """Peak extraction followed by assembly, sorted by descending score."""
    return assemble(
        extract_peaks(outputs.heatmaps, max_peaks),
        outputs,
        stride,
        score_threshold,
    )
