"""Polygon instance segmentation pipeline on center heatmaps.

The package provides the non-neural core of a center-keypoint detector that
represents instances as fixed-count bounding polygons: ground-truth
generation from masks, the four training losses with analytic gradients,
instance decoding, relative-depth compositing, COCO-style AP evaluation and
a deterministic synthetic-scene oracle.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .compositor import composite
from .decode import Detection, Peak, assemble, decode_outputs, extract_peaks
from .evalap import (
    EvalDetection,
    EvalGroundTruth,
    ap_suite,
    average_precision,
    match_at_iou,
)
from .geometry import (
    mask_iou,
    point_in_polygon,
    points_in_polygon,
    polygon_centroid,
    rasterize_polygon,
    tight_bbox,
)
from .gtgen import (
    Annotation,
    EllipseSpec,
    GtTensors,
    build_gt,
    depth_rank_values,
    gaussian_radius,
    render_elliptical_gaussian,
    select_vertices,
)
from .losses import (
    DenseOutputs,
    LossWeights,
    dense_from_gt,
    direct_fit,
    finite_diff_check,
    focal_loss,
    masked_l1,
    total_loss,
)
from .synth import Scene, SceneInstance, gen_scene

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "Annotation",
    "DenseOutputs",
    "Detection",
    "EllipseSpec",
    "EvalDetection",
    "EvalGroundTruth",
    "GtTensors",
    "LossWeights",
    "Peak",
    "Scene",
    "SceneInstance",
    "ap_suite",
    "assemble",
    "average_precision",
    "build_gt",
    "composite",
    "decode_outputs",
    "dense_from_gt",
    "depth_rank_values",
    "direct_fit",
    "extract_peaks",
    "finite_diff_check",
    "focal_loss",
    "gaussian_radius",
    "gen_scene",
    "mask_iou",
    "masked_l1",
    "match_at_iou",
    "point_in_polygon",
    "points_in_polygon",
    "polygon_centroid",
    "rasterize_polygon",
    "render_elliptical_gaussian",
    "select_vertices",
    "tight_bbox",
    "total_loss",
]
