"""Deterministic synthetic scenes: the desk-scale stand-in for real data.

A scene is a list of instances ordered furthest to closest, each a random
convex polygon (vertices on a jittered, rotated ellipse). Full masks are
rasterized per instance, then visibility is resolved by painting closest
last, exactly like the compositor does, so the scene's label map doubles as
the compositing oracle. Ground truth for the pipeline uses the visible
masks, matching how benchmark annotations depict occluded objects.

The "hard" preset mixes in star-shaped concave instances to exercise the
ray-fallback path of the vertex selection.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import PolysegError
from .geometry import rasterize_polygon
from .gtgen import Annotation

# Validity limits applied before a scene is accepted: every instance must
# stay visible, and same-class visible centroids must keep enough distance
# for peaks to stay separable on a stride-4 feature map.
MIN_VISIBLE_PIXELS = 80
MIN_SAME_CLASS_CENTROID_DIST = 20.0
_MAX_SCENE_ATTEMPTS = 60


@dataclass
class SceneInstance:
    class_id: int
    polygon: np.ndarray
    order_index: int  # 0 = furthest


@dataclass
class Scene:
    width: int
    height: int
    instances: list
    full_masks: list = field(repr=False)
    visible_masks: list = field(repr=False)
    label_map: np.ndarray = field(repr=False)

    def annotations(self):
        """Annotation list (visible masks, furthest first) for build_gt."""
        return [
            Annotation(inst.class_id, self.visible_masks[i], inst.order_index)
            for i, inst in enumerate(self.instances)
        ]


def convex_hull(points):
    """Convex hull, Andrew's monotone chain; returns (m, 2) vertices."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if pts.shape[0] < 3:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(seq):
        chain = []
        for p in seq:
            while len(chain) >= 2:
                o, a = chain[-2], chain[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def _sample_polygon(rng, center, radius, concave):
    k = int(rng.integers(8, 25))
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, k))
    ry = radius * rng.uniform(0.55, 1.0)
    theta = rng.uniform(0.0, np.pi)
    jitter = rng.uniform(0.88, 1.12, k)
    if concave:
        k = int(rng.integers(5, 9)) * 2
        angles = np.linspace(0.0, 2.0 * np.pi, k, endpoint=False) + rng.uniform(0, np.pi / k, k)
        jitter = np.where(np.arange(k) % 2 == 0, 1.0, rng.uniform(0.45, 0.62))
        ry = radius * rng.uniform(0.8, 1.0)
    ex = radius * np.cos(angles) * jitter
    ey = ry * np.sin(angles) * jitter
    ct, st = np.cos(theta), np.sin(theta)
    pts = np.stack([center[0] + ct * ex - st * ey, center[1] + st * ex + ct * ey], axis=1)
    if concave:
        return pts
    return convex_hull(pts)


def _centroid_of_mask(mask):
    ys, xs = np.nonzero(mask)
    return xs.mean(), ys.mean()


def _try_scene(rng, width, height, num_instances, num_classes, preset, force_overlap):
    # Cap radii by the per-instance area budget so dense scenes stay placeable.
    rmax = min(min(width, height) / 4.5, np.sqrt(width * height / (5.5 * num_instances)))
    rmin = min(14.0, rmax * 0.6)
    radii = rng.uniform(rmin, rmax, num_instances)
    centers = np.empty((num_instances, 2))
    for i in range(num_instances):
        placed = False
        for _ in range(80):
            margin = radii[i] * 1.2 + 2.0
            c = rng.uniform([margin, margin], [width - margin, height - margin])
            if force_overlap and i == 1:
                # Pull the second instance into guaranteed overlap with the first.
                ang = rng.uniform(0.0, 2.0 * np.pi)
                dist = rng.uniform(0.55, 0.8) * (radii[0] + radii[1])
                c = centers[0] + dist * np.array([np.cos(ang), np.sin(ang)])
                if not (margin <= c[0] <= width - margin and margin <= c[1] <= height - margin):
                    continue
            ok = True
            for j in range(i):
                lo = 0.55 * (radii[i] + radii[j])
                if force_overlap and i == 1 and j == 0:
                    lo = 0.0
                if np.hypot(*(c - centers[j])) < lo:
                    ok = False
                    break
            if ok:
                centers[i] = c
                placed = True
                break
        if not placed:
            return None

    classes = rng.integers(0, num_classes, num_instances)
    instances = []
    full_masks = []
    for i in range(num_instances):
        concave = preset == "hard" and i % 2 == 1
        poly = _sample_polygon(rng, centers[i], radii[i], concave)
        mask = rasterize_polygon(poly, width, height)
        if np.count_nonzero(mask) < MIN_VISIBLE_PIXELS:
            return None
        instances.append(SceneInstance(int(classes[i]), poly, i))
        full_masks.append(mask)

    label_map = np.zeros((height, width), dtype=np.uint16)
    for i, mask in enumerate(full_masks):  # furthest first, closest overwrites
        label_map[mask] = i + 1
    visible_masks = [label_map == i + 1 for i in range(num_instances)]

    for i, vis in enumerate(visible_masks):
        if np.count_nonzero(vis) < MIN_VISIBLE_PIXELS:
            return None
    cents = [_centroid_of_mask(v) for v in visible_masks]
    for i in range(num_instances):
        for j in range(i + 1, num_instances):
            if classes[i] != classes[j]:
                continue
            dx = abs(cents[i][0] - cents[j][0])
            dy = abs(cents[i][1] - cents[j][1])
            if max(dx, dy) < MIN_SAME_CLASS_CENTROID_DIST:
                return None
    if force_overlap:
        if not np.any(full_masks[0] & full_masks[1]):
            return None
    return Scene(width, height, instances, full_masks, visible_masks, label_map)


def gen_scene(seed, width, height, num_instances, num_classes, preset="convex",
              force_overlap=False):
    """Generate a deterministic scene; identical seeds give identical scenes.

    ``preset`` is "convex" (every instance convex) or "hard" (alternating
    star-shaped concave instances). With ``force_overlap`` the first two
    instances are guaranteed to overlap (the second being the closer one).
    """
    if num_instances < 1:
        raise PolysegError("need at least one instance")
    if num_classes < 1:
        raise PolysegError("need at least one class")
    if preset not in ("convex", "hard"):
        raise PolysegError(f"unknown preset: {preset!r}")
    if force_overlap and num_instances < 2:
        raise PolysegError("forced overlap needs at least two instances")
    rng = np.random.default_rng(seed)
    for _ in range(_MAX_SCENE_ATTEMPTS):
        scene = _try_scene(rng, width, height, num_instances, num_classes, preset,
                           force_overlap)
        if scene is not None:
            return scene
    raise PolysegError(
        f"could not place {num_instances} instances in {width}x{height} "
        f"after {_MAX_SCENE_ATTEMPTS} attempts"
    )
