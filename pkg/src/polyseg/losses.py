"""Training losses with analytic gradients and a direct tensor-fit surrogate.

All losses consume post-activation probabilities and plain float64 arrays; no
autodiff framework is involved. The total loss is the weighted sum of the
four head terms: penalty-reduced focal loss on the heatmaps, and masked L1 on
the polygon offsets, depth values and sub-pixel offsets gathered at the
ground-truth center cells. Gradients are exact, which lets
:func:`direct_fit` run plain gradient descent on the output tensors as a
stand-in for network training.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, PolysegError, ShapeMismatchError

HEATMAP_MIN = 1e-4
HEATMAP_MAX = 1.0 - 1e-4

FOCAL_ALPHA = 2.0  # hardness exponent
FOCAL_BETA = 4.0   # penalty reduction near soft peaks


@dataclass
class DenseOutputs:
    """Dense per-cell outputs of the four heads.

    heatmaps: (classes, hd, wd); poly_field: (2n, hd, wd);
    depth_field: (hd, wd); offset_field: (2, hd, wd).
    """

    heatmaps: np.ndarray
    poly_field: np.ndarray
    depth_field: np.ndarray
    offset_field: np.ndarray

    @classmethod
    def zeros(cls, num_classes, num_vertices, hd, wd):
        return cls(
            heatmaps=np.zeros((num_classes, hd, wd)),
            poly_field=np.zeros((2 * num_vertices, hd, wd)),
            depth_field=np.zeros((hd, wd)),
            offset_field=np.zeros((2, hd, wd)),
        )

    def copy(self):
        return DenseOutputs(
            self.heatmaps.copy(),
            self.poly_field.copy(),
            self.depth_field.copy(),
            self.offset_field.copy(),
        )

    @property
    def feature_shape(self):
        return self.heatmaps.shape[1:]


@dataclass
class LossWeights:
    """Weights of the four loss terms (all must be non-negative)."""

    w_hm: float = 1.0
    w_poly: float = 1.0
    w_depth: float = 0.1
    w_offset: float = 0.1

    def __post_init__(self):
        for name in ("w_hm", "w_poly", "w_depth", "w_offset"):
            if getattr(self, name) < 0:
                raise PolysegError(f"{name} must be non-negative")


def focal_loss(pred, gt):
    """Penalty-reduced focal loss over heatmaps, with its exact gradient.

    Cells where the target is exactly 1 are peaks; everywhere else the
    penalty is reduced by (1 - target)^beta. The sum is normalized by the
    peak count (at least 1). ``pred`` must already be clamped inside (0, 1).
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeMismatchError(f"prediction {pred.shape} vs target {gt.shape}")

    pos = gt == 1.0
    npos = max(1, int(np.count_nonzero(pos)))
    one_minus_p = 1.0 - pred
    log_p = np.log(pred)
    log_1mp = np.log1p(-pred)

    value = 0.0
    grad = np.empty_like(pred)

    # Peaks: -(1-p)^a * log p
    pp = pred[pos]
    omp = one_minus_p[pos]
    value -= float(np.sum(omp ** FOCAL_ALPHA * log_p[pos]))
    grad[pos] = FOCAL_ALPHA * omp ** (FOCAL_ALPHA - 1.0) * log_p[pos] - omp ** FOCAL_ALPHA / pp

    # Soft cells: -(1-Y)^b * p^a * log(1-p)
    neg = ~pos
    pn = pred[neg]
    wfac = (1.0 - gt[neg]) ** FOCAL_BETA
    l1mp = log_1mp[neg]
    value -= float(np.sum(wfac * pn ** FOCAL_ALPHA * l1mp))
    grad[neg] = -wfac * (
        FOCAL_ALPHA * pn ** (FOCAL_ALPHA - 1.0) * l1mp - pn ** FOCAL_ALPHA / (1.0 - pn)
    )

    value /= npos
    grad /= npos
    return value, grad


def masked_l1(pred, gt, valid):
    """Mean absolute error over entries of valid objects only.

    ``pred`` and ``gt`` are (k, ...) with one leading row per object; rows
    where ``valid`` is False contribute nothing to the value or gradient.
    With no valid objects the loss is defined as 0 with a zero gradient.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    if pred.shape != gt.shape:
        raise ShapeMismatchError(f"prediction {pred.shape} vs target {gt.shape}")
    if valid.shape != pred.shape[:1]:
        raise ShapeMismatchError(f"valid flags {valid.shape} vs objects {pred.shape[:1]}")

    grad = np.zeros_like(pred)
    nvalid = int(np.count_nonzero(valid))
    if nvalid == 0:
        return 0.0, grad
    per_row = int(np.prod(pred.shape[1:], dtype=np.int64)) if pred.ndim > 1 else 1
    nentries = nvalid * per_row
    diff = pred[valid] - gt[valid]
    value = float(np.sum(np.abs(diff))) / nentries
    grad[valid] = np.sign(diff) / nentries
    return value, grad


def gather_at_cells(dense, cells):
    """Read a (d, hd, wd) field at flat cell indices; returns (k, d)."""
    d = dense.shape[0]
    flat = dense.reshape(d, -1)
    return flat[:, cells].T


def _scatter_add(dense, cells, rows, valid):
    d = dense.shape[0]
    flat = dense.reshape(d, -1)
    idx = cells[valid]
    np.add.at(flat, (slice(None), idx), rows[valid].T)


def total_loss(outputs, gt, weights=None):
    """Weighted four-term loss (Eq.-style combination) with dense gradients.

    Heatmaps are clamped into [1e-4, 1 - 1e-4] before evaluation; the
    returned heatmap gradient is with respect to the clamped values. The
    regression terms read the dense fields at the ground-truth center cells
    of valid objects and apply :func:`masked_l1`.
    """
    if weights is None:
        weights = LossWeights()
    if outputs.heatmaps.shape != gt.heatmaps.shape:
        raise ShapeMismatchError(
            f"heatmaps {outputs.heatmaps.shape} vs ground truth {gt.heatmaps.shape}"
        )
    cells = gt.center_cells
    valid = gt.valid

    pred_hm = np.clip(outputs.heatmaps, HEATMAP_MIN, HEATMAP_MAX)
    hm_value, hm_grad = focal_loss(pred_hm, gt.heatmaps)

    poly_pred = gather_at_cells(outputs.poly_field, cells)
    poly_value, poly_grad = masked_l1(poly_pred, gt.poly_offsets.T, valid)

    depth_pred = outputs.depth_field.reshape(-1)[cells]
    depth_value, depth_grad = masked_l1(depth_pred, gt.depth, valid)

    off_pred = gather_at_cells(outputs.offset_field, cells)
    off_value, off_grad = masked_l1(off_pred, gt.subpixel_offsets.T, valid)

    value = (
        weights.w_hm * hm_value
        + weights.w_poly * poly_value
        + weights.w_depth * depth_value
        + weights.w_offset * off_value
    )

    grads = DenseOutputs(
        heatmaps=weights.w_hm * hm_grad,
        poly_field=np.zeros_like(outputs.poly_field),
        depth_field=np.zeros_like(outputs.depth_field),
        offset_field=np.zeros_like(outputs.offset_field),
    )
    _scatter_add(grads.poly_field, cells, weights.w_poly * poly_grad, valid)
    flat_depth = grads.depth_field.reshape(-1)
    np.add.at(flat_depth, cells[valid], weights.w_depth * depth_grad[valid])
    _scatter_add(grads.offset_field, cells, weights.w_offset * off_grad, valid)
    return value, grads


def dense_from_gt(gt):
    """Exact dense encoding of ground truth (the decode round-trip input).

    Heatmaps are copied as rendered; regression targets are scattered at
    their center cells, later (closer) objects overwriting earlier ones when
    two objects share a cell. All other cells stay zero.
    """
    hd, wd = gt.feature_shape
    out = DenseOutputs.zeros(gt.num_classes, gt.num_vertices, hd, wd)
    out.heatmaps[:] = gt.heatmaps
    flat_poly = out.poly_field.reshape(out.poly_field.shape[0], -1)
    flat_depth = out.depth_field.reshape(-1)
    flat_off = out.offset_field.reshape(2, -1)
    for k in range(gt.max_objects):
        if not gt.valid[k]:
            continue
        c = gt.center_cells[k]
        flat_poly[:, c] = gt.poly_offsets[:, k]
        flat_depth[c] = gt.depth[k]
        flat_off[:, c] = gt.subpixel_offsets[:, k]
    return out


def finite_diff_check(loss_fn, point, epsilon, num_coords=200, seed=0):
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn(point) -> (value, grad)`` is probed on a random subset of at
    least ``num_coords`` coordinates (all of them for small arrays); the
    relative error denominator is max(|analytic|, |numeric|, 1e-8).
    """
    if epsilon <= 0:
        raise PolysegError("epsilon must be positive")
    point = np.array(point, dtype=np.float64)
    _, grad = loss_fn(point)
    flat = point.reshape(-1)
    gflat = np.asarray(grad).reshape(-1)
    rng = np.random.default_rng(seed)
    total = flat.size
    if total <= num_coords:
        coords = np.arange(total)
    else:
        coords = rng.choice(total, size=num_coords, replace=False)

    worst = 0.0
    for c in coords:
        orig = flat[c]
        flat[c] = orig + epsilon
        f_plus = loss_fn(point)[0]
        flat[c] = orig - epsilon
        f_minus = loss_fn(point)[0]
        flat[c] = orig
        numeric = (f_plus - f_minus) / (2.0 * epsilon)
        analytic = gflat[c]
        denom = max(abs(numeric), abs(analytic), 1e-8)
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst


@dataclass
class FitResult:
    outputs: DenseOutputs
    trace: np.ndarray = field(repr=False)

    def __iter__(self):  # allow `outputs, trace = direct_fit(...)`
        yield self.outputs
        yield self.trace


def direct_fit(gt, init, steps, lr, weights=None):
    """Plain gradient descent on the dense output tensors under the total loss.

    A training surrogate: no momentum, constant step size, heatmaps re-clamped
    after every update. Returns the fitted outputs and the loss trace
    (``steps + 1`` values, final loss last). Raises on non-finite loss.
    """
    if steps < 1:
        raise PolysegError("steps must be >= 1")
    if lr <= 0:
        raise PolysegError("lr must be positive")
    out = init.copy()
    np.clip(out.heatmaps, HEATMAP_MIN, HEATMAP_MAX, out=out.heatmaps)
    trace = np.empty(steps + 1, dtype=np.float64)
    for s in range(steps):
        value, g = total_loss(out, gt, weights)
        if not math.isfinite(value):
            raise DivergenceError(f"loss became non-finite at step {s}")
        trace[s] = value
        out.heatmaps -= lr * g.heatmaps
        out.poly_field -= lr * g.poly_field
        out.depth_field -= lr * g.depth_field
        out.offset_field -= lr * g.offset_field
        np.clip(out.heatmaps, HEATMAP_MIN, HEATMAP_MAX, out=out.heatmaps)
    final, _ = total_loss(out, gt, weights)
    if not math.isfinite(final):
        raise DivergenceError("final loss is non-finite")
    trace[steps] = final
    return FitResult(out, trace)
