import math

import numpy as np
import pytest

from polyseg.errors import PolysegError, ShapeMismatchError
from polyseg.gtgen import build_gt
from polyseg.losses import (
    HEATMAP_MAX,
    HEATMAP_MIN,
    DenseOutputs,
    LossWeights,
    dense_from_gt,
    direct_fit,
    finite_diff_check,
    focal_loss,
    masked_l1,
    total_loss,
)
from polyseg.synth import gen_scene


def _scene_gt(seed=11, size=128, instances=4, classes=2):
    scene = gen_scene(seed, size, size, instances, classes)
    return scene, build_gt(scene.annotations(), size, size, classes, 16, 4)


def _soft_heatmap(rng, shape):
    """Ground-truth-like heatmap with small-sigma bumps (peaks exactly 1)."""
    gt = rng.uniform(0.0, 0.6, shape)
    for c in range(shape[0]):
        y = int(rng.integers(2, shape[1] - 2))
        x = int(rng.integers(2, shape[2] - 2))
        yy, xx = np.mgrid[0:shape[1], 0:shape[2]].astype(float)
        bump = np.exp(-((xx - x) ** 2 + (yy - y) ** 2) / (2 * 1.5 ** 2))
        gt[c] = np.maximum(gt[c] * 0.5, bump)
        gt[c, y, x] = 1.0
    return gt


# ---------------------------------------------------------------------------
# focal_loss

def test_focal_loss_hand_value():
    value, grad = focal_loss(np.array([[0.5]]), np.array([[1.0]]))
    assert value == pytest.approx(0.25 * math.log(2.0), abs=1e-12)
    assert grad.shape == (1, 1)


def test_focal_loss_near_perfect_binary_prediction():
    gt = np.zeros((2, 24, 24))
    gt[0, 5, 7] = 1.0
    gt[1, 12, 3] = 1.0
    pred = np.clip(gt, HEATMAP_MIN, HEATMAP_MAX)
    value, _ = focal_loss(pred, gt)
    assert 0.0 <= value <= 1e-3


def test_focal_loss_positive_and_zero_only_in_limit():
    rng = np.random.default_rng(3)
    gt = _soft_heatmap(rng, (2, 16, 16))
    pred = rng.uniform(0.05, 0.95, gt.shape)
    value, _ = focal_loss(pred, gt)
    assert value > 0.0


def test_focal_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    gt = _soft_heatmap(rng, (2, 16, 16))
    pred = rng.uniform(0.05, 0.95, gt.shape)
    err = finite_diff_check(lambda p: focal_loss(p, gt), pred, 1e-4, 250, seed=5)
    assert err <= 1e-4


def test_focal_loss_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        focal_loss(np.zeros((2, 3)), np.zeros((3, 2)))


# ---------------------------------------------------------------------------
# masked_l1

def test_masked_l1_zero_when_equal():
    pred = np.arange(12.0).reshape(3, 4)
    value, grad = masked_l1(pred, pred.copy(), np.array([True, True, False]))
    assert value == 0.0
    assert np.all(grad == 0.0)


def test_masked_l1_hand_value():
    gt = np.zeros((1, 4))
    pred = np.array([[1.0, -2.0, 3.0, 0.0]])
    value, grad = masked_l1(pred, gt, np.array([True]))
    assert value == pytest.approx(1.5, abs=1e-12)
    assert np.allclose(grad, [[0.25, -0.25, 0.25, 0.0]])


def test_masked_l1_ignores_invalid_rows():
    rng = np.random.default_rng(6)
    gt = rng.normal(size=(5, 8))
    pred = gt + rng.normal(size=(5, 8))
    valid = np.array([True, False, True, False, True])
    value, grad = masked_l1(pred, gt, valid)
    hacked = pred.copy()
    hacked[~valid] += 1e6
    value2, grad2 = masked_l1(hacked, gt, valid)
    assert value2 == value
    assert np.array_equal(grad, grad2)
    assert np.all(grad[~valid] == 0.0)


def test_masked_l1_no_valid_objects():
    value, grad = masked_l1(np.ones((3, 2)), np.zeros((3, 2)), np.zeros(3, bool))
    assert value == 0.0
    assert np.all(grad == 0.0)


def test_masked_l1_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    gt = rng.normal(0.0, 2.0, (10, 40))
    pred = gt + rng.choice([-1.0, 1.0], gt.shape) * rng.uniform(0.2, 1.5, gt.shape)
    valid = rng.random(10) < 0.7
    err = finite_diff_check(lambda p: masked_l1(p, gt, valid), pred, 1e-4, 250, seed=8)
    assert err <= 1e-4


# ---------------------------------------------------------------------------
# total_loss

def _random_outputs(rng, gt):
    hd, wd = gt.feature_shape
    return DenseOutputs(
        heatmaps=rng.uniform(0.05, 0.95, gt.heatmaps.shape),
        poly_field=rng.normal(0.0, 2.0, (gt.poly_offsets.shape[0], hd, wd)),
        depth_field=rng.normal(0.0, 1.0, (hd, wd)),
        offset_field=rng.normal(0.0, 1.0, (2, hd, wd)),
    )


def test_total_loss_zero_weights():
    _, gt = _scene_gt()
    rng = np.random.default_rng(9)
    outputs = _random_outputs(rng, gt)
    value, grads = total_loss(outputs, gt, LossWeights(0.0, 0.0, 0.0, 0.0))
    assert value == 0.0
    assert np.all(grads.heatmaps == 0.0)
    assert np.all(grads.poly_field == 0.0)


def test_total_loss_is_weighted_sum_of_terms():
    _, gt = _scene_gt()
    rng = np.random.default_rng(10)
    outputs = _random_outputs(rng, gt)

    def term(**kw):
        weights = LossWeights(**{"w_hm": 0.0, "w_poly": 0.0, "w_depth": 0.0,
                                 "w_offset": 0.0, **kw})
        return total_loss(outputs, gt, weights)[0]

    hm = term(w_hm=1.0)
    poly = term(w_poly=1.0)
    depth = term(w_depth=1.0)
    offset = term(w_offset=1.0)
    combined = total_loss(outputs, gt, LossWeights(1.0, 1.0, 0.1, 0.1))[0]
    assert combined == pytest.approx(hm + poly + 0.1 * depth + 0.1 * offset, rel=1e-12)
    # Linearity: doubling one weight doubles that term's contribution.
    assert term(w_poly=2.0) == pytest.approx(2.0 * poly, rel=1e-12)


def test_total_loss_depth_weight_zero_configuration():
    _, gt = _scene_gt()
    rng = np.random.default_rng(11)
    outputs = _random_outputs(rng, gt)
    value, grads = total_loss(outputs, gt, LossWeights(w_depth=0.0))
    assert np.all(grads.depth_field == 0.0)
    hacked = outputs.copy()
    hacked.depth_field += 123.0
    assert total_loss(hacked, gt, LossWeights(w_depth=0.0))[0] == pytest.approx(value, rel=1e-12)


def test_total_loss_gradients_match_finite_differences():
    _, gt = _scene_gt(instances=3, size=96)
    rng = np.random.default_rng(12)
    outputs = _random_outputs(rng, gt)
    # Keep regression entries away from the L1 kinks.
    targets = dense_from_gt(gt)
    outputs.poly_field = targets.poly_field + rng.choice([-1.0, 1.0], outputs.poly_field.shape) * 0.7
    outputs.depth_field = targets.depth_field + rng.choice([-1.0, 1.0], outputs.depth_field.shape) * 0.4
    outputs.offset_field = targets.offset_field + rng.choice([-1.0, 1.0], outputs.offset_field.shape) * 0.3

    def field_fn(name):
        def fn(arr):
            probe = outputs.copy()
            setattr(probe, name, arr)
            value, grads = total_loss(probe, gt)
            return value, getattr(grads, name)
        return fn

    for name, eps in (("heatmaps", 1e-4), ("poly_field", 1e-4),
                      ("depth_field", 1e-4), ("offset_field", 1e-4)):
        err = finite_diff_check(field_fn(name), getattr(outputs, name), eps, 220, seed=13)
        assert err <= 1e-4, f"{name}: {err}"


def test_loss_weights_validation():
    with pytest.raises(PolysegError):
        LossWeights(w_hm=-0.1)


# ---------------------------------------------------------------------------
# dense_from_gt

def test_dense_from_gt_places_targets_at_center_cells():
    _, gt = _scene_gt()
    dense = dense_from_gt(gt)
    assert np.array_equal(dense.heatmaps, gt.heatmaps)
    wd = gt.feature_shape[1]
    for k in range(gt.max_objects):
        if not gt.valid[k]:
            continue
        cy, cx = divmod(int(gt.center_cells[k]), wd)
        assert np.array_equal(dense.poly_field[:, cy, cx], gt.poly_offsets[:, k])
        assert dense.depth_field[cy, cx] == gt.depth[k]
        assert np.array_equal(dense.offset_field[:, cy, cx], gt.subpixel_offsets[:, k])


def test_dense_from_gt_later_object_wins_shared_cell():
    import copy
    _, gt = _scene_gt(instances=2, classes=1)
    gt = copy.deepcopy(gt)
    gt.center_cells[1] = gt.center_cells[0]  # force a collision
    dense = dense_from_gt(gt)
    wd = gt.feature_shape[1]
    cy, cx = divmod(int(gt.center_cells[0]), wd)
    assert np.array_equal(dense.poly_field[:, cy, cx], gt.poly_offsets[:, 1])
    assert dense.depth_field[cy, cx] == gt.depth[1]


# ---------------------------------------------------------------------------
# finite_diff_check harness

def test_finite_diff_check_quadratic_sanity():
    def quadratic(x):
        return float(np.sum(x * x)), 2.0 * x

    rng = np.random.default_rng(14)
    point = rng.normal(size=300)
    assert finite_diff_check(quadratic, point, 1e-4, 250, seed=15) <= 1e-6


def test_finite_diff_check_validation():
    with pytest.raises(PolysegError):
        finite_diff_check(lambda x: (0.0, x), np.zeros(3), 0.0)


# ---------------------------------------------------------------------------
# direct_fit

def test_direct_fit_stationary_at_exact_encoding():
    _, gt = _scene_gt(instances=3, size=96)
    init = dense_from_gt(gt)
    result = direct_fit(gt, init, steps=25, lr=0.05)
    assert np.all(result.trace <= result.trace[0] + 1e-9)


def test_direct_fit_reduces_loss_from_random_init():
    _, gt = _scene_gt(instances=3, size=96)
    rng = np.random.default_rng(16)
    init = _random_outputs(rng, gt)
    outputs, trace = direct_fit(gt, init, steps=400, lr=0.5)
    assert trace[-1] < 0.05 * trace[0]
    assert outputs.heatmaps.min() >= HEATMAP_MIN
    assert outputs.heatmaps.max() <= HEATMAP_MAX


def test_direct_fit_validation():
    _, gt = _scene_gt(instances=2)
    init = dense_from_gt(gt)
    with pytest.raises(PolysegError):
        direct_fit(gt, init, steps=0, lr=0.1)
    with pytest.raises(PolysegError):
        direct_fit(gt, init, steps=5, lr=0.0)
