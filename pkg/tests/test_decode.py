import numpy as np
import pytest

from polyseg.decode import assemble, decode_outputs, extract_peaks
from polyseg.errors import PolysegError
from polyseg.gtgen import EllipseSpec, build_gt, render_elliptical_gaussian
from polyseg.losses import DenseOutputs, dense_from_gt
from polyseg.synth import gen_scene


def _outputs(classes=1, vertices=4, hd=16, wd=16):
    return DenseOutputs.zeros(classes, vertices, hd, wd)


# ---------------------------------------------------------------------------
# extract_peaks

def test_extract_peaks_single_gaussian():
    out = _outputs()
    render_elliptical_gaussian(out.heatmaps[0], EllipseSpec((7.0, 9.0), 2.0, 2.0, "horizontal"))
    peaks = extract_peaks(out.heatmaps, 8)
    assert peaks[0].x == 7 and peaks[0].y == 9 and peaks[0].score == 1.0
    assert len([p for p in peaks if p.score > 0.9]) == 1


def test_extract_peaks_two_separated_gaussians_ordered_by_score():
    hm = np.zeros((1, 24, 24))
    render_elliptical_gaussian(hm[0], EllipseSpec((5.0, 5.0), 1.5, 1.5, "horizontal"))
    hm[0] *= 0.8
    render_elliptical_gaussian(hm[0], EllipseSpec((18.0, 16.0), 1.5, 1.5, "horizontal"))
    peaks = extract_peaks(hm, 2)
    assert (peaks[0].x, peaks[0].y) == (18, 16)
    assert (peaks[1].x, peaks[1].y) == (5, 5)
    assert peaks[0].score >= peaks[1].score


def test_extract_peaks_uniform_plateau_single_peak():
    hm = np.full((1, 6, 9), 0.37)
    peaks = extract_peaks(hm, 10)
    assert len(peaks) == 1
    assert (peaks[0].class_id, peaks[0].x, peaks[0].y) == (0, 0, 0)


def test_extract_peaks_respects_k():
    hm = np.zeros((1, 16, 16))
    for x, y in ((2, 2), (8, 8), (13, 4)):
        render_elliptical_gaussian(hm[0], EllipseSpec((float(x), float(y)), 1.0, 1.0, "horizontal"))
    assert len(extract_peaks(hm, 2)) == 2
    with pytest.raises(PolysegError):
        extract_peaks(hm, 0)


# ---------------------------------------------------------------------------
# assemble

def test_assemble_center_arithmetic():
    out = _outputs(hd=16, wd=16)
    out.offset_field[0, 7, 10] = 0.3
    out.offset_field[1, 7, 10] = 0.6
    out.heatmaps[0, 7, 10] = 1.0
    peaks = extract_peaks(out.heatmaps, 1)
    dets = assemble(peaks, out, 4, 0.5)
    assert len(dets) == 1
    assert np.allclose(dets[0].center, [41.2, 30.4], atol=1e-12)


def test_assemble_zero_poly_field_degenerates_to_center():
    out = _outputs(vertices=6)
    out.heatmaps[0, 5, 5] = 1.0
    dets = assemble(extract_peaks(out.heatmaps, 1), out, 4, 0.5)
    assert np.allclose(dets[0].polygon, np.tile(dets[0].center, (6, 1)))


def test_assemble_score_threshold_and_sorting():
    hm = np.zeros((2, 16, 16))
    hm[0, 3, 3] = 0.9
    hm[1, 10, 12] = 0.6
    hm[0, 12, 2] = 0.2
    out = _outputs(classes=2)
    out.heatmaps = hm
    dets = assemble(extract_peaks(hm, 10), out, 4, 0.5)
    assert [d.score for d in dets] == [0.9, 0.6]
    assert dets[0].class_id == 0 and dets[1].class_id == 1


def test_decode_round_trip_on_scene():
    scene = gen_scene(21, 256, 192, 8, 3)
    gt = build_gt(scene.annotations(), 256, 192, 3, 16, 4)
    dets = decode_outputs(dense_from_gt(gt), gt.stride, 128, 0.5)
    assert len(dets) == len(scene.instances)
    wd = gt.feature_shape[1]
    for k in range(len(scene.instances)):
        cy, cx = divmod(int(gt.center_cells[k]), wd)
        center = (np.array([cx, cy]) + gt.subpixel_offsets[:, k]) * gt.stride
        best = min(np.max(np.abs(d.center - center)) for d in dets)
        assert best <= 1e-9
    assert all(a.score >= b.score for a, b in zip(dets, dets[1:]))


def test_assemble_translation_equivariance():
    rng = np.random.default_rng(22)
    dense = _outputs(classes=2, vertices=8, hd=24, wd=24)
    for cls, (x, y) in ((0, (6, 7)), (1, (14, 10))):
        dense.heatmaps[cls, y, x] = 0.9
        dense.poly_field[:, y, x] = rng.normal(0.0, 2.0, 16)
        dense.offset_field[:, y, x] = rng.uniform(0.0, 1.0, 2)
        dense.depth_field[y, x] = rng.uniform(0.1, 1.0)
    dets = decode_outputs(dense, 4, 16, 0.5)
    assert len(dets) == 2

    dy, dx = 3, 5
    shifted = DenseOutputs(
        heatmaps=np.roll(dense.heatmaps, (dy, dx), axis=(1, 2)),
        poly_field=np.roll(dense.poly_field, (dy, dx), axis=(1, 2)),
        depth_field=np.roll(dense.depth_field, (dy, dx), axis=(0, 1)),
        offset_field=np.roll(dense.offset_field, (dy, dx), axis=(1, 2)),
    )
    dets_shifted = decode_outputs(shifted, 4, 16, 0.5)
    assert len(dets_shifted) == 2
    delta = np.array([dx * 4.0, dy * 4.0])
    for a in dets:
        match = min(
            np.max(np.abs(b.polygon - (a.polygon + delta))) for b in dets_shifted
        )
        assert match <= 1e-9
