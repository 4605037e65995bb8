"""Wall-time benchmarks: pipeline stages and kernel backend comparison."""

import time

import numpy as np

from . import _kernels
from .compositor import composite
from .decode import decode_outputs
from .gtgen import build_gt
from .losses import dense_from_gt
from .synth import gen_scene


def _time(fn, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def pipeline_bench(width=1024, height=512, instances=50, seed=0, stride=4,
                   num_vertices=16, repeats=3):
    """Best-of-N wall time per pipeline stage, in seconds."""
    _kernels.warmup()
    timings = {}

    t, scene = _time(lambda: gen_scene(seed, width, height, instances, 4), repeats)
    timings["synth"] = t
    anns = scene.annotations()

    t, gt = _time(lambda: build_gt(anns, width, height, 4, num_vertices, stride), repeats)
    timings["gen-gt"] = t

    t, dense = _time(lambda: dense_from_gt(gt), repeats)
    timings["densify"] = t

    t, dets = _time(lambda: decode_outputs(dense, stride, max_peaks=128,
                                           score_threshold=0.01), repeats)
    timings["decode"] = t

    t, _ = _time(lambda: composite(dets, width, height), repeats)
    timings["composite"] = t
    timings["decode+composite"] = timings["decode"] + timings["composite"]
    return timings


def kernel_bench(width=1024, height=512, instances=50, seed=0, repeats=3):
    """Compare the jitted and pure-numpy kernels on identical polygons.

    Returns {kernel: {backend: seconds}}; the numba column is absent when
    numba is not importable.
    """
    scene = gen_scene(seed, width, height, instances, 4)
    polys = [np.ascontiguousarray(inst.polygon) for inst in scene.instances]
    xs = np.ascontiguousarray(np.tile(np.arange(256, dtype=np.float64), 256))
    ys = np.ascontiguousarray(np.repeat(np.arange(256, dtype=np.float64), 256))

    results = {"fill_polygon": {}, "paint_polygon": {}, "points_in_polygon": {}}
    for name in _kernels.available_backends():
        impl = _kernels.get_impl(name)
        # Trigger any JIT compilation outside the timed region.
        impl.fill_polygon(polys[0][:, 0].copy(), polys[0][:, 1].copy(), 8, 8)
        impl.points_in_polygon(xs[:4], ys[:4], polys[0][:, 0].copy(), polys[0][:, 1].copy())
        warm_labels = np.zeros((8, 8), dtype=np.uint16)
        impl.paint_polygon(warm_labels, polys[0][:, 0].copy(), polys[0][:, 1].copy(), 1, False)

        def run_fill():
            for p in polys:
                impl.fill_polygon(p[:, 0].copy(), p[:, 1].copy(), width, height)

        def run_paint():
            labels = np.zeros((height, width), dtype=np.uint16)
            for i, p in enumerate(polys):
                impl.paint_polygon(labels, p[:, 0].copy(), p[:, 1].copy(), i + 1, False)

        def run_pip():
            p = polys[0]
            impl.points_in_polygon(xs, ys, p[:, 0].copy(), p[:, 1].copy())

        results["fill_polygon"][name], _ = _time(run_fill, repeats)
        results["paint_polygon"][name], _ = _time(run_paint, repeats)
        results["points_in_polygon"][name], _ = _time(run_pip, repeats)
    return results


def format_pipeline_table(timings):
    lines = ["stage              wall time", "-" * 30]
    for stage, sec in timings.items():
        lines.append(f"{stage:<18} {sec * 1e3:9.3f} ms")
    return "\n".join(lines)


def format_kernel_table(results):
    backends = sorted({b for cols in results.values() for b in cols})
    header = f"{'kernel':<20}" + "".join(f"{b:>14}" for b in backends)
    lines = [header, "-" * len(header)]
    for kernel, cols in results.items():
        row = f"{kernel:<20}"
        for b in backends:
            row += f"{cols[b] * 1e3:>11.3f} ms" if b in cols else f"{'-':>14}"
        lines.append(row)
    return "\n".join(lines)
