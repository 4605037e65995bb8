"""Command-line pipeline: synth | gen-gt | decode | composite | eval | selftest | bench.

Stages communicate through scene directories:

    out/scene_00000/
        meta.json            image size, class count, seed
        annotations.jsonl    {"class": c, "mask": "masks/inst_0000.pgm", "order": i}
        masks/inst_*.pgm     visible instance masks (8-bit PGM)
        label_map.pgm        generator truth (16-bit PGM)
        gt/*.ptsr            dense ground-truth tensors      (gen-gt)
        detections.jsonl     decoded instances               (decode)

Exit codes: 0 success, 1 validation failure, 2 I/O or file-format error.
Every run logs a digest of its configuration for reproducibility.
"""

import argparse
import hashlib
import json
import logging
import sys
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from . import _kernels
from .bench import format_kernel_table, format_pipeline_table, kernel_bench, pipeline_bench
from .compositor import composite, depth_map_image, label_map_image, save_png
from .decode import decode_outputs
from .errors import FileFormatError, PolysegError
from .evalap import EvalDetection, EvalGroundTruth, ap_suite
from .fileio import (
    load_gt,
    read_annotations,
    read_detections,
    save_gt,
    write_annotations,
    write_detections,
    write_label_map,
)
from .gtgen import build_gt
from .losses import (
    LossWeights,
    dense_from_gt,
    finite_diff_check,
    focal_loss,
    masked_l1,
    total_loss,
)
from .synth import gen_scene

log = logging.getLogger("polyseg")


def _parse_size(text):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from exc


def _log_config(command, args):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    digest = hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()
    log.info("%s config digest %s (%s)", command, digest[:12], cfg)


def _scene_dirs(root):
    root = Path(root)
    dirs = sorted(p for p in root.glob("scene_*") if p.is_dir())
    if not dirs:
        raise FileNotFoundError(f"no scene_* directories under {root}")
    return dirs


# ---------------------------------------------------------------------------
# Subcommands

def cmd_synth(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        scene = gen_scene(
            args.seed + i, args.size[0], args.size[1], args.instances,
            args.classes, preset=args.preset, force_overlap=args.force_overlap,
        )
        scene_dir = out / f"scene_{i:05d}"
        scene_dir.mkdir(parents=True, exist_ok=True)
        write_annotations(scene_dir, scene.annotations())
        write_label_map(scene_dir / "label_map.pgm", scene.label_map)
        (scene_dir / "meta.json").write_text(json.dumps({
            "width": scene.width,
            "height": scene.height,
            "num_classes": args.classes,
            "seed": args.seed + i,
        }) + "\n")
        log.info("wrote %s (%d instances)", scene_dir, len(scene.instances))
    return 0


def _gen_gt_one(payload):
    scene_dir, num_classes, vertices, stride, max_objects = payload
    scene_dir = Path(scene_dir)
    meta = json.loads((scene_dir / "meta.json").read_text())
    annotations = read_annotations(scene_dir)
    gt = build_gt(
        annotations, meta["width"], meta["height"],
        num_classes if num_classes else meta["num_classes"],
        num_vertices=vertices, stride=stride, max_objects=max_objects,
    )
    save_gt(scene_dir / "gt", gt)
    return str(scene_dir)


def cmd_gen_gt(args):
    jobs = [
        (str(d), args.classes, args.vertices, args.stride, args.max_objects)
        for d in _scene_dirs(args.input)
    ]
    if args.jobs > 1:
        with Pool(args.jobs) as pool:
            for name in pool.imap(_gen_gt_one, jobs):
                log.info("ground truth for %s", name)
    else:
        for payload in jobs:
            log.info("ground truth for %s", _gen_gt_one(payload))
    return 0


def _decode_one(payload):
    scene_dir, max_peaks, threshold = payload
    scene_dir = Path(scene_dir)
    gt = load_gt(scene_dir / "gt")
    detections = decode_outputs(
        dense_from_gt(gt), gt.stride, max_peaks=max_peaks, score_threshold=threshold,
    )
    write_detections(scene_dir / "detections.jsonl", detections)
    return str(scene_dir), len(detections)


def cmd_decode(args):
    jobs = [(str(d), args.max_peaks, args.threshold) for d in _scene_dirs(args.input)]
    if args.jobs > 1:
        with Pool(args.jobs) as pool:
            for name, count in pool.imap(_decode_one, jobs):
                log.info("%s: %d detections", name, count)
    else:
        for payload in jobs:
            name, count = _decode_one(payload)
            log.info("%s: %d detections", name, count)
    return 0


def cmd_composite(args):
    detections = read_detections(args.dets)
    labels = composite(detections, args.size[0], args.size[1], args.threshold)
    write_label_map(args.out, labels)
    log.info("wrote %s (%d instances painted)", args.out, int((np.unique(labels) != 0).sum()))
    if args.png:
        save_png(label_map_image(labels), args.png)
    if args.depth_png:
        save_png(depth_map_image(detections, labels), args.depth_png)
    return 0


def cmd_eval(args):
    gts = []
    dets = []
    for scene_dir in _scene_dirs(args.input):
        image_id = scene_dir.name
        for ann in read_annotations(scene_dir):
            gts.append(EvalGroundTruth(image_id, ann.class_id, ann.mask))
        for det in read_detections(scene_dir / "detections.jsonl"):
            dets.append(EvalDetection(image_id, det.class_id, det.score,
                                      polygon=det.polygon))
    report = ap_suite(dets, gts)
    print(f"{'class':>8} {'AP':>8} {'AP50':>8}")
    for cls, row in sorted(report["per_class"].items()):
        print(f"{cls:>8} {row['AP']:8.4f} {row['AP50']:8.4f}")
    print(f"{'all':>8} {report['AP']:8.4f} {report['AP50']:8.4f}")
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        log.info("wrote %s", args.out)
    return 0


def _selftest_checks():
    from .geometry import mask_iou, points_in_polygon, rasterize_polygon
    rng = np.random.default_rng(7)

    def grad_focal():
        gt = np.zeros((2, 12, 12))
        gt[0, 4, 4] = 1.0
        gt[1, 8, 3] = 1.0
        gt += rng.uniform(0.0, 0.6, gt.shape) * (gt == 0.0)
        pred = rng.uniform(0.05, 0.95, gt.shape)
        err = finite_diff_check(lambda p: focal_loss(p, gt), pred, 1e-4, 250, seed=1)
        return err <= 1e-4, f"max rel err {err:.2e}"

    def grad_l1():
        gt = rng.normal(0.0, 2.0, (12, 32))
        pred = gt + rng.choice([-1.0, 1.0], gt.shape) * rng.uniform(0.2, 1.5, gt.shape)
        valid = rng.random(12) < 0.7
        err = finite_diff_check(lambda p: masked_l1(p, gt, valid), pred, 1e-4, 250, seed=2)
        return err <= 1e-4, f"max rel err {err:.2e}"

    def grad_total():
        scene = gen_scene(11, 128, 128, 4, 2)
        gt = build_gt(scene.annotations(), 128, 128, 2, 16, 4)
        dense = dense_from_gt(gt)
        dense.poly_field += rng.choice([-1.0, 1.0], dense.poly_field.shape) * 0.7
        dense.heatmaps = rng.uniform(0.05, 0.95, dense.heatmaps.shape)
        weights = LossWeights()

        def fn(p):
            probe = dense.copy()
            probe.poly_field = p
            value, grads = total_loss(probe, gt, weights)
            return value, grads.poly_field

        err = finite_diff_check(fn, dense.poly_field, 1e-4, 220, seed=3)
        return err <= 1e-4, f"max rel err {err:.2e}"

    def rasterizer_oracle():
        for k in range(40):
            n = int(rng.integers(3, 12))
            poly = rng.uniform(-6.0, 134.0, (n, 2))
            mask = rasterize_polygon(poly, 128, 128)
            xs = np.tile(np.arange(128, dtype=np.float64), 128)
            ys = np.repeat(np.arange(128, dtype=np.float64), 128)
            pts = np.stack([xs, ys], axis=1)
            oracle = points_in_polygon(pts, poly).reshape(128, 128)
            if not np.array_equal(mask, oracle):
                return False, f"mismatch on polygon {k}"
        return True, "40 polygons bit-identical"

    def ap_hand_cases():
        from .evalap import average_precision
        gt_mask = np.zeros((8, 64), dtype=bool)
        gt_mask[:5, :40] = True
        gts = [EvalGroundTruth("img", 0, gt_mask)]
        perfect = [EvalDetection("img", 0, 0.9, mask=gt_mask.copy())]
        if abs(average_precision(perfect, gts, 0.5) - 1.0) > 1e-12:
            return False, "single TP should give AP 1.0"
        miss = np.zeros((8, 64), dtype=bool)
        dets = [EvalDetection("img", 0, 0.95, mask=miss),
                EvalDetection("img", 0, 0.60, mask=gt_mask.copy())]
        if abs(average_precision(dets, gts, 0.5) - 0.5) > 1e-12:
            return False, "FP-above-TP should give AP 0.5"
        a = np.zeros((4, 64), dtype=bool)
        a[0, :40] = True
        b = np.zeros((4, 64), dtype=bool)
        b[0, 11:51] = True
        iou = mask_iou(a, b)
        suite = ap_suite([EvalDetection("img", 0, 0.9, mask=b)],
                         [EvalGroundTruth("img", 0, a)])
        ok = abs(suite["AP"] - 0.2) <= 1e-9 and suite["AP50"] == 1.0
        return ok, f"IoU {iou:.4f} -> AP {suite['AP']:.4f}, AP50 {suite['AP50']:.4f}"

    return [
        ("focal loss gradient", grad_focal),
        ("masked L1 gradient", grad_l1),
        ("total loss gradient", grad_total),
        ("rasterizer vs point-in-polygon oracle", rasterizer_oracle),
        ("AP hand cases", ap_hand_cases),
    ]


def cmd_selftest(args):
    _kernels.warmup()
    failures = 0
    for name, fn in _selftest_checks():
        ok, detail = fn()
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name:<40} {detail}")
        failures += 0 if ok else 1
    return 0 if failures == 0 else 1


def cmd_bench(args):
    timings = pipeline_bench(args.size[0], args.size[1], args.instances,
                             seed=args.seed, repeats=args.repeats)
    print(f"pipeline stages ({args.size[0]}x{args.size[1]}, "
          f"{args.instances} instances, active backend: {_kernels.BACKEND})")
    print(format_pipeline_table(timings))
    print()
    print("kernel backends")
    print(format_kernel_table(kernel_bench(args.size[0], args.size[1], args.instances,
                                           seed=args.seed, repeats=args.repeats)))
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="polyseg",
        description="Polygon instance segmentation pipeline on synthetic scenes",
    )
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic scenes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--size", type=_parse_size, default=(512, 256))
    p.add_argument("--instances", type=int, default=8)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--preset", choices=["convex", "hard"], default="convex")
    p.add_argument("--force-overlap", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gen-gt", help="build ground-truth tensors for scenes")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--vertices", "--n", type=int, default=16)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--classes", type=int, default=0,
                   help="class count (0 = take from scene meta)")
    p.add_argument("--max-objects", type=int, default=128)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_gen_gt)

    p = sub.add_parser("decode", help="decode detections from ground-truth tensors")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--max-peaks", type=int, default=128)
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("composite", help="paint detections into a label map")
    p.add_argument("--dets", required=True)
    p.add_argument("--size", type=_parse_size, required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--png", default=None)
    p.add_argument("--depth-png", default=None)
    p.set_defaults(func=cmd_composite)

    p = sub.add_parser("eval", help="AP evaluation of decoded detections")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default=None, help="write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("selftest", help="gradient checks, rasterizer oracle, AP hand cases")
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("bench", help="per-stage wall time and kernel backend comparison")
    p.add_argument("--size", type=_parse_size, default=(1024, 512))
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    _log_config(args.command, args)
    try:
        return args.func(args)
    except PolysegError as exc:
        if isinstance(exc, FileFormatError):
            log.error("file format error: %s", exc)
            return 2
        log.error("validation failure: %s", exc)
        return 1
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
