"""Bit-exact on-disk formats tying the pipeline stages together.

* masks: binary PGM (P5), 8-bit, 0 = background, 255 = set;
* label maps: PGM (P5) with maxval 65535, two bytes per sample, big-endian;
* tensors: "PTSR1\\n" magic, u8 rank, rank x u32 little-endian dims, then a
  float32 little-endian row-major payload;
* annotations and detections: JSON lines.

Every writer/reader pair round-trips exactly: reading a written file and
writing it again reproduces identical bytes.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .decode import Detection
from .errors import FileFormatError
from .gtgen import Annotation, GtTensors

TENSOR_MAGIC = b"PTSR1\n"


# ---------------------------------------------------------------------------
# PGM

def _read_pgm_header(data):
    """Parse a P5 header, honoring '#' comments; returns (w, h, maxval, offset)."""
    if not data.startswith(b"P5"):
        raise FileFormatError("not a binary PGM (P5) file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FileFormatError("truncated PGM header")
        fields.append(int(data[start:pos]))
    return fields[0], fields[1], fields[2], pos + 1


def write_pgm(path, image):
    """Write a uint8 (maxval 255) or uint16 (maxval 65535, big-endian) grid."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise FileFormatError("PGM images must be 2-D")
    if image.dtype == np.uint8:
        maxval, payload = 255, image.tobytes()
    elif image.dtype == np.uint16:
        maxval, payload = 65535, image.astype(">u2").tobytes()
    else:
        raise FileFormatError(f"unsupported PGM dtype: {image.dtype}")
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n{maxval}\n".encode()
    Path(path).write_bytes(header + payload)


def read_pgm(path):
    data = Path(path).read_bytes()
    width, height, maxval, offset = _read_pgm_header(data)
    if maxval == 255:
        dtype, itemsize = np.uint8, 1
    elif maxval == 65535:
        dtype, itemsize = ">u2", 2
    else:
        raise FileFormatError(f"unsupported PGM maxval: {maxval}")
    expected = width * height * itemsize
    payload = data[offset:offset + expected]
    if len(payload) != expected:
        raise FileFormatError("PGM payload truncated")
    img = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return img.astype(np.uint16) if itemsize == 2 else img.copy()


def write_mask(path, mask):
    write_pgm(path, np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8))


def read_mask(path):
    img = read_pgm(path)
    return img != 0


def write_label_map(path, label_map):
    write_pgm(path, np.asarray(label_map, dtype=np.uint16))


def read_label_map(path):
    return read_pgm(path).astype(np.uint16)


# ---------------------------------------------------------------------------
# PTSR1 tensors

def write_tensor(path, array):
    array = np.asarray(array)
    if array.ndim < 1 or array.ndim > 255:
        raise FileFormatError("tensor rank must be in [1, 255]")
    payload = np.ascontiguousarray(array, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<B", array.ndim))
        fh.write(struct.pack(f"<{array.ndim}I", *array.shape))
        fh.write(payload)


def read_tensor(path):
    data = Path(path).read_bytes()
    if not data.startswith(TENSOR_MAGIC):
        raise FileFormatError("bad tensor magic")
    pos = len(TENSOR_MAGIC)
    (rank,) = struct.unpack_from("<B", data, pos)
    pos += 1
    dims = struct.unpack_from(f"<{rank}I", data, pos)
    pos += 4 * rank
    count = int(np.prod(dims, dtype=np.int64))
    arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
    if arr.size != count:
        raise FileFormatError("tensor payload truncated")
    return arr.reshape(dims).copy()


# ---------------------------------------------------------------------------
# Ground-truth tensor directories

def save_gt(dirpath, gt):
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    write_tensor(d / "heatmaps.ptsr", gt.heatmaps)
    write_tensor(d / "poly_offsets.ptsr", gt.poly_offsets)
    write_tensor(d / "depth.ptsr", gt.depth)
    write_tensor(d / "subpixel_offsets.ptsr", gt.subpixel_offsets)
    write_tensor(d / "center_cells.ptsr", gt.center_cells.astype(np.float64))
    write_tensor(d / "valid.ptsr", gt.valid.astype(np.float64))
    (d / "meta.json").write_text(json.dumps({"stride": gt.stride}) + "\n")


def load_gt(dirpath):
    d = Path(dirpath)
    meta = json.loads((d / "meta.json").read_text())
    return GtTensors(
        heatmaps=read_tensor(d / "heatmaps.ptsr").astype(np.float64),
        poly_offsets=read_tensor(d / "poly_offsets.ptsr").astype(np.float64),
        depth=read_tensor(d / "depth.ptsr").astype(np.float64),
        subpixel_offsets=read_tensor(d / "subpixel_offsets.ptsr").astype(np.float64),
        center_cells=read_tensor(d / "center_cells.ptsr").astype(np.int64),
        valid=read_tensor(d / "valid.ptsr") != 0.0,
        stride=int(meta["stride"]),
    )


# ---------------------------------------------------------------------------
# JSON-lines annotations and detections

def write_annotations(scene_dir, annotations):
    """Write masks/<idx>.pgm files plus annotations.jsonl referencing them."""
    scene_dir = Path(scene_dir)
    (scene_dir / "masks").mkdir(parents=True, exist_ok=True)
    lines = []
    for ann in annotations:
        rel = f"masks/inst_{ann.order_index:04d}.pgm"
        write_mask(scene_dir / rel, ann.mask)
        lines.append(json.dumps(
            {"class": int(ann.class_id), "mask": rel, "order": int(ann.order_index)}
        ))
    (scene_dir / "annotations.jsonl").write_text("\n".join(lines) + "\n" if lines else "")


def read_annotations(scene_dir):
    scene_dir = Path(scene_dir)
    annotations = []
    text = (scene_dir / "annotations.jsonl").read_text()
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        annotations.append(Annotation(
            class_id=int(rec["class"]),
            mask=read_mask(scene_dir / rec["mask"]),
            order_index=int(rec["order"]),
        ))
    annotations.sort(key=lambda a: a.order_index)
    return annotations


def write_detections(path, detections):
    with open(path, "w") as fh:
        for det in detections:
            fh.write(json.dumps({
                "class": int(det.class_id),
                "score": float(det.score),
                "center": [float(det.center[0]), float(det.center[1])],
                "poly": [[float(x), float(y)] for x, y in det.polygon],
                "depth": float(det.rel_depth),
            }))
            fh.write("\n")


def read_detections(path):
    detections = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        detections.append(Detection(
            class_id=int(rec["class"]),
            score=float(rec["score"]),
            center=np.array(rec["center"], dtype=np.float64),
            polygon=np.array(rec["poly"], dtype=np.float64),
            rel_depth=float(rec["depth"]),
        ))
    return detections
