"""Labeled datasets: synthetic 2-D generators, IDX ingestion, CSV round-trip.

Every dataset records its bounding box (per-dimension min/max of the
points) so attacks can clip perturbed samples to the data domain. The CSV
format is coordinate columns, a class label, and an origin tag in {clean,
adversarial, noisy}; the box travels in a ``<stem>.meta.json`` sidecar.
"""

import csv
import os
import struct
from dataclasses import dataclass

import numpy as np

from .. import jsonio
from ..errors import ContractError, FormatError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
ORIGINS = ("clean", "adversarial", "noisy")


@dataclass
class SyntheticSpec:
    """Recipe for a 2-D toy dataset.

    kinds: ``circles`` (two concentric classes, outer radius 1, radii ratio
    0.5), ``moons`` (two interleaved half-circles), ``blobs`` (two Gaussian
    clusters centered at (-1, 0) and (1, 0) with std ``noise``). ``shift``
    translates all points, handy for out-of-distribution stand-ins.
    """

    kind: str
    n: int
    noise: float = 0.0
    seed: int = 0
    shift: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("circles", "moons", "blobs"):
            raise ContractError(f"unknown dataset kind {self.kind!r}")
        if self.n < 2:
            raise ContractError(f"need n >= 2 points, got {self.n}")
        if self.noise < 0:
            raise ContractError(f"noise must be >= 0, got {self.noise}")

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "noise": self.noise,
                "seed": self.seed, "shift": list(self.shift)}


@dataclass
class Dataset:
    x: np.ndarray           # (n, d)
    y: np.ndarray           # (n,) class ids
    box: tuple              # (lo (d,), hi (d,)) bounding box

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def dim(self):
        return self.x.shape[1]


def _data_box(x):
    return x.min(axis=0).copy(), x.max(axis=0).copy()


def gen_synthetic(spec):
    """Deterministic toy dataset per the spec; classes balanced to within 1."""
    rng = np.random.default_rng(spec.seed)
    n0 = spec.n - spec.n // 2
    n1 = spec.n // 2

    if spec.kind == "circles":
        t0 = np.linspace(0.0, 2.0 * np.pi, n0, endpoint=False)
        t1 = np.linspace(0.0, 2.0 * np.pi, n1, endpoint=False)
        outer = np.column_stack([np.cos(t0), np.sin(t0)])
        inner = 0.5 * np.column_stack([np.cos(t1), np.sin(t1)])
        x = np.concatenate([outer, inner])
    elif spec.kind == "moons":
        t0 = np.linspace(0.0, np.pi, n0)
        t1 = np.linspace(0.0, np.pi, n1)
        upper = np.column_stack([np.cos(t0), np.sin(t0)])
        lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
        x = np.concatenate([upper, lower])
    else:  # blobs
        left = np.tile([-1.0, 0.0], (n0, 1))
        right = np.tile([1.0, 0.0], (n1, 1))
        x = np.concatenate([left, right])

    if spec.noise > 0:
        x = x + spec.noise * rng.standard_normal(x.shape)
    x = x + np.asarray(spec.shift, dtype=np.float64)
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    return Dataset(x=x, y=y, box=_data_box(x))


def _read_be32(fh, path, what):
    raw = fh.read(4)
    if len(raw) != 4:
        raise FormatError(f"{path}: truncated {what} at byte offset {fh.tell() - len(raw)}")
    return struct.unpack(">I", raw)[0]


def load_idx(images_path, labels_path):
    """Read an IDX image/label file pair; pixels scaled to [0, 1].

    Validates the magic numbers (0x00000803 / 0x00000801), the big-endian
    dimension fields, payload sizes, and that both files agree on the count.
    """
    with open(images_path, "rb") as fh:
        magic = _read_be32(fh, images_path, "magic")
        if magic != IDX_IMAGE_MAGIC:
            raise FormatError(
                f"{images_path}: bad image magic 0x{magic:08x} at byte offset 0")
        count = _read_be32(fh, images_path, "count")
        rows = _read_be32(fh, images_path, "rows")
        cols = _read_be32(fh, images_path, "cols")
        payload = fh.read()
        expected = count * rows * cols
        if len(payload) != expected:
            raise FormatError(
                f"{images_path}: expected {expected} pixel bytes after byte offset 16, "
                f"found {len(payload)}")
    images = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    images = images.reshape(count, rows * cols)

    with open(labels_path, "rb") as fh:
        magic = _read_be32(fh, labels_path, "magic")
        if magic != IDX_LABEL_MAGIC:
            raise FormatError(
                f"{labels_path}: bad label magic 0x{magic:08x} at byte offset 0")
        label_count = _read_be32(fh, labels_path, "count")
        payload = fh.read()
        if len(payload) != label_count:
            raise FormatError(
                f"{labels_path}: expected {label_count} label bytes after byte offset 8, "
                f"found {len(payload)}")
    if label_count != count:
        raise FormatError(
            f"{labels_path}: {label_count} labels for {count} images in {images_path}")
    labels = np.frombuffer(payload, dtype=np.uint8).astype(np.int64)
    dim = images.shape[1]
    return Dataset(x=images, y=labels, box=(np.zeros(dim), np.ones(dim)))


def _meta_path(path):
    stem, _ = os.path.splitext(str(path))
    return stem + ".meta.json"


def write_dataset_csv(path, dataset, origins=None, meta=None):
    """Write coordinates + label + origin rows, and the box sidecar."""
    n, d = dataset.x.shape
    if origins is None:
        origins = ["clean"] * n
    if len(origins) != n:
        raise ContractError(f"{len(origins)} origin tags for {n} rows")
    header = [f"x{i}" for i in range(d)] + ["label", "origin"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row, label, origin in zip(dataset.x, dataset.y, origins):
            if origin not in ORIGINS:
                raise ContractError(f"unknown origin tag {origin!r}")
            writer.writerow([jsonio.format_real(v) for v in row] + [int(label), origin])
    sidecar = {"box_lo": dataset.box[0], "box_hi": dataset.box[1]}
    if meta:
        sidecar.update(meta)
    jsonio.dump(sidecar, _meta_path(path))


def read_dataset_csv(path):
    """Inverse of write_dataset_csv: (Dataset, origin tags).

    The bounding box comes from the sidecar when present, otherwise from
    the data itself.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty dataset file") from None
        if len(header) < 3 or header[-2:] != ["label", "origin"]:
            raise FormatError(f"{path}: unexpected dataset header {header!r}")
        d = len(header) - 2
        xs, ys, origins = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(f"{path}: line {lineno}: expected {len(header)} fields")
            xs.append([float(v) for v in row[:d]])
            ys.append(int(row[d]))
            if row[d + 1] not in ORIGINS:
                raise FormatError(f"{path}: line {lineno}: unknown origin {row[d + 1]!r}")
            origins.append(row[d + 1])
    if not xs:
        raise FormatError(f"{path}: dataset has a header but no rows")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.int64)

    meta_file = _meta_path(path)
    if os.path.exists(meta_file):
        meta = jsonio.load(meta_file)
        box = (np.asarray(meta["box_lo"], dtype=np.float64),
               np.asarray(meta["box_hi"], dtype=np.float64))
    else:
        box = _data_box(x)
    return Dataset(x=x, y=y, box=box), origins
