"""Labelled datasets: synthetic generation, IDX (MNIST) reading, CSV export."""
from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass

import numpy as np

from ..exceptions import BadMagic, CountMismatch, DimensionMismatch, TruncatedFile

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    split: str = "train"
    agent: int | None = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels)
        if features.ndim != 2:
            raise DimensionMismatch(f"features must be 2-d, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise DimensionMismatch(
                f"{features.shape[0]} feature rows but labels have shape {labels.shape}"
            )
        features.setflags(write=False)
        labels = labels.copy()
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]


def generate_synthetic(seed, n_agents, d, samples=(500, 500, 200), true_w=None, noise=0.1):
    """Per-agent ``(train, val, test)`` splits for the binary logistic problem.

    Agent ``i`` (0-based) draws features from ``N(0, (i+1)^2 I_d)``, so the
    data distribution differs across agents.  Labels are
    ``sgn(x'w + noise * z)`` in ``{-1, +1}`` with ``z`` standard normal.
    """
    if isinstance(samples, int):
        samples = (samples, samples, samples)
    rng = np.random.default_rng(seed)
    if true_w is None:
        true_w = rng.standard_normal(d)
    true_w = np.asarray(true_w, dtype=float)
    if true_w.shape != (d,):
        raise DimensionMismatch(f"true_w must have shape ({d},)")
    out = []
    for i in range(n_agents):
        splits = []
        for split, m in zip(("train", "val", "test"), samples):
            X = (i + 1) * rng.standard_normal((m, d))
            z = rng.standard_normal(m)
            y = np.where(X @ true_w + noise * z > 0, 1, -1)
            splits.append(Dataset(X, y, split, i))
        out.append(tuple(splits))
    return out


def write_dataset_csv(dataset, path):
    """One row per sample, label in the last column."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(dataset.d)] + ["label"])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def read_dataset_csv(path, split="train", agent=None):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    arr = np.array(rows, dtype=float).reshape(len(rows), -1)
    return Dataset(arr[:, :-1], arr[:, -1].astype(int), split, agent)


def _open(path, mode="rb"):
    return gzip.open(path, mode) if str(path).endswith(".gz") else open(path, mode)


def _read_exact(fh, size, what):
    buf = fh.read(size)
    if len(buf) != size:
        raise TruncatedFile(f"{what}: expected {size} bytes, got {len(buf)}")
    return buf


def load_idx(path_images, path_labels, max_samples=None, split="train"):
    """Read an IDX image/label file pair; pixels scaled to [0, 1] and flattened."""
    with _open(path_images) as fh:
        magic, count = struct.unpack(">II", _read_exact(fh, 8, "image header"))
        if magic != IDX_IMAGES_MAGIC:
            raise BadMagic(f"image file magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")
        rows, cols = struct.unpack(">II", _read_exact(fh, 8, "image header"))
        pixels = _read_exact(fh, count * rows * cols, "image data")
    with _open(path_labels) as fh:
        magic, n_labels = struct.unpack(">II", _read_exact(fh, 8, "label header"))
        if magic != IDX_LABELS_MAGIC:
            raise BadMagic(f"label file magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")
        if n_labels != count:
            raise CountMismatch(f"{count} images but {n_labels} labels")
        labels = _read_exact(fh, count, "label data")

    features = np.frombuffer(pixels, dtype=np.uint8).reshape(count, rows * cols) / 255.0
    labels = np.frombuffer(labels, dtype=np.uint8).astype(np.int64)
    if max_samples is not None:
        features, labels = features[:max_samples], labels[:max_samples]
    return Dataset(features, labels, split)


def write_idx(images, labels, path_images, path_labels):
    """Write uint8 arrays ``images`` (count, rows, cols) and ``labels`` (count,) as IDX.

    Paths ending in ``.gz`` are gzip-compressed, mirroring :func:`load_idx`.
    """
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    count, rows, cols = images.shape
    with _open(path_images, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, count, rows, cols))
        fh.write(images.tobytes())
    with _open(path_labels, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())
