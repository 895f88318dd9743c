"""Datasets: synthetic 2-D generators, stratified splits, IDX ingestion.

Labels are 1-based throughout ([1, k]); the auxiliary outlier class, when
a model has one, is k+1 and never appears in a Dataset. Feature matrices
are float64 (n, d) arrays; per-dimension mean/std use the population
(divide-by-N) convention. Generators are bit-deterministic under their
seed. Datasets are immutable by convention after construction and safe
for shared concurrent reads.
"""

from __future__ import annotations

import csv
import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DomainError,
    IdxBadMagicError,
    IdxCountMismatchError,
    IdxTruncatedError,
    ShapeError,
)

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class DatasetStats:
    mean: np.ndarray
    std: np.ndarray


@dataclass
class Dataset:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64 in [1, k]
    k: int
    stats: DatasetStats = None
    _class_indices: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.features = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ShapeError(f"features must be (n, d), got {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise ShapeError("labels and features disagree on sample count")
        if len(self) and (self.labels.min() < 1 or self.labels.max() > self.k):
            raise DomainError(f"labels must lie in [1, {self.k}]")
        if self.stats is None:
            if len(self):
                self.stats = DatasetStats(
                    mean=self.features.mean(axis=0),
                    std=self.features.std(axis=0),
                )
            else:
                self.stats = DatasetStats(mean=np.zeros(self.dim), std=np.zeros(self.dim))

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_indices(self, label: int) -> np.ndarray:
        if self._class_indices is None:
            object.__setattr__(
                self,
                "_class_indices",
                {c: np.flatnonzero(self.labels == c) for c in range(1, self.k + 1)},
            )
        return self._class_indices[label]


@dataclass(frozen=True)
class SplitSpec:
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.val_fraction < 1.0):
            raise ConfigError(f"val_fraction must be in (0, 1), got {self.val_fraction}")


def gen_blobs(n_per_class, k, centers, spread, seed) -> Dataset:
    """Isotropic Gaussian clusters, one per class, in center order."""
    centers = np.asarray(centers, dtype=np.float64)
    if k < 2:
        raise ConfigError(f"gen_blobs needs k >= 2, got {k}")
    if spread <= 0:
        raise ConfigError(f"spread must be positive, got {spread}")
    if centers.ndim != 2 or centers.shape[0] != k:
        raise ConfigError(f"need {k} centers of uniform dimension, got shape {centers.shape}")
    rng = np.random.default_rng(seed)
    feats, labels = [], []
    for c in range(k):
        feats.append(centers[c] + spread * rng.standard_normal((n_per_class, centers.shape[1])))
        labels.append(np.full(n_per_class, c + 1))
    return Dataset(np.concatenate(feats), np.concatenate(labels), k)


def gen_rings(n_per_class, radii, thickness, seed) -> Dataset:
    """Concentric 2-D annuli centered on the origin, one class per radius."""
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii):
        raise ConfigError(f"radii must be positive, got {radii}")
    if len(set(radii)) != len(radii):
        raise ConfigError(f"radii must be distinct, got {radii}")
    if thickness < 0:
        raise ConfigError(f"thickness must be nonnegative, got {thickness}")
    gaps = np.diff(np.sort(radii))
    if len(gaps) and gaps.min() < thickness:
        warnings.warn("ring annuli overlap: adjacent radii closer than thickness")
    rng = np.random.default_rng(seed)
    feats, labels = [], []
    for c, radius in enumerate(radii):
        theta = rng.uniform(0.0, 2.0 * np.pi, n_per_class)
        r = radius + (rng.random(n_per_class) - 0.5) * thickness
        feats.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
        labels.append(np.full(n_per_class, c + 1))
    return Dataset(np.concatenate(feats), np.concatenate(labels), len(radii))


def holdout_class_as_ood(dataset: Dataset, class_id: int):
    """Split one class off as the outlier pool.

    Returns (d_in, d_out): d_in keeps the other classes with labels
    compacted onto [1, k-1] preserving order; d_out holds the removed
    class relabeled 1.
    """
    if dataset.k < 3:
        raise ConfigError(f"holdout needs k >= 3, got k={dataset.k}")
    if not (1 <= class_id <= dataset.k):
        raise ConfigError(f"class_id {class_id} outside [1, {dataset.k}]")
    mask = dataset.labels == class_id
    remap = {}
    next_label = 1
    for c in range(1, dataset.k + 1):
        if c != class_id:
            remap[c] = next_label
            next_label += 1
    in_labels = np.array([remap[c] for c in dataset.labels[~mask]], dtype=np.int64)
    d_in = Dataset(dataset.features[~mask], in_labels, dataset.k - 1)
    d_out = Dataset(dataset.features[mask], np.ones(int(mask.sum()), dtype=np.int64), 1)
    return d_in, d_out


def train_val_split(dataset: Dataset, spec: SplitSpec):
    """Seeded stratified split; each class's validation share is within
    one sample of ``spec.val_fraction``."""
    if len(dataset) < 2:
        raise ConfigError("cannot split a dataset with fewer than 2 samples")
    rng = np.random.default_rng(spec.seed)
    val_idx = []
    for c in range(1, dataset.k + 1):
        members = dataset.class_indices(c)
        if members.size < 2:
            raise ConfigError(f"class {c} has fewer than 2 members, cannot split")
        n_val = int(round(spec.val_fraction * members.size))
        n_val = min(max(n_val, 0), members.size - 1)
        picked = rng.permutation(members)[:n_val]
        val_idx.append(picked)
    val_idx = np.sort(np.concatenate(val_idx)) if val_idx else np.zeros(0, dtype=np.int64)
    val_mask = np.zeros(len(dataset), dtype=bool)
    val_mask[val_idx] = True
    train = Dataset(dataset.features[~val_mask], dataset.labels[~val_mask], dataset.k)
    val = Dataset(dataset.features[val_mask], dataset.labels[val_mask], dataset.k)
    return train, val


# ---------------------------------------------------------------------------
# IDX container


def _read_idx_header(blob, fmt, magic_expected, path):
    size = struct.calcsize(fmt)
    if len(blob) < size:
        raise IdxTruncatedError(f"{path}: header truncated")
    values = struct.unpack(fmt, blob[:size])
    if values[0] != magic_expected:
        raise IdxBadMagicError(f"{path}: magic 0x{values[0]:08x} != 0x{magic_expected:08x}")
    return values[1:], blob[size:]


def load_idx(images_path, labels_path) -> Dataset:
    """Load the classic big-endian IDX image/label pair.

    Pixels come out as float64 in [0, 1], flattened row-major; labels are
    shifted from 0..9 to 1..10.
    """
    with open(images_path, "rb") as fh:
        img_blob = fh.read()
    with open(labels_path, "rb") as fh:
        lbl_blob = fh.read()

    (n_img, rows, cols), img_payload = _read_idx_header(
        img_blob, ">IIII", IDX_IMAGE_MAGIC, images_path
    )
    (n_lbl,), lbl_payload = _read_idx_header(lbl_blob, ">II", IDX_LABEL_MAGIC, labels_path)

    if len(img_payload) != n_img * rows * cols:
        raise IdxTruncatedError(
            f"{images_path}: payload {len(img_payload)} bytes, expected {n_img * rows * cols}"
        )
    if len(lbl_payload) != n_lbl:
        raise IdxTruncatedError(f"{labels_path}: payload {len(lbl_payload)} bytes, expected {n_lbl}")
    if n_img != n_lbl:
        raise IdxCountMismatchError(f"{n_img} images but {n_lbl} labels")

    pixels = np.frombuffer(img_payload, dtype=np.uint8).astype(np.float64) / 255.0
    features = pixels.reshape(n_img, rows * cols)
    labels = np.frombuffer(lbl_payload, dtype=np.uint8).astype(np.int64) + 1
    return Dataset(features, labels, 10)


# ---------------------------------------------------------------------------
# csv / sidecar io


def write_dataset_csv(dataset: Dataset, path):
    """One row per sample: feature columns then the label."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(dataset.dim)] + ["label"])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def write_stats_json(dataset: Dataset, path):
    payload = {
        "n": len(dataset),
        "dim": dataset.dim,
        "k": dataset.k,
        "mean": [float(v) for v in dataset.stats.mean],
        "std": [float(v) for v in dataset.stats.std],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_dataset_csv(path, k=None) -> Dataset:
    """Inverse of :func:`write_dataset_csv`; k defaults to max(labels)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1] != "label":
            raise ConfigError(f"{path}: not a dataset CSV (missing label column)")
        feats, labels = [], []
        for row in reader:
            feats.append([float(v) for v in row[:-1]])
            labels.append(int(row[-1]))
    if not feats:
        raise ConfigError(f"{path}: dataset CSV has no rows")
    labels = np.asarray(labels, dtype=np.int64)
    return Dataset(np.asarray(feats), labels, int(labels.max()) if k is None else k)
