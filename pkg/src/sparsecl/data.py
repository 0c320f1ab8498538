"""Task data: synthetic Gaussian-cluster generation, class-incremental
splitting, and precomputed-embedding ingestion.

Embedding files come in two interchangeable flavors:

* binary: magic ``SCLE``, then little-endian uint32 version, sample count,
  dimension, class count; then per sample a uint32 label followed by the
  embedding as little-endian float32 values.
* csv: one sample per row, ``label,v1,...,vd``, no header.

Embeddings are stored as the extractor produced them; L2 normalization
happens inside the model's forward pass, not on disk.
"""

from __future__ import annotations

import csv as _csv
import struct
from dataclasses import dataclass

import numpy as np

from .numerics import l2_normalize

MAGIC = b"SCLE"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIII")


class EmbeddingFormatError(ValueError):
    """Malformed embedding file (bad magic, truncation, unparsable row)."""


class EmbeddingDimensionError(EmbeddingFormatError):
    """A row's dimension disagrees with the file's declared dimension."""


@dataclass
class TaskDataset:
    """Train/val arrays for one task plus its (disjoint) class set."""

    task_id: int
    class_set: frozenset
    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray

    def __post_init__(self):
        labels = set(self.train_y.tolist()) | set(self.val_y.tolist())
        if not labels <= self.class_set:
            raise ValueError("dataset contains labels outside its class set")


def gen_synthetic(
    num_classes: int,
    dim: int,
    samples_per_class: int,
    cluster_spread: float,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Isotropic Gaussian clusters around random unit mean vectors."""
    if num_classes < 1 or dim < 1 or samples_per_class < 1:
        raise ValueError("num_classes, dim, samples_per_class must be positive")
    if cluster_spread <= 0:
        raise ValueError(f"cluster_spread must be positive, got {cluster_spread}")
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for c in range(num_classes):
        mean = l2_normalize(rng.normal(size=dim))
        xs.append(mean + rng.normal(0.0, cluster_spread, size=(samples_per_class, dim)))
        ys.append(np.full(samples_per_class, c, dtype=np.int64))
    return np.concatenate(xs), np.concatenate(ys)


def split_tasks(
    x: np.ndarray,
    y: np.ndarray,
    num_tasks: int,
    classes_per_task: int,
    val_fraction: float,
    seed: int,
    shuffle_classes: bool = False,
) -> list[TaskDataset]:
    """Partition classes disjointly into tasks with stratified train/val splits.

    Classes are assigned to tasks in label order by default; shuffle_classes
    randomizes the assignment under the seed (random task splits).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if not 0.0 < val_fraction < 1.0:
        raise ValueError(f"val_fraction must be in (0, 1), got {val_fraction}")
    classes = np.unique(y)
    needed = num_tasks * classes_per_task
    if needed > classes.size:
        raise ValueError(
            f"need {needed} classes for {num_tasks} tasks x {classes_per_task}, "
            f"have {classes.size}"
        )
    rng = np.random.default_rng(seed)
    if shuffle_classes:
        classes = rng.permutation(classes)
    tasks = []
    for t in range(num_tasks):
        task_classes = classes[t * classes_per_task:(t + 1) * classes_per_task]
        tr_idx, va_idx = [], []
        for c in np.sort(task_classes):
            idx = np.flatnonzero(y == c)
            idx = rng.permutation(idx)
            n_val = int(round(val_fraction * idx.size))
            va_idx.append(idx[:n_val])
            tr_idx.append(idx[n_val:])
        tr = np.concatenate(tr_idx)
        va = np.concatenate(va_idx)
        tasks.append(TaskDataset(
            task_id=t,
            class_set=frozenset(int(c) for c in task_classes),
            train_x=x[tr], train_y=y[tr].astype(np.int64),
            val_x=x[va], val_y=y[va].astype(np.int64),
        ))
    return tasks


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise EmbeddingFormatError("embedding file contains NaN or Inf values")


def save_embeddings_binary(path, x: np.ndarray, y: np.ndarray,
                           class_count: int | None = None) -> None:
    x = np.asarray(x, dtype=np.float32)
    y = np.asarray(y, dtype=np.uint32)
    if class_count is None:
        class_count = int(y.max()) + 1 if y.size else 0
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, x.shape[0], x.shape[1], class_count))
        for label, row in zip(y, x):
            f.write(struct.pack("<I", int(label)))
            f.write(row.astype("<f4").tobytes())


def load_embeddings_binary(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as f:
        header = f.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise EmbeddingFormatError(f"{path}: truncated header")
        magic, version, count, dim, class_count = _HEADER.unpack(header)
        if magic != MAGIC:
            raise EmbeddingFormatError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise EmbeddingFormatError(f"{path}: unsupported version {version}")
        record = struct.Struct(f"<I{dim}f")
        x = np.empty((count, dim), dtype=np.float64)
        y = np.empty(count, dtype=np.int64)
        for i in range(count):
            raw = f.read(record.size)
            if len(raw) < record.size:
                raise EmbeddingFormatError(
                    f"{path}: truncated at record {i} (expected {count} records)"
                )
            values = record.unpack(raw)
            label = values[0]
            if label >= class_count:
                raise EmbeddingFormatError(
                    f"{path}: record {i} label {label} >= class count {class_count}"
                )
            y[i] = label
            x[i] = values[1:]
    _check_finite(x)
    return x, y


def save_embeddings_csv(path, x: np.ndarray, y: np.ndarray) -> None:
    x = np.asarray(x)
    with open(path, "w", newline="") as f:
        w = _csv.writer(f)
        for label, row in zip(y, x):
            w.writerow([int(label)] + [repr(float(v)) for v in row])


def load_embeddings_csv(path) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    dim = None
    with open(path, newline="") as f:
        for rownum, row in enumerate(_csv.reader(f)):
            if not row:
                continue
            try:
                label = int(row[0])
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise EmbeddingFormatError(f"{path}: unparsable row {rownum}: {exc}")
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise EmbeddingFormatError(f"{path}: row {rownum} has no values")
            elif len(values) != dim:
                raise EmbeddingDimensionError(
                    f"{path}: row {rownum} has {len(values)} values, expected {dim}"
                )
            ys.append(label)
            xs.append(values)
    if not xs:
        raise EmbeddingFormatError(f"{path}: no samples")
    x = np.asarray(xs, dtype=np.float64)
    _check_finite(x)
    return x, np.asarray(ys, dtype=np.int64)


def load_embeddings(path, fmt: str = "binary") -> tuple[np.ndarray, np.ndarray]:
    """Load an embedding file in the named format ("binary" or "csv")."""
    if fmt == "binary":
        return load_embeddings_binary(path)
    if fmt == "csv":
        return load_embeddings_csv(path)
    raise ValueError(f"unknown embedding format {fmt!r} (use 'binary' or 'csv')")
