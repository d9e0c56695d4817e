"""Feature/label ingestion, binary file formats, splits, and synthetic data.

Two little-endian binary formats carry data between tools, bit-exactly:

FMAT (feature matrix, samples as columns)
    magic   4 bytes  b"FMAT"
    version u32      currently 1
    rows    u64      feature dimension d
    cols    u64      sample count N
    dtype   u32      1 = float32, 2 = float64
    payload rows * cols scalars, row-major

LBLS (class labels)
    magic   4 bytes  b"LBLS"
    version u32      currently 1
    count   u64      sample count N
    classes u64      class count c
    payload N x u32 class indices, each < c

float32 storage halves exporter file sizes; everything is widened to float64
on load, and all computation downstream is float64.
"""

from __future__ import annotations

import csv
import math
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError, FormatError, ParameterError, ShapeError
from .linalg import as_matrix

__all__ = [
    "Dataset",
    "describe_file",
    "gaussian_blobs",
    "load_csv",
    "load_features",
    "load_labels",
    "one_hot",
    "save_features",
    "save_labels",
    "split",
]

FORMAT_VERSION = 1

_FMAT_MAGIC = b"FMAT"
_LBLS_MAGIC = b"LBLS"
_FMAT_HEADER = struct.Struct("<4sIQQI")
_LBLS_HEADER = struct.Struct("<4sIQQ")
_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_DTYPE_NAMES = {"f4": 1, "f8": 2, "f32": 1, "f64": 2}


@dataclass
class Dataset:
    """Features (d x N) with one-hot targets (c x N) and optional class names."""

    features: np.ndarray
    targets: np.ndarray
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        self.features = as_matrix(self.features, "features")
        self.targets = as_matrix(self.targets, "targets")
        if self.features.shape[1] != self.targets.shape[1]:
            raise ShapeError(
                f"features have {self.features.shape[1]} columns, "
                f"targets have {self.targets.shape[1]}"
            )
        if self.targets.size and not (
            np.isin(self.targets, (0.0, 1.0)).all()
            and (self.targets.sum(axis=0) == 1.0).all()
        ):
            raise DataError("every target column must be one-hot")
        if self.class_names is not None:
            self.class_names = tuple(self.class_names)
            if len(self.class_names) != self.targets.shape[0]:
                raise ShapeError("class_names length must equal the class count")

    @property
    def n_features(self) -> int:
        return self.features.shape[0]

    @property
    def n_samples(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.targets.shape[0]

    def labels(self) -> np.ndarray:
        """Class index per sample (argmax of the one-hot columns)."""
        return np.argmax(self.targets, axis=0)


def save_features(matrix, path, dtype: str = "f8"):
    """Write a feature matrix as FMAT. ``dtype`` is "f4"/"f32" or "f8"/"f64"."""
    m = as_matrix(matrix, "matrix")
    if dtype not in _DTYPE_NAMES:
        raise ParameterError(f"unknown dtype {dtype!r}; use f4/f32 or f8/f64")
    code = _DTYPE_NAMES[dtype]
    with open(path, "wb") as fh:
        fh.write(_FMAT_HEADER.pack(_FMAT_MAGIC, FORMAT_VERSION, m.shape[0], m.shape[1], code))
        fh.write(np.ascontiguousarray(m, dtype=_DTYPE_CODES[code]).tobytes())


def load_features(path) -> np.ndarray:
    """Read an FMAT file to a float64 matrix, validating the full header."""
    with open(path, "rb") as fh:
        header = fh.read(_FMAT_HEADER.size)
        if len(header) < _FMAT_HEADER.size:
            raise FormatError(f"{path}: truncated FMAT header")
        magic, version, rows, cols, code = _FMAT_HEADER.unpack(header)
        if magic != _FMAT_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected b'FMAT'")
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported FMAT version {version}")
        if code not in _DTYPE_CODES:
            raise FormatError(f"{path}: unknown dtype code {code}")
        dt = _DTYPE_CODES[code]
        payload = fh.read()
    expected = rows * cols * dt.itemsize
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    m = np.frombuffer(payload, dtype=dt).reshape(rows, cols).astype(np.float64)
    if not np.isfinite(m).all():
        raise DataError(f"{path}: non-finite values in feature payload")
    return m


def save_labels(labels, n_classes: int, path):
    """Write class indices as LBLS."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ShapeError("labels must be a 1-D sequence of class indices")
    labels = labels.astype(np.int64)
    n_classes = int(n_classes)
    if n_classes < 1:
        raise ParameterError("class count must be >= 1")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise DataError(f"label indices must lie in [0, {n_classes})")
    with open(path, "wb") as fh:
        fh.write(_LBLS_HEADER.pack(_LBLS_MAGIC, FORMAT_VERSION, labels.size, n_classes))
        fh.write(labels.astype("<u4").tobytes())


def load_labels(path):
    """Read an LBLS file; returns ``(labels, n_classes)``."""
    with open(path, "rb") as fh:
        header = fh.read(_LBLS_HEADER.size)
        if len(header) < _LBLS_HEADER.size:
            raise FormatError(f"{path}: truncated LBLS header")
        magic, version, count, n_classes, = _LBLS_HEADER.unpack(header)
        if magic != _LBLS_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected b'LBLS'")
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported LBLS version {version}")
        payload = fh.read()
    if len(payload) != count * 4:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {count * 4}")
    labels = np.frombuffer(payload, dtype="<u4").astype(np.int64)
    if labels.size and labels.max() >= n_classes:
        raise DataError(f"{path}: label {labels.max()} out of range for {n_classes} classes")
    return labels, int(n_classes)


def describe_file(path) -> dict:
    """Header metadata of an FMAT or LBLS file, without loading features.

    FMAT payload size is checked against the file length; LBLS payloads are
    read to recount the class histogram. Unknown magic raises FormatError.
    """
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic == _FMAT_MAGIC:
            rest = fh.read(_FMAT_HEADER.size - 4)
            if len(rest) < _FMAT_HEADER.size - 4:
                raise FormatError(f"{path}: truncated FMAT header")
            _, version, rows, cols, code = _FMAT_HEADER.unpack(magic + rest)
            if version != FORMAT_VERSION:
                raise FormatError(f"{path}: unsupported FMAT version {version}")
            if code not in _DTYPE_CODES:
                raise FormatError(f"{path}: unknown dtype code {code}")
            expected = _FMAT_HEADER.size + rows * cols * _DTYPE_CODES[code].itemsize
            actual = os.fstat(fh.fileno()).st_size
            if actual != expected:
                raise FormatError(f"{path}: file is {actual} bytes, expected {expected}")
            return {
                "format": "FMAT",
                "version": version,
                "rows": rows,
                "cols": cols,
                "dtype": {1: "f32", 2: "f64"}[code],
            }
        if magic == _LBLS_MAGIC:
            pass
        elif len(magic) < 4:
            raise FormatError(f"{path}: file too short for any known header")
        else:
            raise FormatError(f"{path}: bad magic {magic!r}, expected b'FMAT' or b'LBLS'")
    labels, n_classes = load_labels(path)
    counts = np.bincount(labels, minlength=n_classes) if labels.size else np.zeros(n_classes, dtype=np.int64)
    return {
        "format": "LBLS",
        "version": FORMAT_VERSION,
        "count": int(labels.size),
        "classes": n_classes,
        "histogram": [int(c) for c in counts],
    }


def one_hot(labels, n_classes: int) -> np.ndarray:
    """One-hot target matrix (n_classes x N) from class indices."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n_classes = int(n_classes)
    if n_classes < 1:
        raise ParameterError("class count must be >= 1")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise DataError(f"label indices must lie in [0, {n_classes})")
    out = np.zeros((n_classes, labels.size))
    out[labels, np.arange(labels.size)] = 1.0
    return out


def split(dataset: Dataset, train_fraction: float, seed) -> tuple[Dataset, Dataset]:
    """Deterministic per-class stratified split into (train, test).

    Each class contributes round(train_fraction * count) samples to the train
    side (round half up); the two sides are disjoint and cover the dataset.
    Original sample order is preserved within each side.
    """
    if not 0.0 <= train_fraction <= 1.0:
        raise ParameterError(f"train_fraction must be in [0, 1], got {train_fraction}")
    rng = np.random.default_rng(seed)
    labels = dataset.labels()
    train_idx, test_idx = [], []
    for k in range(dataset.n_classes):
        members = np.flatnonzero(labels == k)
        perm = rng.permutation(members)
        take = int(math.floor(train_fraction * len(members) + 0.5))
        train_idx.extend(perm[:take])
        test_idx.extend(perm[take:])
    train_idx = np.sort(np.asarray(train_idx, dtype=np.int64))
    test_idx = np.sort(np.asarray(test_idx, dtype=np.int64))

    def take(idx):
        return Dataset(
            features=dataset.features[:, idx],
            targets=dataset.targets[:, idx],
            class_names=dataset.class_names,
        )

    return take(train_idx), take(test_idx)


def load_csv(path, label_column, has_header: bool | None = None) -> Dataset:
    """Load a numeric CSV with one label column into a Dataset.

    ``label_column`` is a column index or, when the file has a header, a
    column name. ``has_header=None`` auto-detects: a first row whose feature
    cells do not all parse as numbers is treated as a header. Class names are
    the sorted distinct label values; indices follow that order.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise DataError(f"{path}: file is empty")

    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: row {i + 1} has {len(row)} cells, expected {width}")

    header = None
    if isinstance(label_column, str):
        if has_header is False:
            raise DataError("a named label column requires a header row")
        header = rows[0]
        if label_column not in header:
            raise DataError(f"{path}: no column named {label_column!r} in header")
        label_idx = header.index(label_column)
        body = rows[1:]
    else:
        label_idx = int(label_column)
        if label_idx < 0:
            label_idx += width
        if not 0 <= label_idx < width:
            raise ParameterError(
                f"label column {label_column} out of range for width {width}"
            )
        body = rows
        if has_header or (has_header is None and _looks_like_header(rows[0], label_idx)):
            header = rows[0]
            body = rows[1:]
    if not body:
        raise DataError(f"{path}: no data rows")

    feature_cols = [j for j in range(width) if j != label_idx]
    features = np.empty((len(feature_cols), len(body)))
    raw_labels = []
    for i, row in enumerate(body):
        for fj, j in enumerate(feature_cols):
            try:
                features[fj, i] = float(row[j])
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell {row[j]!r} at row {i + 1 + (header is not None)}, "
                    f"column {j + 1}"
                ) from None
        raw_labels.append(row[label_idx])
    if not np.isfinite(features).all():
        raise DataError(f"{path}: non-finite feature values")

    class_names = tuple(sorted(set(raw_labels)))
    index = {name: k for k, name in enumerate(class_names)}
    labels = np.array([index[v] for v in raw_labels], dtype=np.int64)
    return Dataset(
        features=features,
        targets=one_hot(labels, len(class_names)),
        class_names=class_names,
    )


def _looks_like_header(row, label_idx) -> bool:
    for j, cell in enumerate(row):
        if j == label_idx:
            continue
        try:
            float(cell)
        except ValueError:
            return True
    return False


def gaussian_blobs(
    n_classes: int,
    n_features: int,
    n_samples: int,
    seed,
    center_spread: float = 2.0,
    noise: float = 1.0,
) -> Dataset:
    """Balanced isotropic Gaussian class clusters, for benchmarks and tests."""
    if n_classes < 1 or n_features < 1 or n_samples < 1:
        raise ParameterError("n_classes, n_features, n_samples must all be >= 1")
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, center_spread, size=(n_classes, n_features))
    labels = np.arange(n_samples, dtype=np.int64) % n_classes
    features = centers[labels].T + rng.normal(0.0, noise, size=(n_features, n_samples))
    return Dataset(features=features, targets=one_hot(labels, n_classes))
