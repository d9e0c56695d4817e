"""Writers for the binary feature and label formats.

Deliberately self-contained: this package talks to the training side only
through the files themselves, so the layouts are restated here rather than
imported. Both formats are little-endian with a 4-byte magic and a u32
format version.

FMAT: magic "FMAT", version, rows (u64), cols (u64), dtype code (u32,
1 = float32, 2 = float64), then rows x cols scalars row-major. Columns are
samples.

LBLS: magic "LBLS", version, count (u64), classes (u64), then count u32
class indices.
"""

import struct

import numpy as np

FORMAT_VERSION = 1

_FMAT_HEADER = struct.Struct("<4sIQQI")
_LBLS_HEADER = struct.Struct("<4sIQQ")

_DTYPE_CODES = {"f32": (1, "<f4"), "f64": (2, "<f8")}


def write_features(matrix, path, dtype="f32"):
    if dtype not in _DTYPE_CODES:
        raise ValueError(f"dtype must be f32 or f64, got {dtype!r}")
    code, np_dtype = _DTYPE_CODES[dtype]
    matrix = np.ascontiguousarray(matrix, dtype=np_dtype)
    if matrix.ndim != 2:
        raise ValueError(f"feature matrix must be 2-D, got shape {matrix.shape}")
    if not np.isfinite(matrix).all():
        raise ValueError("feature matrix contains non-finite values")
    with open(path, "wb") as fh:
        fh.write(
            _FMAT_HEADER.pack(
                b"FMAT", FORMAT_VERSION, matrix.shape[0], matrix.shape[1], code
            )
        )
        fh.write(matrix.tobytes())


def write_labels(labels, n_classes, path):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {labels.shape}")
    if n_classes < 1:
        raise ValueError(f"class count must be positive, got {n_classes}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(
            f"label indices must lie in [0, {n_classes}), "
            f"got range [{labels.min()}, {labels.max()}]"
        )
    with open(path, "wb") as fh:
        fh.write(_LBLS_HEADER.pack(b"LBLS", FORMAT_VERSION, labels.size, n_classes))
        fh.write(labels.astype("<u4").tobytes())
