"""Reader (and a small writer) for the big-endian IDX format used by MNIST.

Header: a 32-bit magic ``0x000008NN`` (unsigned bytes, ``NN`` dimensions),
then ``NN`` 32-bit dimension sizes, then the row-major payload.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import IngestionError
from .losses import Dataset
from .rng import Purpose, stream

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def read_idx(path, expected_magic: int) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise IngestionError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != expected_magic:
        raise IngestionError(f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < header:
        raise IngestionError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    size = int(np.prod(dims, dtype=np.int64))
    if len(data) - header != size:
        raise IngestionError(f"{path}: payload has {len(data) - header} bytes, header promises {size}")
    return np.frombuffer(data, dtype=">u1", offset=header).reshape(dims)


def write_idx(path, array) -> None:
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    header = struct.pack(f">I{array.ndim}I", magic, *array.shape)
    Path(path).write_bytes(header + array.tobytes())


def load_idx_subset(images_path, labels_path, class_a: int, class_b: int, subset_m: int, seed: int) -> Dataset:
    """Two-class subset of an IDX image/label pair for logistic regression.

    ``class_a`` maps to label -1 and ``class_b`` to +1.  Pixels are flattened
    row-major and scaled to [0, 1].  ``subset_m`` samples are picked without
    replacement from the eligible images and kept in file order.
    """
    images = read_idx(images_path, IMAGES_MAGIC)
    labels = read_idx(labels_path, LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise IngestionError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    if class_a == class_b:
        raise IngestionError("the two classes must differ")
    for c in (class_a, class_b):
        if not np.any(labels == c):
            raise IngestionError(f"class {c} does not occur in {labels_path}")
    eligible = np.flatnonzero((labels == class_a) | (labels == class_b))
    if not 1 <= subset_m <= eligible.size:
        raise IngestionError(f"subset_m={subset_m} but only {eligible.size} samples of the two classes")
    pick = np.sort(stream(seed, Purpose.SUBSET).choice(eligible.size, subset_m, replace=False))
    chosen = eligible[pick]
    X = images[chosen].reshape(subset_m, -1).astype(np.float64) / 255.0
    y = np.where(labels[chosen] == class_a, -1.0, 1.0)
    return Dataset(X, y)
