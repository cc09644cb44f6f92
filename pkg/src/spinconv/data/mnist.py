"""IDX reader/writer and MNIST loading."""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import FormatError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
GZIP_MAGIC = b"\x1f\x8b"


@dataclass(frozen=True)
class PlanarImage:
    pixels: np.ndarray
    label: int

    def __post_init__(self):
        object.__setattr__(self, "pixels", np.clip(np.asarray(self.pixels, dtype=float), 0.0, 1.0))
        object.__setattr__(self, "label", int(self.label))


def _open(path):
    with open(path, "rb") as f:
        head = f.read(2)
    return gzip.open(path, "rb") if head == GZIP_MAGIC else open(path, "rb")


def _parse_header(fh, path, expected_magic):
    head = fh.read(4)
    if len(head) < 4:
        raise FormatError(f"{path}: truncated IDX header")
    (magic,) = struct.unpack(">I", head)
    if expected_magic is not None and magic != expected_magic:
        raise FormatError(f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    if magic >> 8 != 0x08:
        raise FormatError(f"{path}: only unsigned-byte IDX files are supported (magic 0x{magic:08x})")
    ndim = magic & 0xFF
    dims = fh.read(4 * ndim)
    if len(dims) < 4 * ndim:
        raise FormatError(f"{path}: truncated IDX header")
    return magic, struct.unpack(f">{ndim}I", dims)


def read_idx_header(path, expected_magic: int | None = None) -> tuple[int, tuple]:
    """Magic number and dimensions without reading the payload."""
    with _open(path) as fh:
        return _parse_header(fh, path, expected_magic)


def read_idx(path, expected_magic: int | None = None, limit: int | None = None) -> np.ndarray:
    """Unsigned-byte IDX array, gzip detected from the first bytes.

    ``limit`` reads only the first items along axis 0.
    """
    with _open(path) as fh:
        _, dims = _parse_header(fh, path, expected_magic)
        n = dims[0] if limit is None else min(dims[0], int(limit))
        count = n * int(np.prod(dims[1:], dtype=np.int64))
        data = fh.read(count)
    if len(data) < count:
        raise FormatError(f"{path}: truncated payload ({len(data)} of {count} bytes)")
    return np.frombuffer(data, dtype=np.uint8).reshape((n,) + tuple(dims[1:]))


def write_idx(path, array, compress: bool = False):
    array = np.ascontiguousarray(array, dtype=np.uint8)
    header = struct.pack(">I", 0x0800 | array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    opener = gzip.open if compress else open
    with opener(path, "wb") as f:
        f.write(header)
        f.write(array.tobytes())


def mnist_arrays(images_path, labels_path, limit: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Images scaled to [0, 1] as ``(N, 28, 28)`` floats and integer labels."""
    _, idims = read_idx_header(images_path, IMAGE_MAGIC)
    _, ldims = read_idx_header(labels_path, LABEL_MAGIC)
    if idims[0] != ldims[0]:
        raise FormatError(f"{idims[0]} images but {ldims[0]} labels")
    images = read_idx(images_path, IMAGE_MAGIC, limit)
    labels = read_idx(labels_path, LABEL_MAGIC, limit)
    if images.ndim != 3:
        raise FormatError(f"{images_path}: expected 3-D image array, got {images.ndim}-D")
    return images.astype(np.float64) / 255.0, labels.astype(np.int64)


def mnist_load(images_path, labels_path, limit: int | None = None) -> list[PlanarImage]:
    images, labels = mnist_arrays(images_path, labels_path, limit)
    return [PlanarImage(im, lab) for im, lab in zip(images, labels)]
