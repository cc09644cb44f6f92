"""Manifest + raw blob container for datasets, coefficients and weights.

A bundle is a directory holding ``manifest.json`` and one or more ``*.bin``
files of little-endian numbers, each listed with its SHA-256. Complex arrays
are stored as real numbers: for arrays with 3 or more axes the real channels
come first and the imaginary channels after them along axis ``-3``; smaller
arrays get a leading axis of 2.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import FormatError

MANIFEST = "manifest.json"
FORMAT = "spinconv-bundle"
VERSION = 1
DTYPES = ("<f4", "<f8", "<i4")


@dataclass
class BlobDescriptor:
    name: str
    shape: list
    dtype: str
    file: str
    offset: int
    nbytes: int
    complex: bool = False

    @property
    def stored_shape(self) -> tuple:
        return stored_shape(self.shape, self.complex)


def stored_shape(shape, is_complex: bool) -> tuple:
    shape = tuple(int(n) for n in shape)
    if not is_complex:
        return shape
    if len(shape) >= 3:
        k = len(shape) - 3
        return shape[:k] + (2 * shape[k],) + shape[k + 1:]
    return (2,) + shape


def to_stored(a: np.ndarray, dtype: str) -> np.ndarray:
    a = np.asarray(a)
    if np.iscomplexobj(a):
        if a.ndim >= 3:
            a = np.concatenate([a.real, a.imag], axis=-3)
        else:
            a = np.stack([a.real, a.imag])
    return np.ascontiguousarray(a, dtype=np.dtype(dtype))


def from_stored(a: np.ndarray, shape, is_complex: bool) -> np.ndarray:
    if not is_complex:
        return a.reshape(shape)
    if len(shape) >= 3:
        c = shape[-3]
        re, im = a[..., :c, :, :], a[..., c:, :, :]
    else:
        re, im = a[0], a[1]
    return (re + 1j * im).reshape(shape)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class BlobStream:
    """Append batches along axis 0 of one array stored in its own blob file."""

    def __init__(self, writer, name, sample_shape, is_complex, dtype, file):
        self.writer = writer
        self.name = name
        self.sample_shape = tuple(sample_shape)
        self.is_complex = is_complex
        self.dtype = dtype
        self.file = file
        self.count = 0
        self.nbytes = 0
        self._fh = open(os.path.join(writer.directory, file), "wb")

    @property
    def closed(self) -> bool:
        return self._fh is None

    def append(self, batch):
        if self.closed:
            raise FormatError(f"stream {self.name!r} is closed")
        batch = np.asarray(batch)
        if batch.shape[1:] != self.sample_shape:
            raise FormatError(f"batch shape {batch.shape[1:]} != sample shape {self.sample_shape}")
        data = to_stored(batch, self.dtype).tobytes()
        self._fh.write(data)
        self.nbytes += len(data)
        self.count += batch.shape[0]

    def close(self):
        if self.closed:
            return
        self._fh.close()
        self._fh = None
        self.writer._register(BlobDescriptor(self.name, [self.count, *self.sample_shape], self.dtype,
                                             self.file, 0, self.nbytes, bool(self.is_complex)))


class BundleWriter:
    """Single writer producing a bundle directory.

    Arrays given to :meth:`add` go contiguously into ``data.bin``; each stream
    gets a blob file of its own so several may be filled side by side.
    """

    def __init__(self, directory: str, blob_file: str = "data.bin"):
        self.directory = directory
        self.blob_file = blob_file
        os.makedirs(directory, exist_ok=True)
        self._fh = open(os.path.join(directory, blob_file), "wb")
        self._pos = 0
        self._blobs: list[BlobDescriptor] = []
        self._streams: list[BlobStream] = []

    def _register(self, desc: BlobDescriptor):
        if any(b.name == desc.name for b in self._blobs):
            raise FormatError(f"duplicate blob name {desc.name!r}")
        self._blobs.append(desc)

    def add(self, name: str, array, dtype: str = "<f4"):
        if dtype not in DTYPES:
            raise FormatError(f"unsupported dtype {dtype}")
        array = np.asarray(array)
        data = to_stored(array, dtype).tobytes()
        self._fh.write(data)
        self._register(BlobDescriptor(name, list(array.shape), dtype, self.blob_file, self._pos,
                                      len(data), bool(np.iscomplexobj(array))))
        self._pos += len(data)

    def stream(self, name: str, sample_shape, is_complex: bool, dtype: str = "<f4") -> BlobStream:
        if dtype not in DTYPES:
            raise FormatError(f"unsupported dtype {dtype}")
        file = name.replace("/", "_") + ".bin"
        if file == self.blob_file or any(s.file == file for s in self._streams):
            raise FormatError(f"stream file {file!r} already in use")
        st = BlobStream(self, name, sample_shape, is_complex, dtype, file)
        self._streams.append(st)
        return st

    def close(self, meta: dict | None = None) -> dict:
        for st in self._streams:
            st.close()
        self._fh.close()
        manifest = {"format": FORMAT, "version": VERSION, **(meta or {})}
        manifest["blobs"] = [asdict(b) for b in self._blobs]
        files = sorted({self.blob_file} | {s.file for s in self._streams})
        manifest["files"] = {f: _sha256(os.path.join(self.directory, f)) for f in files}
        with open(os.path.join(self.directory, MANIFEST), "w") as f:
            json.dump(manifest, f, indent=1, sort_keys=True)
            f.write("\n")
        return manifest


def write_bundle(directory: str, arrays: dict, meta: dict | None = None, dtype: str = "<f4") -> dict:
    w = BundleWriter(directory)
    for name, a in arrays.items():
        w.add(name, a, dtype)
    return w.close(meta)


def read_manifest(directory: str) -> dict:
    path = os.path.join(directory, MANIFEST)
    try:
        with open(path) as f:
            manifest = json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"manifest is not valid JSON: {e}") from None
    if not isinstance(manifest, dict) or manifest.get("format") != FORMAT:
        raise FormatError(f"{path} is not a {FORMAT} manifest")
    if manifest.get("version") != VERSION:
        raise FormatError(f"unsupported manifest version {manifest.get('version')}")
    if not isinstance(manifest.get("blobs"), list):
        raise FormatError("manifest has no blob list")
    names = set()
    for d in manifest["blobs"]:
        try:
            b = BlobDescriptor(**d)
        except TypeError as e:
            raise FormatError(f"bad blob descriptor {d}: {e}") from None
        if b.name in names:
            raise FormatError(f"duplicate blob name {b.name!r}")
        names.add(b.name)
        if b.dtype not in DTYPES:
            raise FormatError(f"blob {b.name!r} has unsupported dtype {b.dtype}")
        expected = int(np.prod(b.stored_shape)) * np.dtype(b.dtype).itemsize
        if b.nbytes != expected or b.offset < 0:
            raise FormatError(f"blob {b.name!r}: {b.nbytes} bytes inconsistent with shape {b.shape}")
    return manifest


def blob_descriptors(manifest: dict) -> dict:
    return {d["name"]: BlobDescriptor(**d) for d in manifest["blobs"]}


def read_blob(directory: str, desc: BlobDescriptor, mmap: bool = False) -> np.ndarray:
    path = os.path.join(directory, desc.file)
    size = os.path.getsize(path)
    if desc.offset + desc.nbytes > size:
        raise FormatError(f"blob {desc.name!r} runs past the end of {desc.file}")
    shape = desc.stored_shape
    if mmap:
        raw = np.memmap(path, dtype=desc.dtype, mode="r", offset=desc.offset, shape=shape)
    else:
        with open(path, "rb") as f:
            f.seek(desc.offset)
            raw = np.frombuffer(f.read(desc.nbytes), dtype=desc.dtype).reshape(shape)
    return from_stored(raw, tuple(desc.shape), desc.complex)


def read_bundle(directory: str, names=None) -> tuple[dict, dict]:
    manifest = read_manifest(directory)
    descs = blob_descriptors(manifest)
    if names is None:
        names = list(descs)
    missing = [n for n in names if n not in descs]
    if missing:
        raise FormatError(f"bundle has no blobs named {missing}")
    return manifest, {n: read_blob(directory, descs[n]) for n in names}


def verify_bundle(directory: str) -> dict:
    """Check every listed file against its recorded SHA-256; returns the manifest."""
    manifest = read_manifest(directory)
    for fname, digest in manifest.get("files", {}).items():
        path = os.path.join(directory, fname)
        if not os.path.exists(path):
            raise FormatError(f"bundle file {fname} is missing")
        if _sha256(path) != digest:
            raise FormatError(f"bundle file {fname} does not match its checksum")
    return manifest


def manifest_hash(manifest: dict) -> str:
    return hashlib.sha256(json.dumps(manifest, sort_keys=True).encode()).hexdigest()
