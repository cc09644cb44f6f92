"""Spherical vector-field MNIST: digits and their gradients on the sphere.

The MNIST test set (10k) is used for training and the first 50k images of the
MNIST training set for testing. Every stored field is bandlimited at B by one
forward/inverse transform so that spectral rotations of stored data are exact.
"""
from __future__ import annotations

import colorsys
import os
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import FormatError
from ..harmonics import Rotation
from ..spectral import rotate_coeffs
from ..transform import SphericalGrid, SpinField, evaluate_field, get_plan
from . import blobio
from .mnist import IMAGE_MAGIC, LABEL_MAGIC, mnist_arrays, read_idx_header
from .sphere import project_scalar, project_vector, sobel_gradient

TASKS = ("classify-scalar", "classify-vector", "img2vec-easy", "img2vec-hard",
         "vec2img-easy", "vec2img-hard")
MODES = ("NR", "R")
SPLITS = ("train", "test")
SPLIT_IDS = {"train": 0, "test": 1}
TRAIN_SIZE = 10_000
TEST_SIZE = 50_000
N_CLASSES = 10


@dataclass
class DatasetConfig:
    task: str
    mnist_dir: str
    train_mode: str = "NR"
    test_mode: str = "NR"
    bandwidth: int = 32
    seed: int = 0
    limit: int | None = None
    batch: int = 256

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; choose from {TASKS}")
        for m in (self.train_mode, self.test_mode):
            if m not in MODES:
                raise ValueError(f"unknown mode {m!r}; choose from {MODES}")
        if self.bandwidth < 16 or self.bandwidth % 2:
            raise ValueError("bandwidth must be even and >= 16 to hold the projected digit")
        if self.limit is not None and self.limit < 1:
            raise ValueError("limit must be positive")

    def mode(self, split: str) -> str:
        return self.train_mode if split == "train" else self.test_mode


def mnist_paths(mnist_dir: str) -> dict:
    """Locate the four MNIST files, raw or gzipped, by their usual names."""
    stems = {
        "train_images": "train-images-idx3-ubyte", "train_labels": "train-labels-idx1-ubyte",
        "test_images": "t10k-images-idx3-ubyte", "test_labels": "t10k-labels-idx1-ubyte",
    }
    out = {}
    for key, stem in stems.items():
        for name in (stem, stem + ".gz", stem.replace("-idx", ".idx"), stem.replace("-idx", ".idx") + ".gz"):
            path = os.path.join(mnist_dir, name)
            if os.path.exists(path):
                out[key] = path
                break
        else:
            raise FileNotFoundError(f"no {stem}[.gz] in {mnist_dir}")
    return out


def plan_splits(mnist_dir: str, limit: int | None = None) -> dict:
    """Source file, and sample count for each split, read from the IDX headers only.

    The MNIST test file feeds the training split and the first 50k images of the
    MNIST training file feed the test split.
    """
    paths = mnist_paths(mnist_dir)
    plan = {}
    for split, prefix, cap in (("train", "test", TRAIN_SIZE), ("test", "train", TEST_SIZE)):
        _, idims = read_idx_header(paths[f"{prefix}_images"], IMAGE_MAGIC)
        _, ldims = read_idx_header(paths[f"{prefix}_labels"], LABEL_MAGIC)
        if idims[0] != ldims[0]:
            raise FormatError(f"{idims[0]} images but {ldims[0]} labels in the MNIST {prefix} files")
        n = min(cap, idims[0])
        if limit is not None:
            n = min(n, limit)
        plan[split] = {"source": f"mnist-{prefix}", "images": paths[f"{prefix}_images"],
                       "labels": paths[f"{prefix}_labels"], "count": n}
    return plan


def bandlimit_field(field: SpinField, g: Rotation | None = None) -> SpinField:
    """Forward/inverse transform at the field's bandwidth, rotating in between if ``g`` is given."""
    plan = get_plan(field.bandwidth)
    c = plan.forward(field.samples, field.spin)
    if g is not None:
        c = rotate_coeffs(c, g, plan.table)
    x = plan.inverse(c, field.spin)
    return SpinField(x.real, 0, real=True) if field.real else SpinField(x, field.spin)


def apply_random_rotation(fields: dict, g: Rotation) -> dict:
    """Rotate every field of one sample by the same ``g`` in coefficient space.

    ``fields`` maps names to :class:`SpinField`; returns ``x -> f(g x)`` for each.
    """
    return {k: bandlimit_field(f, g) for k, f in fields.items()}


def rotate_as_scalars(field: SpinField, g: Rotation) -> SpinField:
    """Move the sample values of a field to ``g x`` without turning the tangent frame.

    This is what rotating the real and imaginary parts as two independent scalars
    amounts to. The field is first bandlimited at its own spin and then evaluated
    exactly off-grid, so for spin != 0 the result differs from
    :func:`apply_random_rotation` only by a pointwise phase.
    """
    f = bandlimit_field(field)
    theta, phi = SphericalGrid(field.bandwidth).mesh()
    return SpinField(evaluate_field(f, *g.apply(theta, phi)), field.spin, real=field.real)


def hue_rgb(label: int) -> np.ndarray:
    return np.array(colorsys.hsv_to_rgb(label / N_CLASSES, 1.0, 1.0))


def make_targets_hard(sample, label: int, kind: str) -> np.ndarray:
    """Category-dependent dense targets.

    ``kind="vec2img"``: grayscale ``(..., 2B, 2B)`` -> RGB ``(..., 3, 2B, 2B)`` with
    value = gray clipped to [0, 1], saturation 1, hue ``label/10``.
    ``kind="img2vec"``: spin-1 samples multiplied by ``exp(2 pi i label / 10)``.
    """
    label = int(label)
    if not 0 <= label < N_CLASSES:
        raise ValueError(f"label {label} outside [0, {N_CLASSES})")
    x = sample.samples if isinstance(sample, SpinField) else np.asarray(sample)
    if kind == "vec2img":
        v = np.clip(np.real(x), 0.0, 1.0)
        return v[..., None, :, :] * hue_rgb(label)[:, None, None]
    if kind == "img2vec":
        return x * np.exp(2j * np.pi * label / N_CLASSES)
    raise ValueError(f"unknown target kind {kind!r}")


def sample_rotation(seed: int, split: str, index: int) -> Rotation:
    """Per-sample rotation from an independent seeded stream."""
    return Rotation.random(np.random.default_rng([int(seed), SPLIT_IDS[split], int(index)]))


def make_sample(pixels: np.ndarray, label: int, task: str, grid: SphericalGrid,
                g: Rotation | None = None) -> dict:
    """Input/target arrays for one digit, each ``(channels, 2B, 2B)``."""
    scalar = project_scalar(pixels, grid)
    fields = {"scalar": scalar}
    if not task.startswith("classify-scalar"):
        fields["vector"] = project_vector(sobel_gradient(pixels), grid)
    fields = apply_random_rotation(fields, g) if g is not None else {
        k: bandlimit_field(f) for k, f in fields.items()}
    s0 = fields["scalar"].samples[None]
    s1 = fields["vector"].samples[None] if "vector" in fields else None
    if task == "classify-scalar":
        return {"input": s0}
    if task == "classify-vector":
        return {"input": s1}
    if task == "img2vec-easy":
        return {"input": s0, "target": s1}
    if task == "img2vec-hard":
        return {"input": s0, "target": make_targets_hard(s1, label, "img2vec")}
    if task == "vec2img-easy":
        return {"input": s1, "target": np.clip(s0, 0.0, 1.0)}
    return {"input": s1, "target": make_targets_hard(s0[0], label, "vec2img")}


def task_layout(task: str) -> dict:
    """Spin and channel count of the stored input and target fields."""
    scalar, vector, rgb = (0, 1), (1, 1), (0, 3)
    return {
        "classify-scalar": {"input": scalar},
        "classify-vector": {"input": vector},
        "img2vec-easy": {"input": scalar, "target": vector},
        "img2vec-hard": {"input": scalar, "target": vector},
        "vec2img-easy": {"input": vector, "target": scalar},
        "vec2img-hard": {"input": vector, "target": rgb},
    }[task]


def dataset_generate(config: DatasetConfig, out_dir: str) -> dict:
    """Write the bundle (manifest, one blob file per split field, labels) and return the manifest."""
    plan = plan_splits(config.mnist_dir, config.limit)
    grid = SphericalGrid(config.bandwidth)
    layout = task_layout(config.task)
    writer = blobio.BundleWriter(out_dir)
    splits_meta = {}
    for split in SPLITS:
        info = plan[split]
        n = info["count"]
        images, labels = mnist_arrays(info["images"], info["labels"], limit=n)
        streams = {k: writer.stream(f"{split}/{k}", (c,) + grid.shape, spin != 0)
                   for k, (spin, c) in layout.items()}
        for start in range(0, n, config.batch):
            rows = []
            for i in range(start, min(n, start + config.batch)):
                g = sample_rotation(config.seed, split, i) if config.mode(split) == "R" else None
                rows.append(make_sample(images[i], labels[i], config.task, grid, g))
            for k, st in streams.items():
                st.append(np.stack([r[k] for r in rows]))
        for st in streams.values():
            st.close()
        writer.add(f"{split}/label", labels.astype(np.float32))
        splits_meta[split] = {"source": info["source"], "count": n, "mode": config.mode(split)}
    meta = {
        "kind": "dataset", "dataset": "svf-mnist", "task": config.task, "bandwidth": config.bandwidth,
        "seed": config.seed, "splits": splits_meta, "train_test_swapped": True,
        "layout": {k: {"spin": s, "channels": c} for k, (s, c) in layout.items()},
        "projection": {"kind": "gnomonic", "center": "north-pole", "cap_half_angle": "pi/4",
                       "sampling": "bilinear"},
        "config": {k: v for k, v in asdict(config).items() if k != "mnist_dir"},
    }
    return writer.close(meta)


def load_split(directory: str, split: str) -> dict:
    """Arrays of one split: ``input``, optional ``target``, and integer ``label``."""
    manifest = blobio.read_manifest(directory)
    descs = blobio.blob_descriptors(manifest)
    out = {}
    for name, d in descs.items():
        s, _, field_name = name.partition("/")
        if s == split:
            out[field_name] = blobio.read_blob(directory, d)
    if not out:
        raise FormatError(f"bundle has no split {split!r}")
    if "label" in out:
        out["label"] = out["label"].astype(np.int64)
    return out
