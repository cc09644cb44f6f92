"""MNIST ingestion, spherical projection, SVF-MNIST generation and bundle I/O."""
from .blobio import BundleWriter, read_bundle, read_manifest, verify_bundle, write_bundle
from .mnist import PlanarImage, mnist_arrays, mnist_load, read_idx, write_idx
from .sphere import (TangentFrame, project_scalar, project_to_sphere, project_vector, sobel_gradient,
                     tangent_frame)
from .svfmnist import (TASKS, DatasetConfig, apply_random_rotation, dataset_generate, load_split,
                       make_targets_hard, plan_splits, rotate_as_scalars)

__all__ = [
    "BundleWriter", "read_bundle", "read_manifest", "verify_bundle", "write_bundle",
    "PlanarImage", "mnist_arrays", "mnist_load", "read_idx", "write_idx",
    "TangentFrame", "project_scalar", "project_to_sphere", "project_vector", "sobel_gradient", "tangent_frame",
    "TASKS", "DatasetConfig", "apply_random_rotation", "dataset_generate", "load_split", "make_targets_hard",
    "plan_splits", "rotate_as_scalars",
]
