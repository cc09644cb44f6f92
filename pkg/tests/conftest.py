import os

import numpy as np
import pytest

from spinconv import backend
from spinconv.data.mnist import write_idx


def synthetic_digits(n, seed):
    """Stroke-like 28x28 uint8 images: a few thick random line segments each."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:28, 0:28]
    out = np.zeros((n, 28, 28), dtype=np.uint8)
    for i in range(n):
        img = np.zeros((28, 28))
        for _ in range(rng.integers(2, 4)):
            p, q = rng.uniform(6, 22, 2), rng.uniform(6, 22, 2)
            t = np.clip(((xx - p[0]) * (q[0] - p[0]) + (yy - p[1]) * (q[1] - p[1]))
                        / max(np.sum((q - p) ** 2), 1e-9), 0, 1)
            d2 = (xx - p[0] - t * (q[0] - p[0])) ** 2 + (yy - p[1] - t * (q[1] - p[1])) ** 2
            img = np.maximum(img, np.exp(-d2 / 2.0))
        out[i] = np.round(255 * img).astype(np.uint8)
    return out


def write_mnist(directory, n_train, n_test, seed=0, compress=False):
    """Four MNIST-named IDX files with synthetic content."""
    os.makedirs(directory, exist_ok=True)
    rng = np.random.default_rng(seed + 1)
    suffix = ".gz" if compress else ""
    for stem, n, s in (("train", n_train, seed), ("t10k", n_test, seed + 7)):
        write_idx(os.path.join(directory, f"{stem}-images-idx3-ubyte{suffix}"), synthetic_digits(n, s), compress)
        write_idx(os.path.join(directory, f"{stem}-labels-idx1-ubyte{suffix}"),
                  rng.integers(0, 10, n).astype(np.uint8), compress)
    return directory


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def mnist_dir(tmp_path_factory):
    return write_mnist(str(tmp_path_factory.mktemp("mnist")), n_train=12, n_test=8)


@pytest.fixture(params=backend.available())
def each_backend(request):
    prev = backend.use(request.param)
    yield request.param
    backend.use(prev)
