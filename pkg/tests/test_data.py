import colorsys
import gzip
import os
import shutil
import struct

import numpy as np
import pytest

from conftest import synthetic_digits, write_mnist
from spinconv.errors import FormatError
from spinconv.harmonics import Rotation
from spinconv.spectral import rotate_coeffs
from spinconv.transform import SpinField, SphericalGrid, get_plan, quadrature_weights, random_coeffs
from spinconv.data import blobio
from spinconv.data.mnist import (IMAGE_MAGIC, LABEL_MAGIC, PlanarImage, mnist_arrays, mnist_load, read_idx,
                                 read_idx_header, write_idx)
from spinconv.data.sphere import (CAP_HALF_ANGLE, plane_coordinates, project_scalar, project_to_sphere,
                                  project_vector, sobel_gradient, tangent_frame)
from spinconv.data.svfmnist import (TASKS, DatasetConfig, apply_random_rotation, bandlimit_field, dataset_generate,
                                    hue_rgb, load_split, make_targets_hard, plan_splits, rotate_as_scalars,
                                    sample_rotation)

GRID = SphericalGrid(32)


def digit(seed=0):
    return synthetic_digits(1, seed)[0] / 255.0


# ---- IDX / MNIST ----

def test_idx_round_trip_raw_and_gzip(tmp_path):
    a = synthetic_digits(5, 1)
    write_idx(tmp_path / "raw", a)
    write_idx(tmp_path / "gz", a, compress=True)
    np.testing.assert_array_equal(read_idx(tmp_path / "raw", IMAGE_MAGIC), a)
    np.testing.assert_array_equal(read_idx(tmp_path / "gz", IMAGE_MAGIC), a)
    np.testing.assert_array_equal(read_idx(tmp_path / "gz", IMAGE_MAGIC, limit=2), a[:2])
    with open(tmp_path / "raw", "rb") as f:
        assert f.read(4) == b"\x00\x00\x08\x03"


def test_idx_header_reports_standard_train_shape(tmp_path):
    path = tmp_path / "train-images-idx3-ubyte"
    path.write_bytes(struct.pack(">IIII", IMAGE_MAGIC, 60000, 28, 28))
    assert read_idx_header(path, IMAGE_MAGIC) == (IMAGE_MAGIC, (60000, 28, 28))
    with pytest.raises(FormatError, match="truncated"):
        read_idx(path, IMAGE_MAGIC)


def test_idx_errors(tmp_path):
    write_idx(tmp_path / "labels", np.arange(4, dtype=np.uint8))
    with pytest.raises(FormatError, match="magic"):
        read_idx(tmp_path / "labels", IMAGE_MAGIC)
    (tmp_path / "short").write_bytes(b"\x00\x00")
    with pytest.raises(FormatError):
        read_idx(tmp_path / "short")
    (tmp_path / "floats").write_bytes(struct.pack(">II", 0x0D01, 1) + b"\x00" * 4)
    with pytest.raises(FormatError):
        read_idx(tmp_path / "floats")


def test_mnist_load(tmp_path):
    write_idx(tmp_path / "i.gz", synthetic_digits(3, 2), compress=True)
    write_idx(tmp_path / "l", np.array([7, 0, 3], dtype=np.uint8))
    images = mnist_load(tmp_path / "i.gz", tmp_path / "l")
    assert [im.label for im in images] == [7, 0, 3]
    assert all(im.pixels.shape == (28, 28) and 0 <= im.pixels.min() and im.pixels.max() <= 1 for im in images)
    write_idx(tmp_path / "l2", np.array([1, 2], dtype=np.uint8))
    with pytest.raises(FormatError, match="labels"):
        mnist_arrays(tmp_path / "i.gz", tmp_path / "l2")


def test_planar_image_clamps():
    im = PlanarImage(np.full((28, 28), 1.5), 3.0)
    assert im.pixels.max() == 1.0 and im.label == 3


# ---- Sobel ----

def test_sobel_examples():
    np.testing.assert_array_equal(sobel_gradient(np.full((28, 28), 0.3)), 0)
    ramp = np.tile(np.arange(28) / 27, (28, 1))
    g = sobel_gradient(ramp)
    np.testing.assert_allclose(g[1:-1, 1:-1, 0], 1 / 27, atol=1e-15)
    np.testing.assert_allclose(g[1:-1, 1:-1, 1], 0, atol=1e-15)
    up = np.tile((27 - np.arange(28))[:, None] / 27, (1, 28))
    np.testing.assert_allclose(sobel_gradient(up)[1:-1, 1:-1, 1], 1 / 27, atol=1e-15)


def test_sobel_rotation_covariance():
    img = digit(3)
    g = sobel_gradient(img)
    gr = sobel_gradient(np.rot90(img))
    rotated = np.stack([-np.rot90(g[..., 1]), np.rot90(g[..., 0])], -1)
    np.testing.assert_allclose(gr[1:-1, 1:-1], rotated[1:-1, 1:-1], atol=1e-15)


# ---- projection and frames ----

def test_projection_basics():
    assert np.all(project_scalar(np.zeros((28, 28)), GRID).samples == 0)
    img = digit(4)
    f = project_to_sphere(PlanarImage(img, 1), GRID)
    assert f.spin == 0 and f.real
    assert 0 <= f.samples.min() and f.samples.max() <= img.max()
    _, _, inside = plane_coordinates(GRID)
    theta, _ = GRID.mesh()
    assert np.all(inside == (theta < CAP_HALF_ANGLE))
    assert np.all(f.samples[~inside] == 0)
    mass = quadrature_weights(32).integrate(f.samples)
    assert np.isfinite(mass) and mass > 0
    v = project_to_sphere(sobel_gradient(img), GRID)
    assert v.spin == 1 and np.all(v.samples[~inside] == 0)
    with pytest.raises(ValueError):
        project_to_sphere(np.zeros((5, 5)), GRID)


def test_projection_center_pixel_lands_near_pole():
    img = np.zeros((28, 28))
    img[13:15, 13:15] = 1.0
    f = project_scalar(img, GRID).samples
    theta, _ = GRID.mesh()
    assert f[theta < 0.05].min() > 0.9 and f[theta > 0.2].max() == 0


def test_tangent_frame():
    fr = tangent_frame(GRID)
    for a, b, val in ((fr.e_theta, fr.e_theta, 1), (fr.e_phi, fr.e_phi, 1), (fr.e_theta, fr.e_phi, 0)):
        np.testing.assert_allclose(np.sum(a * b, -1), val, atol=1e-15)
    theta, phi = GRID.mesh()
    normal = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], -1)
    np.testing.assert_allclose(np.sum(fr.e_theta * normal, -1), 0, atol=1e-15)
    rng = np.random.default_rng(0)
    z = rng.standard_normal(theta.shape) + 1j * rng.standard_normal(theta.shape)
    np.testing.assert_allclose(fr.encode(fr.decode(z)), z, atol=1e-15)
    v = fr.decode(z)
    np.testing.assert_allclose(fr.decode(fr.encode(v)), v, atol=1e-15)


def test_vector_projection_is_tangent_pushforward():
    g = np.zeros((28, 28, 2))
    g[..., 0] = 1.0
    z = project_vector(g, GRID).samples
    theta, phi = GRID.mesh()
    near = theta < 0.3
    c = np.cos(theta)
    np.testing.assert_allclose(z[near], (np.cos(phi) * c * c - 1j * np.sin(phi) * c)[near], atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_planar_rotation_is_grid_phi_shift(k):
    img = digit(5)
    steps = k * GRID.n_phi // 4
    s0 = project_scalar(img, GRID).samples
    s0r = project_scalar(np.rot90(img, k), GRID).samples
    np.testing.assert_allclose(s0r, np.roll(s0, steps, -1), atol=1e-12)
    s1 = project_vector(sobel_gradient(img), GRID).samples
    s1r = project_vector(sobel_gradient(np.rot90(img, k)), GRID).samples
    np.testing.assert_allclose(s1r, np.roll(s1, steps, -1), atol=1e-12)
    plan = get_plan(32)
    c = rotate_coeffs(plan.forward(s1, 1), Rotation(-k * np.pi / 2, 0, 0))
    np.testing.assert_allclose(plan.forward(s1r, 1), c, atol=1e-5 * np.abs(c).max())


# ---- targets ----

def test_hard_targets():
    x = np.random.default_rng(1).uniform(0, 1, (8, 8))
    rgb = make_targets_hard(x, 0, "vec2img")
    np.testing.assert_allclose(rgb, x[None] * np.array([1, 0, 0])[:, None, None])
    for c in range(10):
        hsv = np.array([colorsys.rgb_to_hsv(*px) for px in make_targets_hard(x, c, "vec2img").reshape(3, -1).T])
        np.testing.assert_allclose(hsv[:, 0], c / 10, atol=1e-12)
        np.testing.assert_allclose(hsv[:, 2], x.ravel(), atol=1e-12)
    assert np.all(make_targets_hard(np.zeros((4, 4)), 7, "vec2img") == 0)
    z = np.exp(1j * np.arange(16.0)).reshape(4, 4)
    np.testing.assert_array_equal(make_targets_hard(z, 0, "img2vec"), z)
    np.testing.assert_allclose(make_targets_hard(SpinField(z, 1), 5, "img2vec"), -z, atol=1e-15)
    with pytest.raises(ValueError):
        make_targets_hard(z, 10, "img2vec")
    with pytest.raises(ValueError):
        make_targets_hard(z, 1, "other")
    np.testing.assert_allclose(hue_rgb(5), colorsys.hsv_to_rgb(0.5, 1, 1))


# ---- rotations ----

def test_rotation_of_sample_fields():
    B = 16
    rng = np.random.default_rng(2)
    plan = get_plan(B)
    s0 = SpinField(plan.inverse(random_coeffs(rng, B, 0), 0).real, 0, real=True)
    s1 = SpinField(plan.inverse(random_coeffs(rng, B, 1), 1), 1)
    same = apply_random_rotation({"a": s0, "b": s1}, Rotation())
    np.testing.assert_allclose(same["a"].samples, s0.samples, atol=1e-12)
    np.testing.assert_allclose(same["b"].samples, s1.samples, atol=1e-12)
    g = Rotation.random(rng)
    there = apply_random_rotation({"a": s0, "b": s1}, g)
    back = apply_random_rotation(there, g.inverse())
    assert np.abs(back["a"].samples - s0.samples).max() <= 1e-6
    assert np.abs(back["b"].samples - s1.samples).max() <= 1e-6
    assert there["a"].real and there["b"].spin == 1


def test_rotating_vector_field_as_scalars_is_wrong():
    """Moving values without turning the frame keeps magnitudes but gets the phase wrong."""
    f = bandlimit_field(project_vector(sobel_gradient(digit(6)), GRID))
    g = Rotation(0.3, 1.0, -0.8)
    proper = apply_random_rotation({"v": f}, g)["v"].samples
    naive = rotate_as_scalars(f, g).samples
    assert np.linalg.norm(proper - naive) / np.linalg.norm(proper) > 0.1
    np.testing.assert_allclose(np.abs(naive), np.abs(proper), atol=1e-10 * np.abs(proper).max())
    np.testing.assert_allclose(rotate_as_scalars(f, Rotation()).samples, f.samples, atol=1e-12)
    # about the pole the frame turns with the field, so nothing is lost
    z = Rotation(0.77, 0, 0)
    np.testing.assert_allclose(rotate_as_scalars(f, z).samples, apply_random_rotation({"v": f}, z)["v"].samples,
                               atol=1e-10 * np.abs(proper).max())


def test_rotating_scalars_as_scalars_is_exact():
    f = bandlimit_field(project_scalar(digit(2), GRID))
    g = Rotation(1.2, 0.7, 0.1)
    np.testing.assert_allclose(rotate_as_scalars(f, g).samples, apply_random_rotation({"x": f}, g)["x"].samples,
                               atol=1e-10)


def test_sample_rotation_stream():
    a = sample_rotation(0, "train", 3)
    assert a == sample_rotation(0, "train", 3)
    assert a != sample_rotation(0, "train", 4)
    assert a != sample_rotation(0, "test", 3)
    assert a != sample_rotation(1, "train", 3)


# ---- generation ----

def test_plan_splits_swaps_and_caps(tmp_path):
    d = tmp_path / "m"
    d.mkdir()
    for stem, n in (("train", 60000), ("t10k", 10000)):
        (d / f"{stem}-images-idx3-ubyte").write_bytes(struct.pack(">IIII", IMAGE_MAGIC, n, 28, 28))
        with gzip.open(d / f"{stem}-labels-idx1-ubyte.gz", "wb") as f:
            f.write(struct.pack(">II", LABEL_MAGIC, n))
    plan = plan_splits(str(d))
    assert plan["train"]["count"] == 10_000 and plan["train"]["source"] == "mnist-test"
    assert plan["test"]["count"] == 50_000 and plan["test"]["source"] == "mnist-train"
    assert plan_splits(str(d), limit=7)["test"]["count"] == 7


def test_plan_splits_missing_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        plan_splits(str(tmp_path))


def test_config_validation(mnist_dir):
    with pytest.raises(ValueError):
        DatasetConfig("classify", mnist_dir)
    with pytest.raises(ValueError):
        DatasetConfig("classify-scalar", mnist_dir, train_mode="X")
    with pytest.raises(ValueError):
        DatasetConfig("classify-scalar", mnist_dir, bandwidth=8)


@pytest.mark.parametrize("task", TASKS)
def test_generate_every_task(task, mnist_dir, tmp_path):
    m = dataset_generate(DatasetConfig(task, mnist_dir, "NR", "R", limit=3, seed=4), str(tmp_path / "ds"))
    assert m["splits"]["train"]["count"] == 3 and m["splits"]["test"]["mode"] == "R"
    assert m["train_test_swapped"] is True
    blobio.verify_bundle(str(tmp_path / "ds"))
    data = load_split(str(tmp_path / "ds"), "train")
    assert data["input"].shape[0] == 3 and data["label"].dtype == np.int64
    spin_in = m["layout"]["input"]["spin"]
    assert np.iscomplexobj(data["input"]) == (spin_in != 0)
    if "target" in m["layout"]:
        assert data["target"].shape[1] == m["layout"]["target"]["channels"]
    with pytest.raises(FormatError):
        load_split(str(tmp_path / "ds"), "valid")


def test_generation_deterministic(mnist_dir, tmp_path):
    cfg = DatasetConfig("classify-vector", mnist_dir, "R", "R", limit=4, seed=9)
    m1 = dataset_generate(cfg, str(tmp_path / "a"))
    m2 = dataset_generate(cfg, str(tmp_path / "b"))
    assert blobio.manifest_hash(m1) == blobio.manifest_hash(m2)
    for f in m1["files"]:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    m3 = dataset_generate(DatasetConfig("classify-vector", mnist_dir, "R", "R", limit=4, seed=10), str(tmp_path / "c"))
    assert m3["files"] != m1["files"]


def test_rotated_split_matches_per_sample_rotation(mnist_dir, tmp_path):
    dataset_generate(DatasetConfig("classify-scalar", mnist_dir, limit=3), str(tmp_path / "nr"))
    nr = load_split(str(tmp_path / "nr"), "train")
    dataset_generate(DatasetConfig("classify-scalar", mnist_dir, "R", "R", limit=3, seed=2), str(tmp_path / "r"))
    r = load_split(str(tmp_path / "r"), "train")
    for i in range(3):
        g = sample_rotation(2, "train", i)
        expected = bandlimit_field(SpinField(nr["input"][i, 0].astype(float), 0, real=True), g).samples
        assert np.abs(r["input"][i, 0] - expected).max() <= 1e-5
    assert not np.allclose(r["input"][0], r["input"][1])


def test_hard_variants_follow_formulas(mnist_dir, tmp_path):
    for task in ("img2vec-easy", "img2vec-hard", "vec2img-easy", "vec2img-hard"):
        dataset_generate(DatasetConfig(task, mnist_dir, limit=4, seed=1), str(tmp_path / task))
    e, h = load_split(str(tmp_path / "img2vec-easy"), "test"), load_split(str(tmp_path / "img2vec-hard"), "test")
    for i, c in enumerate(h["label"]):
        np.testing.assert_allclose(h["target"][i], e["target"][i] * np.exp(2j * np.pi * c / 10), atol=1e-6)
    e, h = load_split(str(tmp_path / "vec2img-easy"), "test"), load_split(str(tmp_path / "vec2img-hard"), "test")
    for i, c in enumerate(h["label"]):
        np.testing.assert_allclose(h["target"][i], e["target"][i] * hue_rgb(c)[:, None, None], atol=1e-6)


def test_generation_io_errors(tmp_path):
    d = write_mnist(str(tmp_path / "m"), 3, 3)
    os.remove(os.path.join(d, "t10k-labels-idx1-ubyte"))
    with pytest.raises(FileNotFoundError):
        dataset_generate(DatasetConfig("classify-scalar", d), str(tmp_path / "out"))
    d2 = write_mnist(str(tmp_path / "m2"), 3, 3)
    write_idx(os.path.join(d2, "t10k-labels-idx1-ubyte"), np.zeros(2, np.uint8))
    with pytest.raises(FormatError):
        dataset_generate(DatasetConfig("classify-scalar", d2), str(tmp_path / "out2"))
    shutil.rmtree(d)
