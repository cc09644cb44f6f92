"""Planar images and gradient fields mapped onto the sphere.

The image plane touches the north pole; a plane point ``(x, y)`` corresponds to
the sphere point with ``tan(theta) = |(x, y)|`` and azimuth ``atan2(y, x)``
(gnomonic projection). The 28x28 image covers ``[-1, 1]^2`` so the digit lands
in a cap of half-angle pi/4 around the pole.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..transform import SphericalGrid, SpinField

CAP_HALF_ANGLE = np.pi / 4
IMAGE_SIZE = 28
PIXELS_PER_UNIT = IMAGE_SIZE / 2.0


def sobel_gradient(img) -> np.ndarray:
    """``(28, 28, 2)`` gradient ``(g_x, g_y)`` with x to the right and y up, per pixel.

    3x3 Sobel kernels normalized by 1/8, border pixels replicated.
    """
    pixels = getattr(img, "pixels", img)
    pixels = np.asarray(pixels, dtype=float)
    gx = ndimage.sobel(pixels, axis=1, mode="nearest") / 8.0
    gy = -ndimage.sobel(pixels, axis=0, mode="nearest") / 8.0
    return np.stack([gx, gy], axis=-1)


def plane_coordinates(grid: SphericalGrid):
    """Plane position of each grid point and the mask of points inside the cap."""
    theta, phi = grid.mesh()
    inside = theta < CAP_HALF_ANGLE
    rho = np.where(inside, np.tan(np.minimum(theta, CAP_HALF_ANGLE)), 0.0)
    return rho * np.cos(phi), rho * np.sin(phi), inside


def _sample(plane_values, x, y):
    cols = PIXELS_PER_UNIT * x + (IMAGE_SIZE - 1) / 2
    rows = (IMAGE_SIZE - 1) / 2 - PIXELS_PER_UNIT * y
    return ndimage.map_coordinates(plane_values, [rows, cols], order=1, mode="constant", cval=0.0)


def project_scalar(img, grid: SphericalGrid) -> SpinField:
    """Bilinear gnomonic projection of an image; exactly zero outside the cap."""
    pixels = np.asarray(getattr(img, "pixels", img), dtype=float)
    x, y, inside = plane_coordinates(grid)
    out = np.where(inside, _sample(pixels, x, y), 0.0)
    return SpinField(out, 0, real=True)


@dataclass(frozen=True)
class TangentFrame:
    """Per grid point unit vectors ``e_theta`` and ``e_phi`` as ``(2B, 2B, 3)`` arrays."""

    e_theta: np.ndarray
    e_phi: np.ndarray

    def encode(self, v) -> np.ndarray:
        """Ambient tangent vectors ``(..., 2B, 2B, 3)`` to ``v_theta + i v_phi``."""
        v = np.asarray(v)
        return np.sum(v * self.e_theta, axis=-1) + 1j * np.sum(v * self.e_phi, axis=-1)

    def decode(self, z) -> np.ndarray:
        z = np.asarray(z)
        return z.real[..., None] * self.e_theta + z.imag[..., None] * self.e_phi


def tangent_frame(grid: SphericalGrid) -> TangentFrame:
    theta, phi = grid.mesh()
    e_theta = np.stack([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), -np.sin(theta)], -1)
    e_phi = np.stack([-np.sin(phi), np.cos(phi), np.zeros_like(phi)], -1)
    return TangentFrame(e_theta, e_phi)


def project_vector(field, grid: SphericalGrid) -> SpinField:
    """Push a planar vector field ``(28, 28, 2)`` onto the sphere as a spin-1 field.

    Radial plane components scale by ``d theta / d rho = cos^2 theta``, tangential
    ones by ``sin theta / rho = cos theta``.
    """
    field = np.asarray(field, dtype=float)
    x, y, inside = plane_coordinates(grid)
    vx = _sample(field[..., 0], x, y)
    vy = _sample(field[..., 1], x, y)
    theta, phi = grid.mesh()
    v_rho = vx * np.cos(phi) + vy * np.sin(phi)
    v_t = -vx * np.sin(phi) + vy * np.cos(phi)
    c = np.cos(theta)
    z = np.where(inside, v_rho * c * c + 1j * v_t * c, 0.0)
    return SpinField(z, 1)


def project_to_sphere(obj, grid: SphericalGrid) -> SpinField:
    """Scalar image ``(28, 28)`` -> spin 0; planar vector field ``(28, 28, 2)`` -> spin 1."""
    arr = np.asarray(getattr(obj, "pixels", obj))
    if arr.shape == (IMAGE_SIZE, IMAGE_SIZE):
        return project_scalar(arr, grid)
    if arr.shape == (IMAGE_SIZE, IMAGE_SIZE, 2):
        return project_vector(arr, grid)
    raise ValueError(f"expected a 28x28 image or 28x28x2 field, got shape {arr.shape}")
