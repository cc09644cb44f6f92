"""Forward and inverse spin-weighted spherical harmonic transforms on the equiangular grid.

Samples live on ``theta_j = pi (j + 1/2) / 2B`` and ``phi_k = 2 pi k / 2B``,
``0 <= j, k < 2B``; coefficients are stored as ``(..., B, 2B - 1)`` arrays indexed
``[l, m + B - 1]`` with zeros where ``|m| > l`` or ``l < |s|``.

The forward transform extends each azimuthal mode to the full theta circle,
integrates against analytic ``sin(theta)`` weights with one FFT, and contracts the
result with precomputed ``Delta`` products. The total cost is O(B^3) per channel.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import backend, fft
from .errors import BandwidthMismatchError, SpinSetError
from .harmonics import DeltaTable, _i_power, shared_delta_table


@dataclass(frozen=True)
class SphericalGrid:
    bandwidth: int

    def __post_init__(self):
        if int(self.bandwidth) < 1:
            raise ValueError("bandwidth must be >= 1")

    @property
    def n_theta(self) -> int:
        return 2 * self.bandwidth

    @property
    def n_phi(self) -> int:
        return 2 * self.bandwidth

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_phi)

    @property
    def theta(self) -> np.ndarray:
        return np.pi * (np.arange(self.n_theta) + 0.5) / self.n_theta

    @property
    def phi(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_phi) / self.n_phi

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.theta, self.phi, indexing="ij")


def weight_hat(p) -> np.ndarray:
    """Closed form of ``int_0^pi exp(i p theta) sin(theta) dtheta`` for integer p."""
    p = np.asarray(p)
    out = np.zeros(p.shape, dtype=np.complex128)
    even = p % 2 == 0
    out[even] = 2.0 / (1.0 - p[even].astype(float) ** 2)
    out[p == 1] = 0.5j * np.pi
    out[p == -1] = -0.5j * np.pi
    return out


@dataclass(frozen=True, eq=False)
class QuadratureWeights:
    """Analytic theta weights for a bandwidth.

    ``spectral[p + 2B]`` is ``w_hat(p)`` for ``|p| <= 2B``; ``torus`` is the
    real weight function sampled on the 4B-point extended theta circle; ``ring``
    is the per-ring sphere quadrature (it includes the ``2 pi / 2B`` azimuthal
    step) that integrates any product of two bandlimited fields exactly.
    """

    bandwidth: int
    frequencies: np.ndarray
    spectral: np.ndarray
    torus: np.ndarray
    ring: np.ndarray

    def integrate(self, samples) -> np.ndarray:
        """Sphere integral of a sampled function, reduced over the last two axes."""
        samples = np.asarray(samples)
        return np.einsum("...jk,j->...", samples, self.ring)

    def mean(self, samples) -> np.ndarray:
        return self.integrate(samples) / (4 * np.pi)


def quadrature_weights(bandwidth: int) -> QuadratureWeights:
    B = int(bandwidth)
    N = 4 * B
    freqs = np.arange(-2 * B, 2 * B + 1)
    spectral = weight_hat(freqs)
    # w(theta) = sum_q w_hat(-q) exp(i q theta) over the 4B torus frequencies;
    # evaluated on the half-sample-offset grid, this is an inverse DFT with a phase ramp.
    q = np.fft.fftfreq(N, 1.0 / N).astype(int)
    coeffs = weight_hat(-q) * np.exp(1j * q * np.pi / N)
    torus = (np.fft.ifft(coeffs) * N).real
    ring = (torus[:2 * B] + torus[::-1][:2 * B]) / N * (2 * np.pi / (2 * B))
    for arr in (freqs, spectral, torus, ring):
        arr.setflags(write=False)
    return QuadratureWeights(B, freqs, spectral, torus, ring)


@dataclass
class SpinField:
    """Samples of a spin-s function, shape ``(..., channels, 2B, 2B)`` or ``(..., 2B, 2B)``."""

    samples: np.ndarray
    spin: int = 0
    real: bool = False

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim < 2 or self.samples.shape[-1] != self.samples.shape[-2] \
                or self.samples.shape[-1] % 2:
            raise BandwidthMismatchError(
                f"samples must end in a (2B, 2B) grid, got shape {self.samples.shape}")
        if self.real and np.iscomplexobj(self.samples):
            if np.any(self.samples.imag != 0):
                raise ValueError("field flagged real has a nonzero imaginary part")
            self.samples = self.samples.real

    @property
    def bandwidth(self) -> int:
        return self.samples.shape[-1] // 2

    @property
    def grid(self) -> SphericalGrid:
        return SphericalGrid(self.bandwidth)

    @property
    def channels(self) -> int:
        return self.samples.shape[-3] if self.samples.ndim >= 3 else 1


@dataclass
class SpinCoeffs:
    """SWSH coefficients, shape ``(..., B, 2B - 1)`` indexed ``[l, m + B - 1]``."""

    coeffs: np.ndarray
    spin: int = 0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs)
        if self.coeffs.ndim < 2 or self.coeffs.shape[-1] != 2 * self.coeffs.shape[-2] - 1:
            raise BandwidthMismatchError(
                f"coefficients must end in (B, 2B-1), got shape {self.coeffs.shape}")

    @property
    def bandwidth(self) -> int:
        return self.coeffs.shape[-2]

    @property
    def channels(self) -> int:
        return self.coeffs.shape[-3] if self.coeffs.ndim >= 3 else 1

    def at(self, l: int, m: int):
        return self.coeffs[..., l, m + self.bandwidth - 1]


def coeff_mask(bandwidth: int, spin: int = 0) -> np.ndarray:
    """Boolean ``(B, 2B-1)`` mask of the entries that can be nonzero for a spin."""
    l = np.arange(bandwidth)[:, None]
    m = np.arange(-(bandwidth - 1), bandwidth)[None, :]
    return (np.abs(m) <= l) & (l >= abs(spin))


def random_coeffs(rng: np.random.Generator, bandwidth: int, spin: int = 0, shape=()) -> np.ndarray:
    """Complex Gaussian coefficients, zero outside the valid triangle."""
    size = tuple(shape) + (bandwidth, 2 * bandwidth - 1)
    c = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return c * coeff_mask(bandwidth, spin)


def _spin_phase(bandwidth: int, spin: int) -> np.ndarray:
    m = np.arange(-(bandwidth - 1), bandwidth)
    return (-1) ** (spin % 2) * _i_power(m + spin)


class TransformPlan:
    """Grid, quadrature weights, Delta table and per-spin contraction tables for one B.

    Plans are immutable once a spin table is built and may be shared freely; the
    per-spin tables (``(B, 2B-1, 2B-1)`` doubles) are built lazily on first use.
    """

    def __init__(self, bandwidth: int, table: DeltaTable | None = None,
                 weights: QuadratureWeights | None = None):
        B = int(bandwidth)
        self.grid = SphericalGrid(B)
        self.table = table if table is not None else shared_delta_table(B - 1)
        self.weights = weights if weights is not None else quadrature_weights(B)
        if self.table.l_max < B - 1:
            raise BandwidthMismatchError(
                f"Delta table l_max={self.table.l_max} too small for bandwidth {B}")
        if self.weights.bandwidth != B:
            raise BandwidthMismatchError(
                f"quadrature weights are for bandwidth {self.weights.bandwidth}, not {B}")
        self._spin_tables: dict[int, np.ndarray] = {}

    @property
    def bandwidth(self) -> int:
        return self.grid.bandwidth

    def spin_table(self, spin: int) -> np.ndarray:
        """``P[l, m+B-1, k+B-1] = sqrt((2l+1)/4pi) Delta^l_{k,m} Delta^l_{k,-s}``."""
        spin = int(spin)
        cached = self._spin_tables.get(spin)
        if cached is not None:
            return cached
        B = self.bandwidth
        if abs(spin) >= B:
            raise SpinSetError(f"spin {spin} has no harmonics below bandwidth {B}")
        P = np.zeros((B, 2 * B - 1, 2 * B - 1))
        for l in range(abs(spin), B):
            d = self.table[l]
            block = (d * d[:, l - spin][:, None]).T
            P[l, B - 1 - l:B + l, B - 1 - l:B + l] = np.sqrt((2 * l + 1) / (4 * np.pi)) * block
        P.setflags(write=False)
        self._spin_tables[spin] = P
        return P

    def forward(self, samples, spin: int = 0, precision: str = "f64") -> np.ndarray:
        B = self.bandwidth
        samples = np.asarray(samples)
        if samples.shape[-2:] != self.grid.shape:
            raise BandwidthMismatchError(
                f"field grid {samples.shape[-2:]} does not match bandwidth {B}")
        cdtype = _complex_dtype(precision)
        lead = samples.shape[:-2]
        x = samples.reshape((-1,) + self.grid.shape).astype(cdtype, copy=False)
        N = 4 * B
        m = np.arange(-(B - 1), B)
        modes = fft.fft(x, axis=-1)[..., m % (2 * B)] / (2 * B)
        parity = np.where((m + spin) % 2 == 0, 1.0, -1.0).astype(cdtype)
        ext = np.concatenate([modes, parity * modes[:, ::-1, :]], axis=1)
        ext *= self.weights.torus.astype(ext.real.dtype)[:, None]
        theta_modes = fft.fft(ext, axis=1)[:, m % N, :] / N
        shift = np.exp(-1j * m * np.pi / N)
        tori = 2 * np.pi * theta_modes * shift.astype(cdtype)[:, None]
        tori = np.ascontiguousarray(np.transpose(tori, (0, 2, 1)), dtype=np.complex128)
        out = backend.kernels().contract_forward(self.spin_table(spin), tori, int(spin))
        out *= _spin_phase(B, spin)
        return out.reshape(lead + (B, 2 * B - 1)).astype(cdtype, copy=False)

    def inverse(self, coeffs, spin: int = 0, precision: str = "f64") -> np.ndarray:
        B = self.bandwidth
        coeffs = np.asarray(coeffs)
        if coeffs.shape[-2:] != (B, 2 * B - 1):
            raise BandwidthMismatchError(
                f"coefficients {coeffs.shape[-2:]} do not match bandwidth {B}")
        cdtype = _complex_dtype(precision)
        lead = coeffs.shape[:-2]
        c = coeffs.reshape((-1, B, 2 * B - 1)) * _spin_phase(B, spin)
        c = np.ascontiguousarray(c, dtype=np.complex128)
        G = backend.kernels().contract_inverse(self.spin_table(spin), c, int(spin))
        N = 4 * B
        k = np.arange(-(B - 1), B)
        H = np.zeros((c.shape[0], N, 2 * B - 1), dtype=cdtype)
        H[:, k % N, :] = np.transpose(G, (0, 2, 1)) * np.exp(-1j * k * np.pi / N)[:, None]
        rows = fft.fft(H, axis=1)[:, :2 * B, :]
        Z = np.zeros((c.shape[0], 2 * B, 2 * B), dtype=cdtype)
        Z[..., k % (2 * B)] = rows
        out = fft.ifft(Z, axis=-1) * (2 * B)
        return out.reshape(lead + self.grid.shape).astype(cdtype, copy=False)


def _complex_dtype(precision: str):
    if precision == "f64":
        return np.complex128
    if precision == "f32":
        return np.complex64
    raise ValueError(f"precision must be 'f32' or 'f64', got {precision!r}")


@lru_cache(maxsize=16)
def _cached_plan(bandwidth: int, table: DeltaTable | None, weights: QuadratureWeights | None):
    return TransformPlan(bandwidth, table, weights)


def get_plan(bandwidth: int, table: DeltaTable | None = None,
             weights: QuadratureWeights | None = None) -> TransformPlan:
    """Shared plan keyed by (bandwidth, table, weights) identity."""
    return _cached_plan(int(bandwidth), table, weights)


def torus_extend(field: SpinField) -> np.ndarray:
    """Periodic extension of a spin field from theta in (0, pi) to the full circle.

    Returns ``(..., 4B, 2B)``. Row ``j >= 2B`` holds theta ``2 pi - theta_{4B-1-j}``;
    each azimuthal mode m is mirrored with parity ``(-1)^(m+s)``. On the sampled
    grid that is exactly ``(-1)^s`` times a half-turn in phi, which is how it is
    computed, so the first 2B rows are the input unchanged.
    """
    x = field.samples
    B = field.bandwidth
    mirrored = np.roll(x[..., ::-1, :], -B, axis=-1)
    if field.spin % 2:
        mirrored = -mirrored
    return np.concatenate([x, mirrored], axis=-2)


def evaluate_field(field: SpinField, theta, phi) -> np.ndarray:
    """Values of a bandlimited spin field at arbitrary points.

    The torus extension of a field bandlimited to B is a trigonometric polynomial
    of degree < B in both angles, so its 2D Fourier series evaluates it exactly
    off the grid. Fields that are not bandlimited come out smoothed. Returns
    ``field.samples.shape[:-2] + theta.shape``.
    """
    B = field.bandwidth
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    ext = torus_extend(field)
    n = 4 * B
    k = np.rint(np.fft.fftfreq(n) * n)
    m = np.rint(np.fft.fftfreq(2 * B) * 2 * B)
    # rows sit at pi (j + 1/2) / 2B, half a step off the FFT origin
    F = np.fft.fft2(ext) / (n * 2 * B) * np.exp(-1j * k * np.pi / n)[:, None]
    keep_k, keep_m = np.abs(k) < B, np.abs(m) < B
    F = F[..., keep_k, :][..., keep_m]
    et = np.exp(1j * np.outer(theta.ravel(), k[keep_k]))
    ep = np.exp(1j * np.outer(phi.ravel(), m[keep_m]))
    vals = np.einsum("...km,nk,nm->...n", F, et, ep)
    if field.real:
        vals = vals.real
    return vals.reshape(field.samples.shape[:-2] + theta.shape)


def _check_table_weights(B: int, table: DeltaTable, weights: QuadratureWeights | None):
    if table.l_max < B - 1:
        raise BandwidthMismatchError(f"Delta table l_max={table.l_max} too small for bandwidth {B}")
    if weights is not None and weights.bandwidth != B:
        raise BandwidthMismatchError(
            f"quadrature weights bandwidth {weights.bandwidth} != field bandwidth {B}")


def swsft_forward(field: SpinField, table: DeltaTable | None = None,
                  weights: QuadratureWeights | None = None, precision: str = "f64") -> SpinCoeffs:
    B = field.bandwidth
    table = table if table is not None else shared_delta_table(B - 1)
    _check_table_weights(B, table, weights)
    plan = get_plan(B, table, weights)
    return SpinCoeffs(plan.forward(field.samples, field.spin, precision), field.spin)


def swsft_inverse(coeffs: SpinCoeffs, grid: SphericalGrid | None = None,
                  table: DeltaTable | None = None, precision: str = "f64",
                  real: bool = False) -> SpinField:
    B = coeffs.bandwidth
    if grid is not None and grid.bandwidth != B:
        raise BandwidthMismatchError(f"grid bandwidth {grid.bandwidth} != coefficient bandwidth {B}")
    table = table if table is not None else shared_delta_table(B - 1)
    _check_table_weights(B, table, None)
    samples = get_plan(B, table).inverse(coeffs.coeffs, coeffs.spin, precision)
    if real:
        samples = samples.real
    return SpinField(samples, coeffs.spin, real=real)
