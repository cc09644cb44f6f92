"""Coefficient-space rotation, spin-weighted convolution and cross-correlation.

Feature maps hold one array per spin weight. In the spectral domain each array is
``(..., channels, B, 2B-1)``; in the spatial domain ``(..., channels, 2B, 2B)``.
Filter spectra are ``(out_ch, in_ch, |W_out|, |W_in|, B)``: only the orders that
can touch the output are stored, so a filter costs O(B) per spin pair.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BandwidthMismatchError, SpinSetError
from .harmonics import DeltaTable, Rotation, shared_delta_table, wigner_D
from .transform import SpinCoeffs, coeff_mask, get_plan

SPECTRAL = "spectral"
SPATIAL = "spatial"


def normalize_spins(spins) -> tuple[int, ...]:
    out = tuple(sorted({int(s) for s in spins}))
    if not out:
        raise SpinSetError("spin set must be nonempty")
    return out


@dataclass
class FeatureMap:
    """A set of spin-weighted functions sharing bandwidth and channel count."""

    data: dict
    bandwidth: int
    domain: str = SPATIAL

    def __post_init__(self):
        if self.domain not in (SPATIAL, SPECTRAL):
            raise ValueError(f"unknown domain {self.domain!r}")
        self.data = {int(s): np.asarray(v) for s, v in sorted(self.data.items())}
        if not self.data:
            raise SpinSetError("feature map needs at least one spin")
        B = int(self.bandwidth)
        tail = (2 * B, 2 * B) if self.domain == SPATIAL else (B, 2 * B - 1)
        shapes = set()
        for s, v in self.data.items():
            if v.shape[-2:] != tail:
                raise BandwidthMismatchError(
                    f"spin {s} array has trailing shape {v.shape[-2:]}, expected {tail}")
            if abs(s) >= B:
                raise SpinSetError(f"spin {s} not representable at bandwidth {B}")
            shapes.add(v.shape[:-2])
        if len(shapes) != 1:
            raise BandwidthMismatchError(f"spins disagree on leading shape: {sorted(shapes)}")

    @property
    def spins(self) -> tuple[int, ...]:
        return tuple(self.data)

    @property
    def channels(self) -> int:
        return next(iter(self.data.values())).shape[-3]

    @property
    def lead_shape(self) -> tuple[int, ...]:
        return next(iter(self.data.values())).shape[:-2]

    def __getitem__(self, spin: int) -> np.ndarray:
        return self.data[spin]

    def map(self, fn) -> "FeatureMap":
        return FeatureMap({s: fn(s, v) for s, v in self.data.items()}, self.bandwidth, self.domain)

    def to_spectral(self, precision: str = "f64") -> "FeatureMap":
        if self.domain == SPECTRAL:
            return self
        plan = get_plan(self.bandwidth)
        return FeatureMap({s: plan.forward(v, s, precision) for s, v in self.data.items()},
                          self.bandwidth, SPECTRAL)

    def to_spatial(self, precision: str = "f64") -> "FeatureMap":
        if self.domain == SPATIAL:
            return self
        plan = get_plan(self.bandwidth)
        return FeatureMap({s: plan.inverse(v, s, precision) for s, v in self.data.items()},
                          self.bandwidth, SPATIAL)


@dataclass
class FilterSpectrum:
    """Filter coefficients ``coeffs[o, c, a, b, l]`` for output spin ``spins_out[a]``
    and input spin ``spins_in[b]``."""

    coeffs: np.ndarray
    spins_out: tuple
    spins_in: tuple

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs)
        self.spins_out = tuple(int(s) for s in self.spins_out)
        self.spins_in = tuple(int(s) for s in self.spins_in)
        if self.coeffs.ndim != 5:
            raise ValueError("filter spectrum must be (out_ch, in_ch, |W_out|, |W_in|, B)")
        if self.coeffs.shape[2:4] != (len(self.spins_out), len(self.spins_in)):
            raise ValueError("filter spectrum spin axes do not match the spin sets")

    @property
    def bandwidth(self) -> int:
        return self.coeffs.shape[-1]

    @property
    def out_channels(self) -> int:
        return self.coeffs.shape[0]

    @property
    def in_channels(self) -> int:
        return self.coeffs.shape[1]

    def component(self, s_out: int, s_in: int) -> np.ndarray:
        """``(out_ch, in_ch, B)`` slice for one spin pair."""
        return self.coeffs[:, :, self.spins_out.index(s_out), self.spins_in.index(s_in), :]

    def enforce_support(self) -> "FilterSpectrum":
        """Zero degrees below ``max(|s_out|, |s_in|)``; no harmonic exists there."""
        c = self.coeffs.copy()
        l = np.arange(self.bandwidth)
        for a, so in enumerate(self.spins_out):
            for b, si in enumerate(self.spins_in):
                c[:, :, a, b, l < max(abs(so), abs(si))] = 0
        return FilterSpectrum(c, self.spins_out, self.spins_in)


def filter_from_coeffs(kernel: FeatureMap, orders) -> FilterSpectrum:
    """Cross-correlation filter from full filter coefficients.

    ``kernel[i]`` has shape ``(out_ch, in_ch, B, 2B-1)``; the returned spectrum keeps
    only the columns ``m = s`` for ``s`` in ``orders``, i.e. ``ik^l_s``.
    """
    if kernel.domain != SPECTRAL:
        kernel = kernel.to_spectral()
    B = kernel.bandwidth
    orders = normalize_spins(orders)
    ex = kernel[kernel.spins[0]]
    out = np.zeros(ex.shape[:2] + (len(orders), len(kernel.spins), B), dtype=np.complex128)
    for b, i in enumerate(kernel.spins):
        for a, s in enumerate(orders):
            if abs(s) >= B:
                raise SpinSetError(f"order {s} outside bandwidth {B}")
            out[:, :, a, b, :] = kernel[i][..., :, s + B - 1]
    return FilterSpectrum(out, orders, kernel.spins)


def rotate_coeffs(coeffs, g: Rotation, table: DeltaTable | None = None):
    """Coefficients of ``x -> f(g x)``: ``f_n^l -> sum_m conj(D^l_{m,n}(g)) f_m^l``.

    Accepts a :class:`SpinCoeffs` or a raw ``(..., B, 2B-1)`` array and returns the
    same kind. The spin weight does not enter the formula.
    """
    raw = coeffs.coeffs if isinstance(coeffs, SpinCoeffs) else np.asarray(coeffs)
    B = raw.shape[-2]
    table = table if table is not None else shared_delta_table(B - 1)
    if table.l_max < B - 1:
        raise BandwidthMismatchError(f"Delta table l_max={table.l_max} too small for bandwidth {B}")
    out = np.zeros(raw.shape, dtype=np.result_type(raw.dtype, np.complex64))
    for l in range(B):
        sl = slice(B - 1 - l, B + l)
        D = wigner_D(table, l, g)
        out[..., l, sl] = raw[..., l, sl] @ D.conj()
    if isinstance(coeffs, SpinCoeffs):
        return SpinCoeffs(out, coeffs.spin)
    return out


def rotate_feature_map(F: FeatureMap, g: Rotation, table: DeltaTable | None = None) -> FeatureMap:
    """Rotate every spin component of a spectral feature map."""
    if F.domain != SPECTRAL:
        raise ValueError("rotate_feature_map needs a spectral feature map")
    return F.map(lambda s, v: rotate_coeffs(v, g, table))


def _common_spins(F: FeatureMap, spins_in) -> list[int]:
    common = [s for s in F.spins if s in spins_in]
    if not common:
        raise SpinSetError(f"no spin in common between feature map {F.spins} and filter {spins_in}")
    return common


def _check_compatible(F: FeatureMap, K: FilterSpectrum):
    if F.domain != SPECTRAL:
        raise ValueError("spectral operations need a spectral feature map")
    if K.bandwidth != F.bandwidth:
        raise BandwidthMismatchError(f"filter bandwidth {K.bandwidth} != feature bandwidth {F.bandwidth}")
    if K.in_channels != F.channels:
        raise BandwidthMismatchError(f"filter expects {K.in_channels} input channels, got {F.channels}")


def spin_conv(F: FeatureMap, K: FilterSpectrum) -> FeatureMap:
    """Spin-weighted convolution: ``s(F*K)^l_m = sum_i if^l_m sk^l_i``.

    The sum runs over the spins shared by ``F`` and ``K.spins_in`` and contracts
    input channels; the output carries the spins ``K.spins_out``.
    """
    _check_compatible(F, K)
    common = _common_spins(F, K.spins_in)
    out = {}
    for a, s in enumerate(K.spins_out):
        acc = None
        for i in common:
            k = K.coeffs[:, :, a, K.spins_in.index(i), :]
            term = np.einsum("...clm,ocl->...olm", F[i].astype(np.complex128, copy=False), k)
            acc = term if acc is None else acc + term
        out[s] = acc
    return FeatureMap(out, F.bandwidth, SPECTRAL)


def spin_corr(F: FeatureMap, K: FilterSpectrum, spins_out=None) -> FeatureMap:
    """Spin-weighted cross-correlation: ``s(F*K)^l_m = sum_i if^l_m conj(ik^l_s)``.

    ``K.spins_out`` lists the filter orders available; ``spins_out`` picks the
    output spins to keep (all of ``K.spins_out`` by default).
    """
    _check_compatible(F, K)
    spins_out = K.spins_out if spins_out is None else normalize_spins(spins_out)
    for s in spins_out:
        if abs(s) > F.bandwidth - 1:
            raise SpinSetError(f"output spin {s} outside bandwidth {F.bandwidth}")
        if s not in K.spins_out:
            raise SpinSetError(f"filter has no order {s} (has {K.spins_out})")
    common = _common_spins(F, K.spins_in)
    out = {}
    for s in spins_out:
        a = K.spins_out.index(s)
        acc = None
        for i in common:
            k = K.coeffs[:, :, a, K.spins_in.index(i), :].conj()
            term = np.einsum("...clm,ocl->...olm", F[i].astype(np.complex128, copy=False), k)
            acc = term if acc is None else acc + term
        out[s] = acc * coeff_mask(F.bandwidth, s)
    return FeatureMap(out, F.bandwidth, SPECTRAL)


def sphere_conv(f, k) -> np.ndarray:
    """Spherical convolution with the zonal part of ``k``:
    ``2 pi sqrt(4 pi / (2l+1)) f^l_m k^l_0`` for spin-0 coefficient arrays."""
    f = np.asarray(f)
    k = np.asarray(k)
    B = f.shape[-2]
    l = np.arange(B)
    scale = 2 * np.pi * np.sqrt(4 * np.pi / (2 * l + 1))
    return f * (scale * k[..., :, B - 1])[..., :, None]


def sphere_corr(f, k) -> np.ndarray:
    """Spherical cross-correlation, a function on SO(3): ``out[..., l, m, n] = f^l_m conj(k^l_n)``."""
    f = np.asarray(f)
    k = np.asarray(k)
    return f[..., :, :, None] * k.conj()[..., :, None, :]


def bandlimit(coeffs: SpinCoeffs, new_bandwidth: int) -> SpinCoeffs:
    """Keep degrees ``l < new_bandwidth``."""
    B = coeffs.bandwidth
    Bn = int(new_bandwidth)
    if Bn > B:
        raise BandwidthMismatchError(f"cannot bandlimit from {B} up to {Bn}")
    if Bn <= abs(coeffs.spin):
        raise SpinSetError(f"bandwidth {Bn} leaves no harmonics for spin {coeffs.spin}")
    c = coeffs.coeffs[..., :Bn, B - Bn:B + Bn - 1]
    return SpinCoeffs(np.array(c), coeffs.spin)
