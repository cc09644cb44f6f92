"""Network building blocks on spin-weighted feature maps.

Convolutions happen in the spectral domain; nonlinearities, batch normalization
and pooling act on grid samples. Spin-0 features are kept real.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BandwidthMismatchError, ShapeMismatchError, SpinSetError, StateError
from .spectral import SPATIAL, SPECTRAL, FeatureMap, FilterSpectrum, normalize_spins, spin_conv
from .transform import SpinField


@dataclass
class FilterParams:
    """Anchor values ``anchors[o, c, a, b, j]`` of the filter spectrum along the degree axis.

    Anchors of spin-0 outputs are real (their imaginary parts are ignored); the
    rest are complex.
    """

    anchors: np.ndarray
    spins_out: tuple
    spins_in: tuple
    bandwidth: int

    def __post_init__(self):
        self.anchors = np.asarray(self.anchors, dtype=np.complex128)
        self.spins_out = tuple(int(s) for s in self.spins_out)
        self.spins_in = tuple(int(s) for s in self.spins_in)
        if self.anchors.ndim != 5 or self.anchors.shape[2:4] != (len(self.spins_out), len(self.spins_in)):
            raise ShapeMismatchError(
                f"anchors shape {self.anchors.shape} does not match spins {self.spins_out} x {self.spins_in}")
        if self.n_anchor < 1:
            raise ValueError("need at least one anchor")

    @property
    def n_anchor(self) -> int:
        return self.anchors.shape[-1]

    @property
    def n_parameters(self) -> int:
        per_pair = self.anchors.shape[0] * self.anchors.shape[1] * self.n_anchor
        return sum(per_pair * (1 if s == 0 else 2) * len(self.spins_in) for s in self.spins_out)


def anchor_matrix(bandwidth: int, n_anchor: int) -> np.ndarray:
    """``(B, n_anchor)`` piecewise-linear interpolation weights over degrees 0..B-1."""
    if n_anchor > bandwidth:
        raise ValueError(f"{n_anchor} anchors do not fit in bandwidth {bandwidth}")
    if n_anchor == 1:
        return np.ones((bandwidth, 1))
    pos = np.linspace(0.0, bandwidth - 1.0, n_anchor)
    degrees = np.arange(bandwidth, dtype=float)
    return np.stack([np.interp(degrees, pos, e) for e in np.eye(n_anchor)], axis=1)


def filter_expand(params: FilterParams) -> FilterSpectrum:
    """Spectrum along degrees from anchors; linear in the anchors."""
    B = params.bandwidth
    if B < 2:
        raise ValueError("filter expansion needs bandwidth >= 2")
    anchors = params.anchors.copy()
    for a, s in enumerate(params.spins_out):
        if s == 0:
            anchors[:, :, a] = anchors[:, :, a].real
    spectrum = anchors @ anchor_matrix(B, params.n_anchor).T
    return FilterSpectrum(spectrum, params.spins_out, params.spins_in).enforce_support()


@dataclass
class BatchNormState:
    """Per-channel statistics and affine parameters.

    ``running_mean``/``running_var`` are ``None`` until fitted; inference mode
    refuses to run without them.
    """

    channels: int
    running_mean: np.ndarray | None = None
    running_var: np.ndarray | None = None
    weight: np.ndarray = None
    bias: np.ndarray = None
    eps: float = 1e-5
    momentum: float = 0.1
    training: bool = False

    def __post_init__(self):
        if self.weight is None:
            self.weight = np.ones(self.channels)
        if self.bias is None:
            self.bias = np.zeros(self.channels)
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    @classmethod
    def identity(cls, channels: int, **kw) -> "BatchNormState":
        """Inference state that maps every value to itself.

        The stored variance is ``1 - eps`` so that ``sqrt(var + eps)`` is exactly 1.
        """
        eps = kw.get("eps", 1e-5)
        return cls(channels, np.zeros(channels), np.full(channels, 1.0 - eps), **kw)

    @property
    def initialized(self) -> bool:
        return self.running_mean is not None and self.running_var is not None

    def normalize(self, x: np.ndarray) -> np.ndarray:
        """Normalize a real ``(..., C, H, W)`` array per channel."""
        x = np.asarray(x)
        if x.shape[-3] != self.channels:
            raise ShapeMismatchError(f"batch norm has {self.channels} channels, input has {x.shape[-3]}")
        if self.training:
            axes = tuple(i for i in range(x.ndim) if i != x.ndim - 3)
            mean = x.mean(axis=axes, dtype=np.float64)
            var = x.var(axis=axes, dtype=np.float64)
            if self.initialized:
                self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
                self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var
            else:
                self.running_mean, self.running_var = mean, var
        else:
            if not self.initialized:
                raise StateError("batch norm in inference mode has no running statistics")
            mean, var = self.running_mean, self.running_var
        scale = self.weight / np.sqrt(var + self.eps)
        shift = self.bias - mean * scale
        return (x * scale[:, None, None] + shift[:, None, None]).astype(x.dtype, copy=False)


def _field_samples(field):
    return field.samples if isinstance(field, SpinField) else np.asarray(field)


def real_relu_s0(field: SpinField) -> SpinField:
    """``max(Re f, 0)`` for a spin-0 field; the result is flagged real."""
    if field.spin != 0:
        raise SpinSetError(f"real_relu_s0 applies to spin 0 only, got spin {field.spin}")
    return SpinField(np.maximum(np.real(field.samples), 0), 0, real=True)


def magnitude_bn_relu(field: SpinField, state: BatchNormState) -> SpinField:
    """``f -> f * max(bn(|f|), 0)`` pointwise; phases are preserved or the sample is zeroed."""
    if field.spin == 0:
        raise SpinSetError("magnitude_bn_relu is for nonzero spins")
    x = field.samples
    gain = np.maximum(state.normalize(np.abs(x)), 0)
    return SpinField(x * gain, field.spin)


def scalar_bn_relu(field: SpinField, state: BatchNormState) -> SpinField:
    """Standard batch norm followed by ReLU on a real spin-0 field."""
    x = np.real(field.samples)
    return real_relu_s0(SpinField(state.normalize(x), 0, real=True))


def pool(feature: FeatureMap) -> FeatureMap:
    """2x2 average pooling on the grid; halves the bandwidth."""
    if feature.domain != SPATIAL:
        raise ValueError("pooling acts on spatial feature maps")
    B = feature.bandwidth
    if B < 2 or B % 2:
        raise BandwidthMismatchError(f"cannot pool bandwidth {B}; need an even B >= 2")

    def avg(_, v):
        lead = v.shape[:-2]
        return v.reshape(lead + (B, 2, B, 2)).mean(axis=(-3, -1))

    return FeatureMap({s: avg(s, v) for s, v in feature.data.items()}, B // 2, SPATIAL)


def upsample(feature: FeatureMap) -> FeatureMap:
    """Nearest-neighbour upsampling: every sample becomes a 2x2 block."""
    if feature.domain != SPATIAL:
        raise ValueError("upsampling acts on spatial feature maps")
    return FeatureMap({s: v.repeat(2, axis=-2).repeat(2, axis=-1) for s, v in feature.data.items()},
                      2 * feature.bandwidth, SPATIAL)


def concat_channels(a: FeatureMap, b: FeatureMap) -> FeatureMap:
    if a.bandwidth != b.bandwidth or a.domain != b.domain:
        raise BandwidthMismatchError("skip connection needs matching bandwidth and domain")
    if a.spins != b.spins:
        raise SpinSetError(f"skip connection spins differ: {a.spins} vs {b.spins}")
    return FeatureMap({s: np.concatenate([a[s], b[s]], axis=-3) for s in a.spins},
                      a.bandwidth, a.domain)


@dataclass(frozen=True)
class LayerSpec:
    in_channels: int
    out_channels: int
    spins_in: tuple
    spins_out: tuple
    n_anchor: int
    pool_after: bool = False
    upsample_before: bool = False
    take_real_s0: bool = True
    batch_norm: bool = True

    def __post_init__(self):
        object.__setattr__(self, "spins_in", normalize_spins(self.spins_in))
        object.__setattr__(self, "spins_out", normalize_spins(self.spins_out))
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be >= 1")
        if self.n_anchor < 1:
            raise ValueError("n_anchor must be >= 1")

    def to_dict(self) -> dict:
        return {
            "in_channels": self.in_channels, "out_channels": self.out_channels,
            "spins_in": list(self.spins_in), "spins_out": list(self.spins_out),
            "n_anchor": self.n_anchor, "pool_after": self.pool_after,
            "upsample_before": self.upsample_before, "take_real_s0": self.take_real_s0,
            "batch_norm": self.batch_norm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass
class LayerWeights:
    """Anchors, spin-0 bias and per-spin batch norm for one layer."""

    filters: FilterParams
    bias: np.ndarray | None = None
    bn: dict = field(default_factory=dict)

    @property
    def n_parameters(self) -> int:
        n = self.filters.n_parameters
        if self.bias is not None:
            n += self.bias.size
        for state in self.bn.values():
            n += state.weight.size + state.bias.size
        return n


def init_layer(spec: LayerSpec, bandwidth: int, rng: np.random.Generator) -> LayerWeights:
    """Zero-mean anchors scaled by ``1/sqrt(in_ch * |W_in| * n_anchor)``; identity batch norm."""
    shape = (spec.out_channels, spec.in_channels, len(spec.spins_out), len(spec.spins_in), spec.n_anchor)
    scale = 1.0 / np.sqrt(spec.in_channels * len(spec.spins_in) * spec.n_anchor)
    anchors = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * scale / np.sqrt(2)
    for a, s in enumerate(spec.spins_out):
        if s == 0:
            anchors[:, :, a] = anchors[:, :, a].real * np.sqrt(2)
    filters = FilterParams(anchors, spec.spins_out, spec.spins_in, bandwidth)
    bias = np.zeros(spec.out_channels) if 0 in spec.spins_out and spec.take_real_s0 else None
    bn = {s: BatchNormState.identity(spec.out_channels) for s in spec.spins_out} if spec.batch_norm else {}
    return LayerWeights(filters, bias, bn)


def check_layer(spec: LayerSpec, weights: LayerWeights):
    f = weights.filters
    expected = (spec.out_channels, spec.in_channels, len(spec.spins_out), len(spec.spins_in), spec.n_anchor)
    if f.anchors.shape != expected:
        raise ShapeMismatchError(f"anchors {f.anchors.shape} do not match layer spec {expected}")
    if f.spins_out != spec.spins_out or f.spins_in != spec.spins_in:
        raise ShapeMismatchError("filter spins do not match layer spec")
    if spec.batch_norm and set(weights.bn) != set(spec.spins_out):
        raise ShapeMismatchError("batch norm states must cover the output spins")


def conv_layer_forward(feature: FeatureMap, params: FilterParams, bn: dict, spec: LayerSpec,
                       bias: np.ndarray | None = None, precision: str = "f64") -> FeatureMap:
    """One spin-weighted convolution layer on a spatial feature map.

    forward SWSFT per spin -> spin_conv with the expanded filter -> inverse SWSFT ->
    spin 0: real part + bias, batch norm, ReLU; other spins: magnitude batch norm
    and nonlinearity -> optional 2x2 pooling. With ``spec.batch_norm`` off the
    nonlinear stage is skipped (linear output layers).
    """
    if feature.domain != SPATIAL:
        raise ValueError("conv_layer_forward expects a spatial feature map")
    if spec.upsample_before:
        feature = upsample(feature)
    if feature.channels != spec.in_channels:
        raise ShapeMismatchError(f"layer expects {spec.in_channels} channels, got {feature.channels}")
    B = feature.bandwidth
    if params.bandwidth != B:
        raise BandwidthMismatchError(f"filter bandwidth {params.bandwidth} != feature bandwidth {B}")
    spectral = feature.to_spectral(precision)
    out = spin_conv(spectral, filter_expand(params)).to_spatial(precision)
    data = {}
    for s, v in out.data.items():
        if s == 0 and spec.take_real_s0:
            x = v.real
            if bias is not None:
                x = x + bias[:, None, None]
            f0 = SpinField(x, 0, real=True)
            data[s] = scalar_bn_relu(f0, bn[0]).samples if spec.batch_norm else x
        elif spec.batch_norm and s != 0:
            data[s] = magnitude_bn_relu(SpinField(v, s), bn[s]).samples
        else:
            data[s] = v
    if precision == "f32":
        data = {s: v.astype(np.float32 if np.isrealobj(v) else np.complex64) for s, v in data.items()}
    result = FeatureMap(data, B, SPATIAL)
    return pool(result) if spec.pool_after else result


def as_complex_spatial(feature: FeatureMap) -> FeatureMap:
    """Promote all components to complex (handy before spectral rotation)."""
    return feature.map(lambda s, v: v.astype(np.complex128))


__all__ = [
    "BatchNormState", "FilterParams", "LayerSpec", "LayerWeights", "SPECTRAL", "SPATIAL",
    "anchor_matrix", "check_layer", "concat_channels", "conv_layer_forward", "filter_expand",
    "init_layer", "magnitude_bn_relu", "pool", "real_relu_s0", "scalar_bn_relu", "upsample",
]
