"""Classifier and U-Net assembled from spin-weighted convolution layers."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import blobio
from .errors import FormatError, ShapeMismatchError, SpinSetError
from .layers import (BatchNormState, FilterParams, LayerSpec, LayerWeights, check_layer, concat_channels,
                     conv_layer_forward, init_layer, pool, upsample)
from .spectral import SPATIAL, FeatureMap
from .transform import quadrature_weights

CLASSIFIER_CHANNELS = (16, 16, 20, 24, 28, 32)
CLASSIFIER_ANCHORS = (6, 6, 4, 4, 3, 3)
CLASSIFIER_POOL_AFTER = (1, 3)
UNET_CHANNELS = (16, 32, 32, 32, 32, 16)
UNET_ANCHORS = (6, 4, 3, 3, 4, 6)
HIDDEN_SPINS = (0, 1)
CLASSIFIER = "classifier"
UNET = "unet"


@dataclass
class NetworkSpec:
    """Layer list plus the few extras needed to rebuild a network.

    For the U-Net, ``skips[i] = j`` means the input of layer ``i`` is the
    (upsampled) output of layer ``i-1`` concatenated with the pre-pool output
    of layer ``j``.
    """

    kind: str
    bandwidth: int
    input_spins: tuple
    layers: list
    n_classes: int = 0
    skips: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "bandwidth": self.bandwidth, "input_spins": list(self.input_spins),
            "n_classes": self.n_classes, "skips": {str(k): v for k, v in self.skips.items()},
            "layers": [l.to_dict() for l in self.layers],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(d["kind"], int(d["bandwidth"]), tuple(d["input_spins"]),
                   [LayerSpec.from_dict(l) for l in d["layers"]], int(d.get("n_classes", 0)),
                   {int(k): int(v) for k, v in d.get("skips", {}).items()})

    def layer_bandwidths(self) -> list[int]:
        """Bandwidth at which each layer convolves."""
        B, out = self.bandwidth, []
        for spec in self.layers:
            if spec.upsample_before:
                B *= 2
            out.append(B)
            if spec.pool_after:
                B //= 2
        return out

    @property
    def n_features(self) -> int:
        last = self.layers[-1]
        return last.out_channels * len(last.spins_out)


def build_classifier(input_spins=(0,), bandwidth: int = 32, input_channels: int = 1,
                     n_classes: int = 10, channels=CLASSIFIER_CHANNELS,
                     anchors=CLASSIFIER_ANCHORS) -> NetworkSpec:
    """Six conv layers with pooling after every second one, then an invariant head."""
    if len(channels) != len(anchors):
        raise ValueError("channels and anchors must have equal length")
    layers, c_in, spins = [], input_channels, tuple(input_spins)
    for i, (c, n) in enumerate(zip(channels, anchors)):
        layers.append(LayerSpec(c_in, c, spins, HIDDEN_SPINS, n, pool_after=i in CLASSIFIER_POOL_AFTER))
        c_in, spins = c, HIDDEN_SPINS
    return NetworkSpec(CLASSIFIER, bandwidth, tuple(input_spins), layers, n_classes)


def build_unet(input_spins=(0,), output_spins=None, bandwidth: int = 32, input_channels: int = 1,
               output_channels: int | None = None) -> NetworkSpec:
    """Six hidden conv layers plus a linear output layer.

    Layers 1-2 pool, layers 3-5 run at B/4, layer 6 and the output layer upsample
    their main input and concatenate the pre-pool features of layers 2 and 1.
    By default a scalar input predicts a vector field and vice versa.
    """
    input_spins = tuple(input_spins)
    if output_spins is None:
        output_spins = (1,) if input_spins == (0,) else (0,)
    output_spins = tuple(output_spins)
    if output_channels is None:
        output_channels = 3 if output_spins == (0,) else 1
    c = UNET_CHANNELS
    a = UNET_ANCHORS
    H = HIDDEN_SPINS
    layers = [
        LayerSpec(input_channels, c[0], input_spins, H, a[0], pool_after=True),
        LayerSpec(c[0], c[1], H, H, a[1], pool_after=True),
        LayerSpec(c[1], c[2], H, H, a[2]),
        LayerSpec(c[2], c[3], H, H, a[3]),
        LayerSpec(c[3], c[4], H, H, a[4]),
        LayerSpec(c[4] + c[1], c[5], H, H, a[5], upsample_before=True),
        LayerSpec(c[5] + c[0], output_channels, H, output_spins, a[5], upsample_before=True,
                  batch_norm=False),
    ]
    return NetworkSpec(UNET, bandwidth, input_spins, layers, skips={5: 1, 6: 0})


@dataclass
class NetworkWeights:
    layers: list
    head_weight: np.ndarray | None = None
    head_bias: np.ndarray | None = None

    def bn_states(self):
        for lw in self.layers:
            yield from lw.bn.values()


def init_weights(spec: NetworkSpec, rng: np.random.Generator) -> NetworkWeights:
    layers = [init_layer(l, B, rng) for l, B in zip(spec.layers, spec.layer_bandwidths())]
    head_w = head_b = None
    if spec.kind == CLASSIFIER:
        head_w = rng.standard_normal((spec.n_classes, spec.n_features)) / np.sqrt(spec.n_features)
        head_b = np.zeros(spec.n_classes)
    return NetworkWeights(layers, head_w, head_b)


def zero_weights(spec: NetworkSpec, head_bias=None) -> NetworkWeights:
    """All anchors and biases zero, identity batch norm."""
    w = init_weights(spec, np.random.default_rng(0))
    for lw in w.layers:
        lw.filters.anchors[...] = 0
        if lw.bias is not None:
            lw.bias[...] = 0
    if w.head_weight is not None:
        w.head_weight[...] = 0
        w.head_bias[...] = 0 if head_bias is None else head_bias
    return w


def parameter_count(spec: NetworkSpec) -> int:
    """Real trainable parameters: anchors, spin-0 biases, batch-norm scale/shift, head."""
    w = init_weights(spec, np.random.default_rng(0))
    return weights_parameter_count(w)


def weights_parameter_count(w: NetworkWeights) -> int:
    n = sum(lw.n_parameters for lw in w.layers)
    if w.head_weight is not None:
        n += w.head_weight.size + w.head_bias.size
    return n


def check_weights(spec: NetworkSpec, w: NetworkWeights):
    if len(w.layers) != len(spec.layers):
        raise ShapeMismatchError(f"{len(w.layers)} weight layers for {len(spec.layers)} spec layers")
    for l, lw, B in zip(spec.layers, w.layers, spec.layer_bandwidths()):
        check_layer(l, lw)
        if lw.filters.bandwidth != B:
            raise ShapeMismatchError(f"layer filter bandwidth {lw.filters.bandwidth} != {B}")
    if spec.kind == CLASSIFIER:
        if w.head_weight is None or w.head_weight.shape != (spec.n_classes, spec.n_features):
            raise ShapeMismatchError("classifier head weight has the wrong shape")


def _check_input(spec: NetworkSpec, x: FeatureMap):
    if x.domain != SPATIAL:
        raise ValueError("networks take spatial feature maps")
    if x.bandwidth != spec.bandwidth:
        raise ShapeMismatchError(f"network expects bandwidth {spec.bandwidth}, got {x.bandwidth}")
    if x.spins != tuple(sorted(spec.input_spins)):
        raise SpinSetError(f"network expects spins {spec.input_spins}, got {x.spins}")


def _run_layer(x, spec, lw, precision):
    return conv_layer_forward(x, lw.filters, lw.bn, spec, lw.bias, precision)


def classifier_features(x: FeatureMap, spec: NetworkSpec, w: NetworkWeights,
                        precision: str = "f64") -> FeatureMap:
    """Feature map after the last conv layer, before the head."""
    _check_input(spec, x)
    check_weights(spec, w)
    for l, lw in zip(spec.layers, w.layers):
        x = _run_layer(x, l, lw, precision)
    return x


def invariant_pool(x: FeatureMap) -> np.ndarray:
    """Quadrature mean of spin-0 channels and of the magnitudes of other spins."""
    q = quadrature_weights(x.bandwidth)
    parts = [q.mean(np.real(v) if s == 0 else np.abs(v)) for s, v in x.data.items()]
    return np.concatenate(parts, axis=-1)


def classifier_forward(x: FeatureMap, spec: NetworkSpec, w: NetworkWeights,
                       precision: str = "f64", return_features: bool = False):
    """Logits ``(..., n_classes)``."""
    feats = classifier_features(x, spec, w, precision)
    pooled = invariant_pool(feats)
    logits = pooled @ w.head_weight.T + w.head_bias
    return (logits, feats) if return_features else logits


def unet_forward(x: FeatureMap, spec: NetworkSpec, w: NetworkWeights, precision: str = "f64") -> FeatureMap:
    _check_input(spec, x)
    check_weights(spec, w)
    saved = {}
    for i, (l, lw) in enumerate(zip(spec.layers, w.layers)):
        if i in spec.skips:
            main = upsample(x) if l.upsample_before else x
            x = concat_channels(main, saved[spec.skips[i]])
            l = LayerSpec(**{**l.to_dict(), "upsample_before": False})
        pooled = l.pool_after
        if pooled:
            l = LayerSpec(**{**l.to_dict(), "pool_after": False})
        x = _run_layer(x, l, lw, precision)
        if pooled:
            saved[i] = x
            x = pool(x)
    return x


def forward(x: FeatureMap, spec: NetworkSpec, w: NetworkWeights, precision: str = "f64"):
    if spec.kind == CLASSIFIER:
        return classifier_forward(x, spec, w, precision)
    return unet_forward(x, spec, w, precision)


def set_training(w: NetworkWeights, training: bool):
    for state in w.bn_states():
        state.training = training


def calibrate_batch_norm(x: FeatureMap, spec: NetworkSpec, w: NetworkWeights, precision: str = "f64"):
    """Set every running statistic from one batch, layer by layer.

    Each state is put in training mode with momentum 1 for the pass, so that
    downstream layers see inputs normalized with the fresh statistics.
    """
    saved = []
    for state in w.bn_states():
        saved.append(state.momentum)
        state.momentum = 1.0
        state.running_mean = state.running_var = None
        state.training = True
    try:
        if spec.kind == CLASSIFIER:
            classifier_features(x, spec, w, precision)
        else:
            unet_forward(x, spec, w, precision)
    finally:
        for state, m in zip(w.bn_states(), saved):
            state.momentum = m
            state.training = False
    return w


def _layer_arrays(lw: LayerWeights, prefix: str) -> dict:
    out = {f"{prefix}.anchors": lw.filters.anchors}
    if lw.bias is not None:
        out[f"{prefix}.bias"] = lw.bias
    for s, st in lw.bn.items():
        p = f"{prefix}.bn{s}"
        out[f"{p}.weight"] = st.weight
        out[f"{p}.shift"] = st.bias
        if st.initialized:
            out[f"{p}.mean"] = st.running_mean
            out[f"{p}.var"] = st.running_var
    return out


def weights_to_arrays(w: NetworkWeights) -> dict:
    arrays = {}
    for i, lw in enumerate(w.layers):
        arrays.update(_layer_arrays(lw, f"layer{i}"))
    if w.head_weight is not None:
        arrays["head.weight"] = w.head_weight
        arrays["head.bias"] = w.head_bias
    return arrays


def weights_from_arrays(spec: NetworkSpec, arrays: dict) -> NetworkWeights:
    layers = []
    for i, (l, B) in enumerate(zip(spec.layers, spec.layer_bandwidths())):
        p = f"layer{i}"
        try:
            filters = FilterParams(arrays[f"{p}.anchors"], l.spins_out, l.spins_in, B)
        except KeyError:
            raise ShapeMismatchError(f"missing anchors for layer {i}") from None
        bias = arrays.get(f"{p}.bias")
        bn = {}
        if l.batch_norm:
            for s in l.spins_out:
                q = f"{p}.bn{s}"
                if f"{q}.weight" not in arrays:
                    raise ShapeMismatchError(f"missing batch norm for layer {i} spin {s}")
                bn[s] = BatchNormState(l.out_channels, arrays.get(f"{q}.mean"), arrays.get(f"{q}.var"),
                                       np.asarray(arrays[f"{q}.weight"], float),
                                       np.asarray(arrays[f"{q}.shift"], float))
        layers.append(LayerWeights(filters, None if bias is None else np.asarray(bias, float), bn))
    w = NetworkWeights(layers, arrays.get("head.weight"), arrays.get("head.bias"))
    check_weights(spec, w)
    return w


def save_weights(directory: str, spec: NetworkSpec, w: NetworkWeights) -> dict:
    """Bundle with the network spec in the manifest and float64 arrays."""
    check_weights(spec, w)
    meta = {"kind": "weights", "network": spec.to_dict(), "parameters": weights_parameter_count(w)}
    return blobio.write_bundle(directory, weights_to_arrays(w), meta, dtype="<f8")


def load_weights(directory: str) -> tuple[NetworkSpec, NetworkWeights]:
    manifest, arrays = blobio.read_bundle(directory)
    if manifest.get("kind") != "weights" or "network" not in manifest:
        raise FormatError(f"{directory} is not a weights bundle")
    spec = NetworkSpec.from_dict(manifest["network"])
    return spec, weights_from_arrays(spec, arrays)
