"""Spin-weighted spherical harmonic transforms and spherical CNN layers.

Submodules are imported lazily so that thread settings chosen by the CLI take
effect before numpy loads. The common names are re-exported here.
"""
from importlib import import_module

__version__ = "0.1.0"

_EXPORTS = {
    "harmonics": ("DeltaTable", "Rotation", "compute_delta_table", "shared_delta_table", "swsh_eval",
                  "wigner_D", "wigner_d"),
    "transform": ("QuadratureWeights", "SpinCoeffs", "SpinField", "SphericalGrid", "TransformPlan",
                  "get_plan", "quadrature_weights", "random_coeffs", "swsft_forward", "swsft_inverse",
                  "torus_extend"),
    "spectral": ("FeatureMap", "FilterSpectrum", "bandlimit", "filter_from_coeffs", "rotate_coeffs",
                 "rotate_feature_map", "sphere_conv", "sphere_corr", "spin_conv", "spin_corr"),
    "layers": ("BatchNormState", "FilterParams", "LayerSpec", "conv_layer_forward", "filter_expand",
               "magnitude_bn_relu", "pool", "real_relu_s0", "upsample"),
    "networks": ("NetworkSpec", "build_classifier", "build_unet", "classifier_forward", "init_weights",
                 "load_weights", "parameter_count", "save_weights", "unet_forward"),
    "errors": ("SpinConvError",),
}
_WHERE = {name: mod for mod, names in _EXPORTS.items() for name in names}

__all__ = sorted(_WHERE)


def __getattr__(name):
    mod = _WHERE.get(name)
    if mod is None:
        raise AttributeError(f"module 'spinconv' has no attribute {name!r}")
    value = getattr(import_module(f".{mod}", __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(__all__))
