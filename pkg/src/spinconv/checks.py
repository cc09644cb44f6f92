"""Named invariant checks with a coverage registry.

Each check returns the largest error it saw and the tolerance it is held to.
``run_checks`` runs them all and reports whether every public operation of
harmonics, transform, spectral and layers was exercised at least once.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import backend, oracles
from .harmonics import Rotation, compute_delta_table, swsh_eval, wigner_D, wigner_d
from .layers import (BatchNormState, FilterParams, LayerSpec, conv_layer_forward, filter_expand, init_layer,
                     magnitude_bn_relu, pool, real_relu_s0, upsample)
from .networks import (build_classifier, build_unet, classifier_forward, init_weights, parameter_count,
                       unet_forward)
from .spectral import (SPECTRAL, FeatureMap, FilterSpectrum, bandlimit, filter_from_coeffs, rotate_coeffs,
                       rotate_feature_map, sphere_conv, sphere_corr, spin_conv, spin_corr)
from .transform import (SpinCoeffs, SpinField, SphericalGrid, get_plan, quadrature_weights, random_coeffs,
                        swsft_forward, swsft_inverse, torus_extend)

PUBLIC_OPS = {
    "harmonics": ("DeltaTable", "compute_delta_table", "wigner_d", "wigner_D", "swsh_eval", "Rotation"),
    "transform": ("SphericalGrid", "quadrature_weights", "torus_extend", "swsft_forward", "swsft_inverse",
                  "TransformPlan"),
    "spectral": ("FeatureMap", "rotate_coeffs", "spin_conv", "spin_corr", "sphere_conv", "sphere_corr",
                 "filter_from_coeffs", "bandlimit"),
    "layers": ("filter_expand", "real_relu_s0", "magnitude_bn_relu", "BatchNormState", "pool", "upsample",
               "conv_layer_forward", "build_classifier", "classifier_forward", "build_unet", "unet_forward"),
}

TOL_F64 = 1e-10
TOL_F32 = 1e-4


@dataclass
class CheckContext:
    bandwidth: int = 32
    spins: tuple = (0, 1)
    seed: int = 0
    precision: str = "f64"
    fault: tuple | None = None
    table: object = None
    rng: np.random.Generator = None

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)
        table = compute_delta_table(max(self.bandwidth - 1, 8))
        self.table = table.with_fault(*self.fault) if self.fault else table

    @property
    def tol(self) -> float:
        return TOL_F64 if self.precision == "f64" else TOL_F32

    def plan(self, B: int | None = None):
        B = self.bandwidth if B is None else B
        return get_plan(B, self.table) if self.table.l_max == B - 1 else get_plan(B)


@dataclass
class CheckResult:
    name: str
    max_error: float
    tolerance: float
    covers: tuple
    seconds: float = 0.0
    error: str | None = None
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.error is None and bool(np.isfinite(self.max_error)) and self.max_error <= self.tolerance

    def to_dict(self) -> dict:
        d = {"name": self.name, "max_error": float(self.max_error), "tolerance": self.tolerance,
             "passed": self.passed, "covers": list(self.covers), "seconds": round(self.seconds, 4)}
        if self.error:
            d["error"] = self.error
        if self.detail:
            d["detail"] = self.detail
        return d


_REGISTRY: list = []


def check(name: str, covers: tuple):
    def deco(fn):
        _REGISTRY.append((name, covers, fn))
        return fn
    return deco


def registered() -> list[str]:
    return [n for n, _, _ in _REGISTRY]


def _rel(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def _samples(ctx, B, spin, shape=()):
    """Grid samples of a random bandlimited field; real for spin 0."""
    x = ctx.plan(B).inverse(random_coeffs(ctx.rng, B, spin, shape), spin)
    return x.real if spin == 0 else x


@check("round_trip", ("harmonics.DeltaTable", "transform.SphericalGrid", "transform.swsft_forward",
                      "transform.swsft_inverse", "transform.TransformPlan"))
def _round_trip(ctx):
    B = ctx.bandwidth
    errs = {}
    for s in sorted(set(ctx.spins) | {-1, 2}):
        if abs(s) >= B:
            continue
        c = SpinCoeffs(random_coeffs(ctx.rng, B, s), s)
        f = swsft_inverse(c, SphericalGrid(B), ctx.table if ctx.table.l_max == B - 1 else None)
        back = swsft_forward(f, ctx.table if ctx.table.l_max == B - 1 else None, precision=ctx.precision)
        errs[s] = _rel(back.coeffs, c.coeffs)
    return max(errs.values()), ctx.tol, {"per_spin": errs}


@check("direct_quadrature", ("transform.quadrature_weights",))
def _direct(ctx):
    B = 8
    c = random_coeffs(ctx.rng, B, 0)
    f = get_plan(B).inverse(c, 0).real
    ref = oracles.direct_forward_s0(f, B)
    return _rel(get_plan(B).forward(f, 0), ref), 1e-10, {}


@check("parseval", ("transform.quadrature_weights",))
def _parseval(ctx):
    B = ctx.bandwidth
    q = quadrature_weights(B)
    err = 0.0
    for s in ctx.spins:
        c = random_coeffs(ctx.rng, B, s)
        f = ctx.plan().inverse(c, s)
        err = max(err, abs(q.integrate(np.abs(f) ** 2) - np.sum(np.abs(c) ** 2)) / np.sum(np.abs(c) ** 2))
    return err, 1e-10, {}


@check("torus_bandlimit", ("transform.torus_extend",))
def _torus(ctx):
    B = ctx.bandwidth
    err = 0.0
    for s in ctx.spins:
        f = SpinField(ctx.plan().inverse(random_coeffs(ctx.rng, B, s), s), s)
        spec = np.fft.fft(torus_extend(f), axis=-2)
        p = np.fft.fftfreq(4 * B, 1.0 / (4 * B))
        err = max(err, np.abs(spec[np.abs(p) >= B]).max() / np.abs(spec).max())
    return err, 1e-10, {}


@check("wigner_oracle", ("harmonics.compute_delta_table", "harmonics.wigner_d"))
def _wigner(ctx):
    err = 0.0
    for th in ctx.rng.uniform(0, np.pi, 20):
        for l in range(9):
            err = max(err, np.abs(wigner_d(ctx.table, l, th) - oracles.wigner_d_matrix_factorial(l, th)).max())
    return err, 1e-10, {}


@check("wigner_D_oracle", ("harmonics.wigner_D", "harmonics.Rotation"))
def _wigner_D(ctx):
    err = 0.0
    for _ in range(5):
        g = Rotation.random(ctx.rng)
        for l in range(9):
            ref = oracles.wigner_D_expm(l, g.alpha, g.beta, g.gamma)
            err = max(err, np.abs(wigner_D(ctx.table, l, g) - ref).max())
        h = Rotation.random(ctx.rng)
        err = max(err, np.abs(wigner_D(ctx.table, 5, g) @ wigner_D(ctx.table, 5, h)
                              - wigner_D(ctx.table, 5, g @ h)).max())
    return err, 1e-10, {}


@check("swsh_oracle", ("harmonics.swsh_eval",))
def _swsh(ctx):
    th = ctx.rng.uniform(0.2, np.pi - 0.2, 16)
    ph = ctx.rng.uniform(0, 2 * np.pi, 16)
    err = 0.0
    for l in range(8):
        for m in range(-l, l + 1):
            err = max(err, np.abs(swsh_eval(ctx.table, 0, l, m, th, ph) - oracles.ylm_scipy(l, m, th, ph)).max())
    return err, 1e-10, {}


@check("swsh_spin1_oracle", ("harmonics.swsh_eval",))
def _swsh1(ctx):
    # reference built with central differences of step 1e-5
    th = ctx.rng.uniform(0.2, np.pi - 0.2, 16)
    ph = ctx.rng.uniform(0, 2 * np.pi, 16)
    err = 0.0
    for l in range(1, 8):
        for m in range(-l, l + 1):
            ref = oracles.swsh_spin_raising(l, 1, m, th, ph)
            err = max(err, np.abs(swsh_eval(ctx.table, 1, l, m, th, ph) - ref).max())
    return err, 1e-7, {}


@check("rotation_pointwise", ("spectral.rotate_coeffs", "harmonics.Rotation"))
def _rot_point(ctx):
    B = 8
    c = random_coeffs(ctx.rng, B, 0)
    g = Rotation.random(ctx.rng)
    th = ctx.rng.uniform(0, np.pi, 12)
    ph = ctx.rng.uniform(0, 2 * np.pi, 12)
    rotated = oracles.direct_synthesis(rotate_coeffs(c, g, ctx.table), 0, th, ph, ctx.table)
    direct = oracles.direct_synthesis(c, 0, *g.apply(th, ph), ctx.table)
    return _rel(rotated, direct), 1e-10, {}


def _feature(ctx, B, spins, channels):
    return FeatureMap({s: random_coeffs(ctx.rng, B, s, (channels,)) for s in spins}, B, SPECTRAL)


@check("conv_equivariance", ("spectral.FeatureMap", "spectral.spin_conv", "spectral.spin_corr",
                             "spectral.filter_from_coeffs"))
def _equivariance(ctx):
    B = min(ctx.bandwidth, 16)
    spins = tuple(s for s in ctx.spins if abs(s) < B) or (0,)
    F = _feature(ctx, B, spins, 3)
    K = FilterSpectrum(ctx.rng.standard_normal((2, 3, len(spins), len(spins), B))
                       + 1j * ctx.rng.standard_normal((2, 3, len(spins), len(spins), B)),
                       spins, spins).enforce_support()
    kern = FeatureMap({s: random_coeffs(ctx.rng, B, s, (2, 3)) for s in spins}, B, SPECTRAL)
    Kc = filter_from_coeffs(kern, spins)
    g = Rotation.random(ctx.rng)
    Fg = rotate_feature_map(F, g, ctx.table)
    errs = []
    for op, filt in ((spin_conv, K), (spin_corr, Kc)):
        lhs = op(Fg, filt)
        rhs = rotate_feature_map(op(F, filt), g, ctx.table)
        errs.append(max(_rel(lhs[s], rhs[s]) for s in lhs.spins))
    return max(errs), 1e-10, {"spin_conv": errs[0], "spin_corr": errs[1]}


@check("special_case_reduction", ("spectral.sphere_conv", "spectral.sphere_corr"))
def _reduction(ctx):
    B = min(ctx.bandwidth, 16)
    f = random_coeffs(ctx.rng, B, 0)
    k = random_coeffs(ctx.rng, B, 0)
    F = FeatureMap({0: f[None]}, B, SPECTRAL)
    K = FilterSpectrum(k[None, None, None, None, :, B - 1], (0,), (0,))
    l = np.arange(B)
    const = 2 * np.pi * np.sqrt(4 * np.pi / (2 * l + 1))
    e1 = _rel(spin_conv(F, K)[0][0] * const[:, None], sphere_conv(f, k))
    Kc = filter_from_coeffs(FeatureMap({0: k[None, None]}, B, SPECTRAL), (0,))
    e2 = _rel(spin_corr(F, Kc)[0][0], sphere_corr(f, k)[..., B - 1])
    return max(e1, e2), 1e-12, {"conv": e1, "corr": e2}


@check("bandlimit", ("spectral.bandlimit",))
def _bandlimit(ctx):
    B = ctx.bandwidth
    c = SpinCoeffs(random_coeffs(ctx.rng, B, 1), 1)
    small = bandlimit(c, B // 2)
    ref = c.coeffs[: B // 2, B - B // 2: B + B // 2 - 1]
    return _rel(small.coeffs, ref), 0.0, {}


@check("filter_expand", ("layers.filter_expand",))
def _filter_expand(ctx):
    B = 9
    a = ctx.rng.standard_normal((2, 2, 2, 2, 4)) + 1j * ctx.rng.standard_normal((2, 2, 2, 2, 4))
    b = ctx.rng.standard_normal(a.shape) + 1j * ctx.rng.standard_normal(a.shape)
    spins = (0, 1)
    ex = lambda x: filter_expand(FilterParams(x, spins, spins, B)).coeffs
    lin = np.abs(ex(2 * a - 3 * b) - (2 * ex(a) - 3 * ex(b))).max()
    ramp = filter_expand(FilterParams(np.array([0.0, 1.0]).reshape(1, 1, 1, 1, 2), (0,), (0,), B)).coeffs
    interp = np.abs(ramp[0, 0, 0, 0] - oracles.linear_interp_oracle([0, 1], B)).max()
    return max(lin, interp), 1e-12, {"linearity": lin, "interpolation": interp}


@check("nonlinearity", ("layers.real_relu_s0", "layers.magnitude_bn_relu", "layers.BatchNormState"))
def _nonlinearity(ctx):
    x = ctx.rng.standard_normal((3, 8, 8)) + 1j * ctx.rng.standard_normal((3, 8, 8))
    relu = real_relu_s0(SpinField(x, 0)).samples
    e_relu = np.abs(relu - np.maximum(x.real, 0)).max()
    st = BatchNormState(3, np.full(3, 1.0), np.full(3, 0.5), weight=np.array([1.0, 2.0, 0.5]),
                        bias=np.array([0.1, -0.2, 0.0]))
    y = magnitude_bn_relu(SpinField(x, 1), st).samples
    nz = np.abs(y) > 0
    e_phase = np.abs(y[nz] / np.abs(y[nz]) - x[nz] / np.abs(x[nz])).max()
    psi = np.exp(1j * ctx.rng.uniform(0, 2 * np.pi))
    e_global = np.abs(magnitude_bn_relu(SpinField(psi * x, 1), st).samples - psi * y).max()
    ident = magnitude_bn_relu(SpinField(x, 1), BatchNormState.identity(3)).samples
    e_ident = np.abs(ident - x * np.abs(x)).max()
    err = max(e_relu, e_phase, e_global, e_ident)
    return err, 1e-12, {"relu": e_relu, "phase": e_phase, "global_phase": e_global, "identity_bn": e_ident}


@check("pool_upsample", ("layers.pool", "layers.upsample"))
def _pool(ctx):
    B = ctx.bandwidth // 2
    f = FeatureMap({0: ctx.rng.standard_normal((2, 2 * B, 2 * B))}, B)
    back = pool(upsample(f))
    const = pool(FeatureMap({0: np.full((1, 4 * B, 4 * B), 3.0)}, 2 * B))[0]
    return max(np.abs(back[0] - f[0]).max(), np.abs(const - 3.0).max()), 1e-15, {}


@check("layer_shift_equivariance", ("layers.conv_layer_forward",))
def _layer_shift(ctx):
    B = ctx.bandwidth
    spins = tuple(ctx.spins)
    spec = LayerSpec(2, 3, spins, spins, 4, pool_after=B >= 4)
    lw = init_layer(spec, B, ctx.rng)
    x = FeatureMap({s: _samples(ctx, B, s, (2,)) for s in spins}, B)
    step = 2
    y = conv_layer_forward(x, lw.filters, lw.bn, spec, lw.bias, ctx.precision)
    xs = x.map(lambda s, v: np.roll(v, step, axis=-1))
    ys = conv_layer_forward(xs, lw.filters, lw.bn, spec, lw.bias, ctx.precision)
    k = step * y.bandwidth // B
    err = max(_rel(ys[s], np.roll(y[s], k, axis=-1)) for s in y.spins)
    return err, 1e-5 if ctx.precision == "f32" else 1e-10, {}


@check("network_shift_symmetry", ("layers.build_classifier", "layers.classifier_forward",
                                  "layers.build_unet", "layers.unet_forward"))
def _network_shift(ctx):
    # the deepest layers keep 3 anchors at B/4, so small check bandwidths are raised
    B = max(ctx.bandwidth, 16)
    errs = {}
    for s in (0, 1):
        x = FeatureMap({s: _samples(ctx, B, s, (1,))}, B)
        xs = x.map(lambda _, v: np.roll(v, 4, axis=-1))
        spec = build_classifier((s,), B)
        w = init_weights(spec, ctx.rng)
        logits = classifier_forward(x, spec, w, ctx.precision)
        errs[f"classifier_s{s}"] = _rel(classifier_forward(xs, spec, w, ctx.precision), logits)
        uspec = build_unet((s,), bandwidth=B)
        uw = init_weights(uspec, ctx.rng)
        y = unet_forward(x, uspec, uw, ctx.precision)
        ys = unet_forward(xs, uspec, uw, ctx.precision)
        errs[f"unet_s{s}"] = max(_rel(ys[q], np.roll(y[q], 4, axis=-1)) for q in y.spins)
    return max(errs.values()), 1e-5, errs


@check("architecture_budget", ())
def _budget(ctx):
    n_cls = parameter_count(build_classifier((0,)))
    n_unet = max(parameter_count(build_unet((0,))), parameter_count(build_unet((1,))))
    dev = max(abs(n_cls / 58_000 - 1), abs(n_unet / 112_000 - 1))
    return dev, 0.05, {"classifier": n_cls, "unet": n_unet}


def coverage(names=None) -> dict:
    names = set(registered() if names is None else names)
    covered = {c for n, covers, _ in _REGISTRY if n in names for c in covers}
    expected = {f"{mod}.{op}" for mod, ops in PUBLIC_OPS.items() for op in ops}
    missing = sorted(expected - covered)
    return {"expected": len(expected), "covered": len(expected & covered), "missing": missing,
            "complete": not missing}


def run_checks(bandwidth: int = 32, spins=(0, 1), seed: int = 0, precision: str = "f64",
               fault: tuple | None = None, names=None) -> dict:
    """Run the registered checks and return a JSON-ready report."""
    if precision not in ("f32", "f64"):
        raise ValueError(f"unknown precision {precision!r}")
    ctx = CheckContext(int(bandwidth), tuple(int(s) for s in spins), int(seed), precision,
                       tuple(fault) if fault else None)
    results = []
    for name, covers, fn in _REGISTRY:
        if names is not None and name not in names:
            continue
        t0 = time.perf_counter()
        try:
            err, tol, detail = fn(ctx)
            res = CheckResult(name, float(err), float(tol), covers, detail=detail)
        except Exception as e:  # a crashing check is a failed check
            res = CheckResult(name, float("inf"), 0.0, covers, error=f"{type(e).__name__}: {e}")
        res.seconds = time.perf_counter() - t0
        results.append(res)
    cov = coverage([r.name for r in results])
    passed = all(r.passed for r in results) and (names is not None or cov["complete"])
    return {
        "bandwidth": ctx.bandwidth, "spins": list(ctx.spins), "seed": ctx.seed, "precision": precision,
        "backend": backend.name(), "fault": list(fault) if fault else None,
        "checks": [r.to_dict() for r in results], "coverage": cov, "passed": passed,
    }
