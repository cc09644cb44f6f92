"""Wall-clock timing of transforms, spectral convolution and one conv layer.

Every timed call is run once untimed first so plan construction and table
caching stay out of the numbers.
"""
from __future__ import annotations

import time

import numpy as np

from . import backend
from .layers import LayerSpec, conv_layer_forward, init_layer
from .spectral import SPECTRAL, FeatureMap, FilterSpectrum, spin_conv
from .transform import SpinCoeffs, SpinField, get_plan, random_coeffs, swsft_forward, swsft_inverse

RATIO_RANGE = (4.0, 16.0)


def time_call(fn, reps: int) -> np.ndarray:
    fn()
    out = np.empty(reps)
    for i in range(reps):
        t0 = time.perf_counter()
        fn()
        out[i] = time.perf_counter() - t0
    return out


def _summary(t: np.ndarray) -> dict:
    return {"median": float(np.median(t)), "min": float(t.min()), "std": float(t.std()),
            "rel_spread": float(t.std() / np.median(t))}


def bench_bandwidth(B: int, spins, channels: int, reps: int, precision: str, rng) -> dict:
    plan = get_plan(B)
    spin = max(spins, key=abs)
    coeffs = SpinCoeffs(random_coeffs(rng, B, spin, (channels,)), spin)
    field = SpinField(plan.inverse(coeffs.coeffs, spin), spin)
    F = FeatureMap({s: random_coeffs(rng, B, s, (channels,)) for s in spins}, B, SPECTRAL)
    shape = (channels, channels, len(spins), len(spins), B)
    K = FilterSpectrum(rng.standard_normal(shape) + 1j * rng.standard_normal(shape), spins, spins)
    spec = LayerSpec(channels, channels, spins, spins, 4)
    lw = init_layer(spec, B, rng)
    x = F.to_spatial().map(lambda s, v: v.real if s == 0 else v)
    timings = {
        "swsft_forward": time_call(lambda: swsft_forward(field, precision=precision), reps),
        "swsft_inverse": time_call(lambda: swsft_inverse(coeffs, precision=precision), reps),
        "spin_conv": time_call(lambda: spin_conv(F, K), reps),
        "conv_layer_forward": time_call(
            lambda: conv_layer_forward(x, lw.filters, lw.bn, spec, lw.bias, precision), reps),
    }
    return {k: _summary(v) for k, v in timings.items()}


def fit_exponent(bandwidths, times) -> float:
    """Slope of log time against log B."""
    return float(np.polyfit(np.log(bandwidths), np.log(times), 1)[0])


def run_bench(bandwidths=(16, 32, 64), spins=(0, 1), reps: int = 5, channels: int = 16, seed: int = 0,
              precision: str = "f64", backends=None) -> dict:
    """Timing report per kernel backend; the active backend is restored afterwards."""
    if reps < 3:
        raise ValueError("need at least 3 repetitions")
    bandwidths = sorted(int(b) for b in bandwidths)
    backends = list(backend.available() if backends is None else backends)
    prev = backend.name()
    report = {"bandwidths": bandwidths, "spins": list(spins), "reps": reps, "channels": channels,
              "seed": seed, "precision": precision, "active_backend": prev, "backends": {}}
    try:
        for be in backends:
            backend.use(be)
            rng = np.random.default_rng(seed)
            per_b = {B: bench_bandwidth(B, tuple(spins), channels, reps, precision, rng) for B in bandwidths}
            fwd = [per_b[B]["swsft_forward"]["median"] for B in bandwidths]
            ratios = {f"{b2}/{b1}": t2 / t1 for (b1, t1), (b2, t2)
                      in zip(zip(bandwidths, fwd), zip(bandwidths[1:], fwd[1:]))}
            entry = {"timings": {str(B): v for B, v in per_b.items()}, "forward_ratios": ratios,
                     "forward_exponent": fit_exponent(bandwidths, fwd) if len(bandwidths) > 1 else None}
            if 32 in per_b and 64 in per_b:
                r = per_b[64]["swsft_forward"]["median"] / per_b[32]["swsft_forward"]["median"]
                entry["ratio_64_32"] = r
                entry["ratio_in_range"] = RATIO_RANGE[0] <= r <= RATIO_RANGE[1]
            report["backends"][be] = entry
    finally:
        backend.use(prev)
    if "compiled" in report["backends"] and "python" in report["backends"]:
        comp, py = report["backends"]["compiled"]["timings"], report["backends"]["python"]["timings"]
        report["speedup"] = {B: {k: py[B][k]["median"] / comp[B][k]["median"] for k in comp[B]} for B in comp}
    return report


def format_table(report: dict) -> str:
    lines = []
    for be, entry in report["backends"].items():
        lines.append(f"[{be}] median seconds ({report['channels']} channels, {report['precision']})")
        lines.append(f"{'B':>5} {'forward':>10} {'inverse':>10} {'spin_conv':>10} {'layer':>10} {'spread':>7}")
        for B, t in entry["timings"].items():
            lines.append(f"{B:>5} {t['swsft_forward']['median']:10.2e} {t['swsft_inverse']['median']:10.2e} "
                         f"{t['spin_conv']['median']:10.2e} {t['conv_layer_forward']['median']:10.2e} "
                         f"{t['swsft_forward']['rel_spread']:7.1%}")
        if entry.get("forward_exponent") is not None:
            lines.append(f"forward scaling exponent {entry['forward_exponent']:.2f}")
        if "ratio_64_32" in entry:
            ok = "ok" if entry["ratio_in_range"] else "OUT OF RANGE"
            lines.append(f"forward time ratio B=64/B=32: {entry['ratio_64_32']:.2f} "
                         f"(expected {RATIO_RANGE[0]:g}-{RATIO_RANGE[1]:g}, {ok})")
    if "speedup" in report:
        lines.append("compiled speedup over python (forward): " + ", ".join(
            f"B={B}: {v['swsft_forward']:.2f}x" for B, v in report["speedup"].items()))
    return "\n".join(lines)
