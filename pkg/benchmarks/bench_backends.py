"""Compiled vs pure-Python kernels: raw kernel timings and end-to-end transforms.

    python benchmarks/bench_backends.py [--bandwidths 16 32 64] [--reps 5] [--output bench.json]
"""
import argparse
import json

import numpy as np

from spinconv import _fallback, backend
from spinconv.bench import format_table, run_bench, time_call
from spinconv.transform import get_plan, random_coeffs


def kernel_timings(bandwidths, reps, seed=0):
    """Median seconds of each kernel called directly, per backend."""
    rng = np.random.default_rng(seed)
    mods = {"python": _fallback}
    if "compiled" in backend.available():
        from spinconv import _kernels
        mods["compiled"] = _kernels
    out = {name: {} for name in mods}
    for B in bandwidths:
        table = np.ascontiguousarray(get_plan(B).spin_table(1))
        shape = (16,) + table.shape[1:]
        tori = np.ascontiguousarray(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        coeffs = np.ascontiguousarray(random_coeffs(rng, B, 1, (16,)))
        for name, mod in mods.items():
            out[name][B] = {
                "delta_packed": float(np.median(time_call(lambda: mod.delta_packed(B - 1), reps))),
                "contract_forward": float(np.median(time_call(lambda: mod.contract_forward(table, tori, 1), reps))),
                "contract_inverse": float(np.median(time_call(lambda: mod.contract_inverse(table, coeffs, 1),
                                                              reps))),
            }
    return out


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--bandwidths", type=int, nargs="+", default=[16, 32, 64])
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--output", default=None)
    args = p.parse_args()

    kernels = kernel_timings(args.bandwidths, args.reps)
    print("kernel medians in seconds (16 channels, spin 1)")
    print(f"{'backend':>9} {'B':>4} {'delta':>10} {'fwd':>10} {'inv':>10}")
    for name, rows in kernels.items():
        for B, t in rows.items():
            print(f"{name:>9} {B:>4} {t['delta_packed']:10.2e} {t['contract_forward']:10.2e} "
                  f"{t['contract_inverse']:10.2e}")
    if len(kernels) == 2:
        for B in args.bandwidths:
            speed = {k: kernels["python"][B][k] / kernels["compiled"][B][k] for k in kernels["python"][B]}
            print(f"speedup B={B}: " + ", ".join(f"{k} x{v:.1f}" for k, v in speed.items()))
    else:
        print("compiled kernels not built; only the fallback was timed")

    print()
    report = run_bench(args.bandwidths, reps=args.reps)
    print(format_table(report))
    if args.output:
        with open(args.output, "w") as f:
            json.dump({"kernels": kernels, "end_to_end": report}, f, indent=1, default=float)


if __name__ == "__main__":
    main()
