"""Command-line entry point: ``spinconv {gen-data,check,bench,transform,infer}``.

Exit codes: 0 success, 1 failed check, 2 usage error, 3 I/O or format error.
``SPINCONV_NUM_THREADS`` caps BLAS/OpenMP threads and the FFT worker count.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
THREAD_ENV = "SPINCONV_NUM_THREADS"
_BLAS_ENV = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class UsageError(Exception):
    pass


def _threads() -> int | None:
    raw = os.environ.get(THREAD_ENV)
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREAD_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{THREAD_ENV} must be a positive integer, got {raw!r}")
    return n


def _spins(text: str) -> tuple[int, ...]:
    try:
        spins = tuple(sorted({int(s) for s in text.split(",") if s.strip()}))
    except ValueError:
        raise argparse.ArgumentTypeError(f"spins must be comma-separated integers, got {text!r}") from None
    if not spins:
        raise argparse.ArgumentTypeError("spin set is empty")
    return spins


def _modes(text: str) -> tuple[str, str]:
    parts = text.upper().split("/")
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2 or any(p not in ("NR", "R") for p in parts):
        raise argparse.ArgumentTypeError(f"mode must be NR, R or TRAIN/TEST such as NR/R, got {text!r}")
    return parts[0], parts[1]


def _fault(text: str) -> tuple[int, int, int]:
    try:
        l, k, m = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("fault must be L,K,M") from None
    return l, k, m


def _write_json(path, obj):
    text = json.dumps(obj, indent=1, sort_keys=True, default=float)
    if path in (None, "-"):
        print(text)
    else:
        with open(path, "w") as f:
            f.write(text + "\n")


def cmd_check(args) -> int:
    from .checks import run_checks

    B = args.bandwidth or 32
    if B < 2:
        raise UsageError("bandwidth must be >= 2")
    report = run_checks(B, args.spins, args.seed, args.precision, args.inject_fault)
    print(f"check: bandwidth={B} spins={list(args.spins)} seed={args.seed} precision={args.precision} "
          f"backend={report['backend']}")
    for c in report["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        extra = f"  ({c['error']})" if "error" in c else ""
        print(f"  {status} {c['name']:<26} max_error={c['max_error']:.3e} tol={c['tolerance']:.0e}{extra}")
    cov = report["coverage"]
    print(f"  coverage {cov['covered']}/{cov['expected']} public operations"
          + (f", missing {cov['missing']}" if cov["missing"] else ""))
    print("all checks passed" if report["passed"] else "CHECKS FAILED")
    if args.output:
        _write_json(args.output, report)
    return EXIT_OK if report["passed"] else EXIT_CHECK


def cmd_bench(args) -> int:
    from .bench import format_table, run_bench

    bandwidths = args.bandwidth_list or [16, 32, 64]
    for B in bandwidths:
        if B < 8 or B > 128 or B & (B - 1):
            raise UsageError(f"bench bandwidths must be powers of two in [8, 128], got {B}")
    if args.reps < 3:
        raise UsageError("--reps must be >= 3")
    report = run_bench(bandwidths, args.spins, args.reps, args.channels, args.seed, args.precision)
    print(f"bench: seed={args.seed} reps={args.reps}")
    print(format_table(report))
    if args.output:
        _write_json(args.output, report)
    return EXIT_OK


def _read_fields(directory):
    from .data import blobio
    from .errors import FormatError

    manifest, arrays = blobio.read_bundle(directory)
    if manifest.get("kind") not in ("spatial", "spectral"):
        raise FormatError("transform input must be a 'spatial' or 'spectral' bundle")
    B = manifest.get("bandwidth")
    if not isinstance(B, int) or B < 1:
        raise FormatError(f"bad bandwidth {B!r} in manifest")
    fields = {}
    for name, a in arrays.items():
        if not name.startswith("spin"):
            raise FormatError(f"unknown blob {name!r}; expected names like 'spin0', 'spin1'")
        try:
            s = int(name[4:])
        except ValueError:
            raise FormatError(f"unknown spin key {name!r}") from None
        if abs(s) >= B:
            raise FormatError(f"spin {s} not representable at bandwidth {B}")
        if a.ndim < 3 or a.shape[-3] == 0:
            raise FormatError(f"blob {name!r} has an empty channel list")
        fields[s] = a
    if not fields:
        raise FormatError("bundle holds no fields")
    return manifest, B, fields


def write_fields(directory, fields: dict, bandwidth: int, domain: str, precision: str = "f32", meta=None):
    """Write ``{spin: array}`` as a transform bundle readable by ``spinconv transform``."""
    from .data import blobio

    dtype = "<f4" if precision == "f32" else "<f8"
    m = {"kind": domain, "bandwidth": int(bandwidth), "spins": sorted(int(s) for s in fields), **(meta or {})}
    return blobio.write_bundle(directory, {f"spin{s}": v for s, v in sorted(fields.items())}, m, dtype)


def cmd_transform(args) -> int:
    from .transform import get_plan

    if not args.input or not args.output:
        raise UsageError("transform needs --input and --output")
    manifest, B, fields = _read_fields(args.input)
    if args.bandwidth and args.bandwidth != B:
        raise UsageError(f"--bandwidth {args.bandwidth} disagrees with the input bandwidth {B}")
    want = "spectral" if args.inverse else "spatial"
    if manifest["kind"] != want:
        raise UsageError(f"{'inverse' if args.inverse else 'forward'} transform needs a {want} input, "
                         f"got {manifest['kind']}")
    plan = get_plan(B)
    if args.inverse:
        out = {s: plan.inverse(v, s, args.precision) for s, v in fields.items()}
        out = {s: (v.real if s == 0 and manifest.get("real_s0", True) else v) for s, v in out.items()}
    else:
        out = {s: plan.forward(v, s, args.precision) for s, v in fields.items()}
    domain = "spectral" if not args.inverse else "spatial"
    write_fields(args.output, out, B, domain, args.precision)
    print(f"transform: {'inverse' if args.inverse else 'forward'} B={B} spins={sorted(out)} "
          f"seed={args.seed} -> {args.output}")
    return EXIT_OK


def cmd_gen_data(args) -> int:
    from .data.svfmnist import DatasetConfig, dataset_generate

    if not args.input or not args.output:
        raise UsageError("gen-data needs --input (MNIST directory) and --output")
    if not os.path.isdir(args.input):
        raise FileNotFoundError(f"MNIST directory {args.input} does not exist")
    train_mode, test_mode = args.mode
    try:
        cfg = DatasetConfig(args.task or "classify-vector", args.input, train_mode, test_mode,
                            args.bandwidth or 32, args.seed, args.limit)
    except ValueError as e:
        raise UsageError(str(e)) from None
    manifest = dataset_generate(cfg, args.output)
    counts = {k: v["count"] for k, v in manifest["splits"].items()}
    print(f"gen-data: task={cfg.task} mode={train_mode}/{test_mode} B={cfg.bandwidth} seed={cfg.seed} "
          f"samples={counts} -> {args.output}")
    return EXIT_OK


def _network_for_task(task: str, B: int):
    from .networks import build_classifier, build_unet

    if task in ("classify-scalar", "classify"):
        return build_classifier((0,), B)
    if task == "classify-vector":
        return build_classifier((1,), B)
    if task.startswith("img2vec"):
        return build_unet((0,), (1,), B)
    if task == "vec2img-easy":
        return build_unet((1,), (0,), B, output_channels=1)
    if task == "vec2img-hard":
        return build_unet((1,), (0,), B, output_channels=3)
    raise UsageError(f"unknown task {task!r}")


def cmd_infer(args) -> int:
    import numpy as np

    from .data.svfmnist import load_split
    from .networks import (CLASSIFIER, calibrate_batch_norm, classifier_forward, init_weights, load_weights,
                           save_weights, unet_forward)
    from .spectral import FeatureMap
    from .transform import get_plan, random_coeffs

    rng = np.random.default_rng(args.seed)
    if args.weights:
        spec, w = load_weights(args.weights)
    else:
        spec = _network_for_task(args.task or "classify-vector", args.bandwidth or 32)
        w = init_weights(spec, rng)
    B = spec.bandwidth
    spin = spec.input_spins[0]
    if args.input:
        data = load_split(args.input, args.split)
        if not 0 <= args.index < data["input"].shape[0]:
            raise UsageError(f"--index {args.index} outside the split")
        x = data["input"][args.index:args.index + 1].astype(np.complex128 if spin else np.float64)
    else:
        x = get_plan(B).inverse(random_coeffs(rng, B, spin, (1, 1)), spin)
        x = x.real if spin == 0 else x
    if x.shape[-2:] != (2 * B, 2 * B):
        raise UsageError(f"input grid {x.shape[-2:]} does not match the network bandwidth {B}")
    feat = FeatureMap({spin: x}, B)
    # fresh weights carry identity batch norm, under which the magnitude
    # nonlinearity is quadratic and activations blow up or vanish with depth
    calibrate = args.calibrate if args.calibrate is not None else not args.weights
    if calibrate:
        calibrate_batch_norm(feat, spec, w)
    shift = 4
    shifted = feat.map(lambda _, v: np.roll(v, shift, axis=-1))
    print(f"infer: network={spec.kind} input_spins={list(spec.input_spins)} B={B} seed={args.seed} "
          f"calibrated_bn={calibrate}")
    if spec.kind == CLASSIFIER:
        logits = classifier_forward(feat, spec, w, args.precision)
        logits_s = classifier_forward(shifted, spec, w, args.precision)
        gap = float(np.abs(logits_s - logits).max() / max(np.abs(logits).max(), 1e-300))
        print("logits:", " ".join(f"{v:+.5f}" for v in logits.ravel()))
        print(f"phi-shift ({shift} steps) invariance gap: {gap:.3e}")
        result = {"logits": logits.ravel().tolist(), "shift_gap": gap}
        if args.output:
            _write_json(args.output, {**result, "seed": args.seed, "network": spec.to_dict()})
    else:
        y = unet_forward(feat, spec, w, args.precision)
        ys = unet_forward(shifted, spec, w, args.precision)
        gap = max(float(np.abs(ys[s] - np.roll(y[s], shift, axis=-1)).max() / max(np.abs(y[s]).max(), 1e-300))
                  for s in y.spins)
        print(f"output spins={list(y.spins)} shape={[list(v.shape) for v in y.data.values()]}")
        print(f"phi-shift ({shift} steps) equivariance gap: {gap:.3e}")
        if args.output:
            write_fields(args.output, y.data, B, "spatial", args.precision,
                         {"seed": args.seed, "shift_gap": gap, "network": spec.to_dict()})
    if args.save_weights:
        save_weights(args.save_weights, spec, w)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--bandwidth", type=int, default=None, help="bandwidth B (default 32)")
    common.add_argument("--spins", type=_spins, default=(0, 1), help="comma-separated spin weights (default 0,1)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--precision", choices=("f32", "f64"), default="f64")
    common.add_argument("--input", default=None)
    common.add_argument("--output", default=None)

    p = argparse.ArgumentParser(prog="spinconv", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", parents=[common], help="generate an SVF-MNIST bundle")
    g.add_argument("--task", choices=("classify-scalar", "classify-vector", "img2vec-easy", "img2vec-hard",
                                      "vec2img-easy", "vec2img-hard"), default="classify-vector")
    g.add_argument("--mode", type=_modes, default=("NR", "NR"), help="NR, R or TRAIN/TEST such as NR/R")
    g.add_argument("--limit", type=int, default=None, help="cap on samples per split")
    g.set_defaults(func=cmd_gen_data)

    c = sub.add_parser("check", parents=[common], help="run the invariant checks")
    c.add_argument("--inject-fault", type=_fault, default=None, help=argparse.SUPPRESS)
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("bench", parents=[common], help="time transforms and layers")
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--channels", type=int, default=16)
    b.add_argument("--bandwidths", dest="bandwidth_list", type=int, nargs="+", default=None,
                   help="bandwidths to time (default 16 32 64)")
    b.set_defaults(func=cmd_bench)

    t = sub.add_parser("transform", parents=[common], help="forward or inverse transform of a bundle")
    t.add_argument("--inverse", action="store_true", help="coefficients to samples")
    t.set_defaults(func=cmd_transform)

    i = sub.add_parser("infer", parents=[common], help="forward pass of a classifier or U-Net")
    i.add_argument("--task", default="classify-vector")
    i.add_argument("--weights", default=None, help="weights bundle (default: random from --seed)")
    i.add_argument("--save-weights", default=None)
    i.add_argument("--split", choices=("train", "test"), default="test")
    i.add_argument("--index", type=int, default=0)
    i.add_argument("--calibrate", action=argparse.BooleanOptionalAction, default=None,
                   help="set batch-norm statistics from the input (default: on for fresh weights)")
    i.set_defaults(func=cmd_infer)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bench" and args.bandwidth and not args.bandwidth_list:
        args.bandwidth_list = [args.bandwidth]
    try:
        n = _threads()
        if n:
            for var in _BLAS_ENV:
                os.environ.setdefault(var, str(n))
            from . import fft
            fft.set_workers(n)
        return args.func(args)
    except UsageError as e:
        print(f"spinconv {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as e:
        from .errors import FormatError

        if isinstance(e, (OSError, FormatError)):
            print(f"spinconv {args.command}: I/O error: {e}", file=sys.stderr)
            return EXIT_IO
        print(f"spinconv {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
