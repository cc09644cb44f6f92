import json

import numpy as np
import pytest

from spinconv.cli import EXIT_CHECK, EXIT_IO, EXIT_OK, EXIT_USAGE, main, write_fields
from spinconv.data import blobio
from spinconv.data.svfmnist import load_split
from spinconv.networks import build_classifier, save_weights, zero_weights
from spinconv.transform import get_plan, random_coeffs


def test_check_passes_and_writes_report(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["check", "--bandwidth", "8", "--output", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "all checks passed" in text
    report = json.loads(out.read_text())
    names = [c["name"] for c in report["checks"]]
    assert len(names) == len(set(names)) and report["passed"]
    assert sum(line.strip().startswith("PASS") for line in text.splitlines()) == len(names)
    assert not report["coverage"]["missing"]


def test_check_with_injected_fault_fails(capsys):
    assert main(["check", "--bandwidth", "8", "--inject-fault", "3,1,2"]) == EXIT_CHECK
    assert "CHECKS FAILED" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["nonsense"],
    ["check", "--spins", "a,b"],
    ["check", "--precision", "f16"],
    ["gen-data", "--mode", "XX"],
])
def test_argument_errors_exit_2(argv):
    with pytest.raises(SystemExit) as e:
        main(argv)
    assert e.value.code == EXIT_USAGE


@pytest.mark.parametrize("argv", [
    ["check", "--bandwidth", "1"],
    ["bench", "--bandwidths", "12"],
    ["bench", "--reps", "2", "--bandwidths", "8"],
    ["transform"],
    ["gen-data"],
    ["infer", "--task", "segment", "--bandwidth", "8"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_bad_thread_variable(monkeypatch):
    monkeypatch.setenv("SPINCONV_NUM_THREADS", "zero")
    assert main(["check", "--bandwidth", "4"]) == EXIT_USAGE


def test_io_errors_exit_3(tmp_path, capsys):
    assert main(["transform", "--input", str(tmp_path / "missing"), "--output", str(tmp_path / "o")]) == EXIT_IO
    assert main(["gen-data", "--input", str(tmp_path / "missing"), "--output", str(tmp_path / "o")]) == EXIT_IO
    blobio.write_bundle(str(tmp_path / "w"), {"x": np.zeros(3)}, {"kind": "spatial"})
    assert main(["infer", "--weights", str(tmp_path / "w")]) == EXIT_IO
    assert "I/O error" in capsys.readouterr().err


def test_transform_forward_then_inverse(tmp_path):
    B = 8
    rng = np.random.default_rng(0)
    plan = get_plan(B)
    fields = {0: plan.inverse(random_coeffs(rng, B, 0, (2,)), 0).real,
              1: plan.inverse(random_coeffs(rng, B, 1, (3,)), 1)}
    write_fields(str(tmp_path / "x"), fields, B, "spatial", "f32")
    assert main(["transform", "--input", str(tmp_path / "x"), "--output", str(tmp_path / "c"),
                 "--precision", "f32"]) == EXIT_OK
    manifest, coeffs = blobio.read_bundle(str(tmp_path / "c"))
    assert manifest["kind"] == "spectral" and coeffs["spin1"].shape == (3, B, 2 * B - 1)
    assert main(["transform", "--inverse", "--input", str(tmp_path / "c"), "--output", str(tmp_path / "y"),
                 "--precision", "f32"]) == EXIT_OK
    _, back = blobio.read_bundle(str(tmp_path / "y"))
    assert np.isrealobj(back["spin0"])
    for s, v in fields.items():
        assert np.abs(back[f"spin{s}"] - v).max() <= 1e-5 * np.abs(v).max()


def test_transform_direction_and_content_errors(tmp_path):
    B = 8
    write_fields(str(tmp_path / "x"), {0: np.zeros((1, 2 * B, 2 * B))}, B, "spatial")
    assert main(["transform", "--inverse", "--input", str(tmp_path / "x"), "--output", str(tmp_path / "o")]) \
        == EXIT_USAGE
    assert main(["transform", "--bandwidth", "4", "--input", str(tmp_path / "x"),
                 "--output", str(tmp_path / "o")]) == EXIT_USAGE
    blobio.write_bundle(str(tmp_path / "k"), {"spinX": np.zeros((1, 16, 16))}, {"kind": "spatial", "bandwidth": B})
    assert main(["transform", "--input", str(tmp_path / "k"), "--output", str(tmp_path / "o")]) == EXIT_IO
    blobio.write_bundle(str(tmp_path / "e"), {"spin0": np.zeros((0, 16, 16))}, {"kind": "spatial", "bandwidth": B})
    assert main(["transform", "--input", str(tmp_path / "e"), "--output", str(tmp_path / "o")]) == EXIT_IO


def test_infer_classifier_shift_gap(tmp_path, capsys):
    out = tmp_path / "logits.json"
    assert main(["infer", "--bandwidth", "16", "--seed", "3", "--output", str(out)]) == EXIT_OK
    result = json.loads(out.read_text())
    assert len(result["logits"]) == 10 and result["shift_gap"] <= 1e-4
    assert "calibrated_bn=True" in capsys.readouterr().out


def test_infer_zero_weights_give_bias(tmp_path, capsys):
    B = 16
    spec = build_classifier((1,), B)
    save_weights(str(tmp_path / "w"), spec, zero_weights(spec, head_bias=np.linspace(-1, 1, 10)))
    out = tmp_path / "logits.json"
    assert main(["infer", "--weights", str(tmp_path / "w"), "--output", str(out)]) == EXIT_OK
    np.testing.assert_allclose(json.loads(out.read_text())["logits"], np.linspace(-1, 1, 10), atol=1e-12)
    assert "calibrated_bn=False" in capsys.readouterr().out


def test_infer_unet_and_saved_weights(tmp_path, capsys):
    B = 16
    assert main(["infer", "--task", "vec2img-hard", "--bandwidth", str(B), "--output", str(tmp_path / "y"),
                 "--save-weights", str(tmp_path / "w")]) == EXIT_OK
    manifest, y = blobio.read_bundle(str(tmp_path / "y"))
    assert y["spin0"].shape == (1, 3, 2 * B, 2 * B) and manifest["shift_gap"] <= 1e-4
    assert main(["infer", "--weights", str(tmp_path / "w"), "--no-calibrate"]) == EXIT_OK
    assert "output spins=[0] shape=[[1, 3, 32, 32]]" in capsys.readouterr().out


def test_gen_data_then_infer_on_a_sample(mnist_dir, tmp_path, capsys):
    out = tmp_path / "data"
    assert main(["gen-data", "--input", mnist_dir, "--output", str(out), "--bandwidth", "16",
                 "--task", "classify-vector", "--mode", "NR/R", "--limit", "3"]) == EXIT_OK
    assert "samples={'test': 3, 'train': 3}" in capsys.readouterr().out.replace("'train': 3, 'test': 3",
                                                                                  "'test': 3, 'train': 3")
    blobio.verify_bundle(str(out))
    assert load_split(str(out), "train")["input"].shape == (3, 1, 32, 32)
    assert main(["infer", "--input", str(out), "--bandwidth", "16", "--index", "2"]) == EXIT_OK
    assert main(["infer", "--input", str(out), "--bandwidth", "16", "--index", "3"]) == EXIT_USAGE
    assert main(["infer", "--input", str(out), "--bandwidth", "8"]) == EXIT_USAGE


def test_bench_small(tmp_path, capsys):
    out = tmp_path / "bench.json"
    assert main(["bench", "--reps", "3", "--bandwidths", "8", "16", "--channels", "2", "--output", str(out)]) \
        == EXIT_OK
    report = json.loads(out.read_text())
    assert report["bandwidths"] == [8, 16]
    for entry in report["backends"].values():
        assert set(entry["timings"]) == {"8", "16"}
    assert "median seconds" in capsys.readouterr().out
