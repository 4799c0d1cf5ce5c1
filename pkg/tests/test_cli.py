from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from jointrange import jsonio
from jointrange.cli import run
from jointrange.opcore import OperatorTuple, random_tuple

ROOTS8 = np.exp(2j * np.pi * np.arange(8) / 8)


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def inputs(tmp_path):
    rng = np.random.default_rng(0)
    d = tmp_path / "in"
    d.mkdir()
    t = random_tuple(2, 4, rng)
    c = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    c *= 0.5 / np.linalg.norm(c, 2)
    c3 = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    c3 *= 0.6 / np.linalg.norm(c3, 2)
    disc = 0.95 * np.exp(2j * np.pi * np.arange(64) / 64)
    return {
        "tuple": _write(d / "t.json", jsonio.tuple_to_json(t)),
        "diag": _write(d / "diag.json", jsonio.tuple_to_json(OperatorTuple([np.diag(np.arange(8.0))]))),
        "center": _write(d / "center.json", jsonio.vector_to_json(t.quadratic_form(np.ones(4) / 2))),
        "far": _write(d / "far.json", [[50.0, 0.0], [0.0, 0.0]]),
        "vectors": _write(d / "u.json", jsonio.matrix_to_json(np.eye(4, 3))),
        "alphas": _write(d / "a.json", [0.2, 0.3, 0.5]),
        "res": _write(d / "res.json", {"power": {"points": jsonio.vector_to_json(ROOTS8), "multiplicity": 64, "horizon": 2}}),
        "origin2": _write(d / "o2.json", [[0, 0], [0, 0]]),
        "pres": _write(d / "pres.json", {"power": {"points": jsonio.vector_to_json(disc), "multiplicity": 64, "horizon": 3}}),
        "c": _write(d / "c.json", jsonio.matrix_to_json(c)),
        "c3": _write(d / "c3.json", jsonio.matrix_to_json(c3)),
        "model": _write(d / "model.json", {"N": 512, "multiplicity": 8, "weights": "ones"}),
        "model32": _write(d / "model32.json", {"N": 128, "multiplicity": 32, "weights": "ones"}),
        "lambdas": _write(d / "lam.json", jsonio.vector_to_json(0.8 * ROOTS8)),
    }


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def _verify(tmp_path, out, *extra):
    vout = tmp_path / (out.name + "_verify")
    code = run(["verify", "--witness", str(out / "witness.json"), "--out", str(vout), *extra])
    return code, json.loads((vout / "verify.json").read_text())


def test_range_outputs_and_verify(tmp_path, inputs):
    out = tmp_path / "range"
    code = run(["range", "--tuple", inputs["tuple"], "--directions", "64", "--target", inputs["center"], "--out", str(out)])
    assert code == 0
    header = (out / "range_boundary.csv").read_text().splitlines()[0].split(",")
    assert header[0] == "dir_index" and "support_value" in header
    assert len(list(out.glob("range_*.svg"))) == 6
    assert (out / "range_Re_1_Im_1.svg").read_text().startswith("<svg")
    m = _manifest(out)
    assert m["exit_code"] == 0 and m["version"] and m["config"]["seed"] == 0
    code, v = _verify(tmp_path, out, "--tuple", inputs["tuple"])
    assert code == 0 and v["match"]


def test_rank_k_and_verify(tmp_path, inputs):
    out = tmp_path / "rk"
    assert run(["rank-k", "--tuple", inputs["diag"], "--k", "2", "--out", str(out)]) == 0
    code, v = _verify(tmp_path, out, "--tuple", inputs["diag"])
    assert code == 0 and abs(v["stored"] - v["recomputed"]) <= 1e-9


def test_zenger_and_verify(tmp_path, inputs):
    out = tmp_path / "z"
    assert run(["zenger", "--vectors", inputs["vectors"], "--alphas", inputs["alphas"], "--out", str(out)]) == 0
    code, v = _verify(tmp_path, out)
    assert code == 0 and v["match"]


def test_interpolate_trace_and_verify(tmp_path, inputs):
    out = tmp_path / "interp"
    code = run(["interpolate", "--reservoir", inputs["res"], "--target", inputs["origin2"], "--tol", "1e-6", "--out", str(out)])
    assert code == 0
    recs = [json.loads(line) for line in (out / "trace.jsonl").read_text().splitlines()]
    assert recs and "residual" in recs[-1]
    code, v = _verify(tmp_path, out, "--reservoir", inputs["res"])
    assert code == 0 and v["match"]


def test_pinch_and_verify(tmp_path, inputs):
    out = tmp_path / "pinch"
    args = ["pinch", "--model", inputs["pres"], "--contraction", inputs["c"], "--n", "3"]
    assert run(args + ["--c", "0.5", "--c-prime", "0.75", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["horizon"] == 3 and rep["max_deviation"] <= 1e-7
    code, v = _verify(tmp_path, out, "--reservoir", inputs["pres"])
    assert code == 0 and v["match"]


def test_compress_and_verify(tmp_path, inputs):
    out = tmp_path / "comp"
    assert run(["compress", "--model", inputs["model"], "--lambdas", inputs["lambdas"], "--out", str(out)]) == 0
    lines = (out / "report.csv").read_text().splitlines()
    assert lines[0] == "n,deviation,threshold_in_force" and len(lines) == 301
    code, v = _verify(tmp_path, out, "--model", inputs["model"])
    assert code == 0 and v["match"]


def test_match_and_verify(tmp_path, inputs):
    out = tmp_path / "match"
    assert run(["match", "--model", inputs["model32"], "--contraction", inputs["c3"], "--out", str(out)]) == 0
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["k"] == 26 and diag["sup_value"] <= 0.5
    code, v = _verify(tmp_path, out, "--model", inputs["model32"])
    assert code == 0 and v["match"]


def test_exit_code_input_error(tmp_path, inputs):
    bad = _write(tmp_path / "bad.json", {"n": 1, "dim": 2, "matrices": []})
    out = tmp_path / "bad"
    assert run(["range", "--tuple", bad, "--out", str(out)]) == 2
    assert _manifest(out)["error"].startswith("DimensionMismatch")


def test_exit_code_infeasible(tmp_path, inputs):
    out = tmp_path / "far"
    assert run(["range", "--tuple", inputs["tuple"], "--directions", "32", "--target", inputs["far"], "--out", str(out)]) == 3


def test_exit_code_capacity(tmp_path, inputs):
    out = tmp_path / "cap"
    assert run(["rank-k", "--tuple", inputs["tuple"], "--k", "9", "--out", str(out)]) == 4


def test_exit_code_failed_verify(tmp_path, inputs):
    out = tmp_path / "z"
    run(["zenger", "--vectors", inputs["vectors"], "--alphas", inputs["alphas"], "--out", str(out)])
    w = json.loads((out / "witness.json").read_text())
    w["residual"] = 0.5
    (out / "witness.json").write_text(json.dumps(w))
    code, v = _verify(tmp_path, out)
    assert code == 1 and not v["match"]


def test_reruns_are_byte_identical(tmp_path, inputs):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        run(["range", "--tuple", inputs["tuple"], "--directions", "48", "--target", inputs["center"], "--seed", "7", "--out", str(out)])
        run(["compress", "--model", inputs["model"], "--lambdas", inputs["lambdas"], "--horizon", "120", "--out", str(out / "c")])
        runs.append(out)
    files = sorted(p.relative_to(runs[0]) for p in runs[0].rglob("*") if p.is_file() and p.name != "manifest.json")
    assert len(files) >= 10
    for rel in files:
        assert (runs[0] / rel).read_bytes() == (runs[1] / rel).read_bytes(), rel


def test_module_entry_point(tmp_path, inputs):
    out = tmp_path / "sub"
    proc = subprocess.run(
        [sys.executable, "-m", "jointrange", "zenger", "--vectors", inputs["vectors"], "--alphas", inputs["alphas"], "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert (out / "witness.json").exists()
    proc = subprocess.run([sys.executable, "-m", "jointrange", "range"], capture_output=True, text=True)
    assert proc.returncode == 2
