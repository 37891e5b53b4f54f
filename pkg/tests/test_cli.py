import json

import numpy as np
import pytest

from ising_shol.cli import main, parse_beta
from ising_shol.shol_core import BETA_C, field_from_csv


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_beta():
    assert parse_beta("crit") == BETA_C
    assert parse_beta(" CRIT ") == BETA_C
    assert parse_beta("0.5") == 0.5


def test_propagator_command(capsys, tmp_path):
    code, out, _ = _run(capsys, "propagator", "--width", "4", "--critical")
    assert code == 0
    rep = json.loads(out)
    w = np.array(rep["eigenvalues"])
    assert len(w) == 6 and rep["pairing_ok"]
    assert np.allclose(w * w[::-1], 1)
    path = tmp_path / "spec.json"
    assert main(["propagator", "--width", "4", "--beta", "0.6", "--out", str(path)]) == 0
    assert json.loads(path.read_text())["pairing_ok"]


@pytest.mark.parametrize("argv", [
    ["propagator", "--width", "1", "--critical"],
    ["propagator", "--width", "4"],
    ["propagator", "--width", "4", "--beta", "-1"],
    ["propagator", "--width", "4", "--beta", "hot"],
    ["nonsense"],
    ["verify", "--suite", "everything"],
    ["observable", "--domain", "4x4", "--kind", "up", "--beta", "0.5"],
    ["observable", "--domain", "4x4", "--kind", "up", "--source", "0,1", "--beta", "0.5"],
    ["observable", "--domain", "7x7", "--kind", "up", "--source", "1,0", "--beta", "0.5"],
])
def test_usage_errors(capsys, argv):
    code, _, _ = _run(capsys, *argv)
    assert code == 2


def test_observable_methods_agree(capsys, tmp_path):
    files = {}
    for method in ("contour", "transfer", "rbvp"):
        p = tmp_path / f"{method}.csv"
        assert main(["observable", "--domain", "4x4", "--kind", "up", "--source", "3,0", "--method", method,
                     "--beta", "crit", "--out", str(p)]) == 0
        files[method] = p
    f = field_from_csv(files["contour"].read_text())
    assert len(f) == 23 and (3, 0) not in f
    capsys.readouterr()
    for other in ("transfer", "rbvp"):
        code, out, _ = _run(capsys, "diff", str(files["contour"]), str(files[other]))
        assert code == 0
        assert float(out.split()[1]) < 1e-9
    code, _, _ = _run(capsys, "diff", str(files["contour"]), str(files["rbvp"]), "--tol", "1e-30")
    assert code == 1


def test_interior_source_down_observable(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for method, p in (("contour", a), ("rbvp", b)):
        assert main(["observable", "--domain", "4x3", "--kind", "down", "--source", "3,2", "--method", method,
                     "--beta", "0.55", "--out", str(p)]) == 0
    capsys.readouterr()
    code, out, _ = _run(capsys, "diff", str(a), str(b))
    assert code == 0


def test_transfer_needs_rectangle(capsys):
    faces = json.dumps({"type": "faces", "faces": [[1, 1], [3, 1], [1, 3]]})
    code, _, _ = _run(capsys, "observable", "--domain", faces, "--kind", "up", "--source", "1,0",
                      "--method", "transfer", "--beta", "0.5")
    assert code == 2
    code, out, _ = _run(capsys, "observable", "--domain", faces, "--kind", "up", "--source", "1,0",
                        "--beta", "0.5")
    assert code == 0 and out.startswith("x2,y2,re,im")


def test_multipoint_command(capsys):
    code, out, _ = _run(capsys, "observable", "--domain", "4x4", "--kind", "multi",
                        "--sources", "1,0;5,2;3,4;1,6", "--arrows", "up,down,up,up", "--beta", "0.6")
    assert code == 0
    re_, im = (float(t) for t in out.splitlines()[1].split(","))
    assert np.isfinite(re_) and np.isfinite(im)
    code, _, _ = _run(capsys, "observable", "--domain", "4x4", "--kind", "multi",
                      "--sources", "1,0;5,2", "--arrows", "up", "--beta", "0.6")
    assert code == 2


def test_correlation_command(capsys):
    code, out, _ = _run(capsys, "correlation", "--width", "4", "--height", "4", "--beta", "2",
                        "--insert", "sigma:2,2")
    assert code == 0
    re_, im = (float(t) for t in out.strip().split(","))
    assert 0 < re_ < 1 and im == 0
    code, _, _ = _run(capsys, "correlation", "--width", "4", "--height", "4", "--beta", "2",
                      "--insert", "psi:2,2")
    assert code == 2


def test_rps_command(capsys):
    outs = {}
    for method in ("direct", "kernel", "blocks"):
        code, out, _ = _run(capsys, "rps", "--width", "4", "--height", "4", "--method", method, "--beta", "crit")
        assert code == 0
        outs[method] = np.array(json.loads(out)["matrix"])
    assert np.max(np.abs(outs["direct"] - outs["kernel"])) < 1e-9
    assert np.max(np.abs(outs["direct"] - outs["blocks"])) < 1e-9
    code, _, _ = _run(capsys, "rps", "--method", "blocks", "--side", "top", "--beta", "0.5")
    assert code == 2
    code, out, _ = _run(capsys, "rps", "--run", "1,0;3,0", "--beta", "0.5")
    assert code == 0 and len(json.loads(out)["b"]) == 2


def test_glue_check_command(capsys):
    code, out, _ = _run(capsys, "glue-check", "--width", "4", "--height", "5", "--cut", "2", "--beta", "0.55")
    assert code == 0
    rep = json.loads(out)
    assert rep["pass"] and rep["pair_across"] < 1e-9 and rep["pair_same_side"] < 1e-9


def test_verify_command(capsys, tmp_path):
    report = tmp_path / "rep.json"
    assert main(["verify", "--suite", "propagator", "--max-width", "4", "--betas", "crit,0.6",
                 "--report", str(report)]) == 0
    rep = json.loads(report.read_text())
    assert rep["pass"] and all(c["pass"] for c in rep["checks"])
    code, out, _ = _run(capsys, "verify", "--suite", "spectrum", "--max-width", "4", "--betas", "0.6",
                        "--tol", "1e-30")
    assert code == 1
    rep = json.loads(out)
    assert not rep["pass"] and any(c["max_abs_err"] > 1e-30 for c in rep["checks"])


def test_output_is_deterministic_across_workers(capsys, monkeypatch):
    argv = ["observable", "--domain", "4x3", "--kind", "up", "--source", "3,2", "--beta", "0.5"]
    _, first, _ = _run(capsys, *argv)
    monkeypatch.setenv("ISING_THREADS", "2")
    _, second, _ = _run(capsys, *argv)
    assert first == second
