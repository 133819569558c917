import json
import subprocess
import sys

import numpy as np
import pytest

from kwsphere.cli import main
from kwsphere.grid import build_grid, write_field
from kwsphere.gyre import GyreParams, corollary7_bound, to_elliptic


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_lemma2(capsys):
    code, out, _ = run(capsys, "analyze", "--h-expr", "const:-1", "--C", "-3", "--nlat", "16")
    assert code == 0
    assert json.loads(out)["verdict"] == "ExistsByLemma2"


def test_analyze_C2_obstruction(capsys):
    code, out, _ = run(capsys, "analyze", "--h-expr", "gyre:c=-1,d=1,g=2,omega=0.5", "--C", "2")
    assert code == 1
    assert json.loads(out)["verdict"] == "NoSolutionKW"


def test_analyze_outside_range(capsys):
    code, out, _ = run(capsys, "analyze", "--h-expr", "const:1", "--C", "5", "--nlat", "16")
    assert code == 2 and json.loads(out)["verdict"] == "Inconclusive"


def test_analyze_sufficient_and_gap_at_pole(capsys):
    code, out, _ = run(capsys, "analyze", "--h-expr", "gyre:c=-1,d=1,g=2.5,omega=0.1", "--C", "2.5")
    doc = json.loads(out)
    assert code == 0 and doc["verdict"] == "SufficientByThm1"
    assert doc["gap"]["node"] == "north"


def test_analyze_from_file_and_harmonic(capsys, tmp_path):
    g = build_grid(16, 32)
    _, h = to_elliptic(GyreParams(-1, 1, 1, 0.5), g)
    path = tmp_path / "h.txt"
    write_field(h, path)
    code, out, _ = run(capsys, "analyze", "--h-file", str(path), "--C", "1")
    assert code == 0 and json.loads(out)["verdict"] == "ExistsByLemma45"
    code, out2, _ = run(capsys, "analyze", "--h-expr", f"file:{path}", "--C", "1")
    assert out2 == out
    code, out, _ = run(capsys, "analyze", "--h-expr", "harmonic:1,0", "--C", "2", "--nlat", "16")
    assert code == 1 and json.loads(out)["verdict"] == "NoSolutionKW"


@pytest.mark.parametrize("argv", [
    ["analyze", "--C", "1"],
    ["analyze", "--h-expr", "const:1", "--h-file", "x", "--C", "1"],
    ["analyze", "--h-expr", "bogus:1", "--C", "1"],
    ["analyze", "--h-expr", "const:0", "--C", "1", "--nlat", "8"],
    ["analyze", "--h-expr", "const:1", "--C", "nan"],
    ["analyze", "--h-expr", "const:1", "--C", "1", "--nlat", "8", "--nlon", "10"],
    ["analyze", "--h-expr", "const:1", "--C", "1", "--nlat", "8", "--L", "8"],
    ["analyze", "--h-expr", "gyre:c=-1,d=1,omega", "--C", "1"],
    ["gyre-classify", "--c", "1", "--d", "0", "--g", "1", "--omega", "1"],
    ["gyre-solve", "--c", "1", "--d", "0", "--g", "1", "--omega", "1"],
    ["gyre-sweep", "--C-min", "2", "--C-max", "4", "--varpi-min", "-1",
     "--varpi-max", "1", "--steps", "1"],
    ["solve", "--h-expr", "const:1", "--C", "1", "--damping", "2"],
])
def test_usage_errors(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        sys.exit(main(argv))
    assert exc.value.code == 64


def test_malformed_field_file(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("sphfield v2 nlat=4 nlon=8\n")
    code, _, err = run(capsys, "analyze", "--h-file", str(bad), "--C", "1")
    assert code == 64 and "malformed" in err
    code, _, err = run(capsys, "analyze", "--h-file", str(tmp_path / "missing"), "--C", "1")
    assert code == 64


def test_gyre_classify(capsys, tmp_path):
    code, out, _ = run(capsys, "gyre-classify", "--c", "1", "--d", "1", "--g", "-1", "--omega", "1")
    doc = json.loads(out)
    assert code == 0 and doc["verdict"] == "EXISTS" and doc["rule"] == "C<0, cd>0"
    code, _, _ = run(capsys, "gyre-classify", "--c", "-1", "--d", "1", "--g", "2.5", "--omega", "0.9")
    assert code == 2
    out_path = tmp_path / "v.json"
    code, out, _ = run(capsys, "gyre-classify", "--c", "-1", "--d", "1", "--g", "2", "--omega", "1",
                       "--out", str(out_path))
    assert code == 1 and out == ""
    assert json.loads(out_path.read_text())["verdict"] == "NO_SOLUTION"


def test_gyre_sweep_boundary(capsys, tmp_path):
    csv_path, svg_path = tmp_path / "s.csv", tmp_path / "s.svg"
    argv = ["gyre-sweep", "--C-min", "2", "--C-max", "4", "--varpi-min", "-2", "--varpi-max", "2",
            "--steps", "200", "--out", str(csv_path), "--svg", str(svg_path)]
    code, _, _ = run(capsys, *argv)
    assert code == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "C,varpi,verdict,rule,bound,margin" and len(lines) == 200 * 200 + 1
    rows = [ln.split(",") for ln in lines[1:]]
    Cs = sorted({float(r[0]) for r in rows})
    dw = 4 / 199
    dC = 2 / 199
    for C in Cs:
        if not 2 < C < 4:
            continue
        suff = [abs(float(r[1])) for r in rows
                if float(r[0]) == C and r[2] == "EXISTS_SUFFICIENT"]
        edge = max(suff, default=0.0)
        b = float(corollary7_bound(C))
        slope = abs(float(corollary7_bound(min(C + dC, 4 - 1e-9))) - b)
        assert abs(edge - b) <= dw + slope + 1e-12 or (edge == 0 and b < dw)
    assert svg_path.read_text().startswith("<svg")
    first = csv_path.read_bytes()
    run(capsys, *argv)
    assert csv_path.read_bytes() == first


def test_solve_check_kw_roundtrip(capsys, tmp_path):
    sol_path = tmp_path / "u.txt"
    code, out, _ = run(capsys, "solve", "--h-expr", "gyre:c=-1,d=1,g=1,omega=0.5", "--C", "1",
                       "--nlat", "32", "--out", str(sol_path))
    meta = json.loads(out)
    assert code == 0 and meta["converged"]
    assert json.loads((tmp_path / "u.txt.json").read_text()) == meta
    code, out, _ = run(capsys, "check-kw", "--solution", str(sol_path),
                       "--h-expr", "gyre:c=-1,d=1,g=1,omega=0.5", "--C", "1", "--nlat", "32")
    doc = json.loads(out)
    assert code == 0
    assert np.max(np.abs(np.array(doc["kw_residuals"]) - meta["kw_residuals"])) < 1e-12
    assert doc["norm"] < 1e-6


def test_gyre_solve_then_check_kw(capsys, tmp_path):
    psi_path = tmp_path / "psi.txt"
    code, out, _ = run(capsys, "gyre-solve", "--c", "-1", "--d", "1", "--g", "2.5", "--omega", "0.1",
                       "--nlat", "32", "--out", str(psi_path))
    meta = json.loads(out)
    assert code == 0 and meta["psi_residual_maxnorm"] < 1e-8
    assert np.linalg.norm(meta["kw_residuals"]) < 1e-6


def test_solve_failure_exit_code(capsys):
    code, out, _ = run(capsys, "gyre-solve", "--c", "1", "--d", "1", "--g", "1", "--omega", "0.5",
                       "--nlat", "16", "--max-iters", "10")
    assert code == 3 and not json.loads(out)["converged"]


def test_check_kw_grid_mismatch(capsys, tmp_path):
    g = build_grid(8, 16)
    path = tmp_path / "u.txt"
    write_field(g.field(np.zeros(g.shape)), path)
    code, _, _ = run(capsys, "check-kw", "--solution", str(path), "--h-expr", "const:1",
                     "--C", "1", "--nlat", "16")
    assert code == 64


def test_outputs_deterministic(capsys):
    argv = ["analyze", "--h-expr", "gyre:c=-1,d=1,g=3,omega=0.4", "--C", "3", "--nlat", "24"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b


def test_entry_point():
    proc = subprocess.run([sys.executable, "-m", "kwsphere", "gyre-classify", "--c", "-1",
                           "--d", "1", "--g", "1", "--omega", "0.5"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["verdict"] == "EXISTS"
