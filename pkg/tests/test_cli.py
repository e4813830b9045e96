import json
import subprocess
import sys

import numpy as np
import pytest

from gapflow.birkhoff import BirkhoffVector
from gapflow.cli import main
from gapflow.deformation import DampingReport
from gapflow.floquet import spectrum_from_csv
from gapflow.potentials import from_fourier, zero_potential
from gapflow.regularity import Theorem2Report


@pytest.fixture
def files(tmp_path):
    q = tmp_path / "q.json"
    q.write_text(from_fourier(0.3, [0.2, 0.0], [0.0, 0.1]).to_json())
    q0 = tmp_path / "q0.json"
    q0.write_text(zero_potential().to_json())
    z = tmp_path / "z.json"
    z.write_text(BirkhoffVector(np.full((3, 2), 2**-0.5)).to_json())
    return {"q": str(q), "q0": str(q0), "z": str(z), "dir": tmp_path}


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_spectrum_csv(files, capsys):
    code, out, _ = run(capsys, "spectrum", "--input", files["q"], "--modes", "4", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "k,lambda_lo,lambda_hi,gamma"
    assert len(lines) == 6
    s = spectrum_from_csv(out)
    assert s.K == 4


def test_spectrum_json(files, capsys):
    code, out, _ = run(capsys, "spectrum", "-i", files["q"], "-K", "3")
    d = json.loads(out)
    assert code == 0 and len(d["eigenvalues"]) == 7 and len(d["gammas"]) == 3


@pytest.mark.parametrize("cmd", ["gaps", "actions", "ratio", "moduli"])
def test_gap_commands(files, capsys, cmd):
    for fmt in ("json", "csv"):
        code, out, _ = run(capsys, cmd, "-i", files["q"], "-K", "3", "--format", fmt)
        assert code == 0
        assert out.strip()


def test_actions_json_values(files, capsys):
    _, out, _ = run(capsys, "actions", "-i", files["q0"], "-K", "2")
    d = json.loads(out)
    assert d["actions"] == [0.0, 0.0] and d["ratios"] == [None, None]


def test_ratio_closed_gap(files, capsys):
    code, out, err = run(capsys, "ratio", "--input", files["q0"], "--modes", "6")
    assert code == 1
    assert "ratio undefined at closed gap" in err
    assert out == ""


def test_damp(files, capsys):
    code, out, _ = run(capsys, "damp", "--alpha", "-0.5", "--epsilon", "0.1", "--input", files["z"])
    assert code == 0
    rep = DampingReport.from_json(out)
    assert rep.N_star == 3
    code, out, _ = run(capsys, "damp", "-i", files["z"], "--format", "csv")
    assert out.splitlines()[0] == "n,threshold,damped,norm_sq"


def test_flow(files, capsys):
    code, out, _ = run(capsys, "flow", "-i", files["z"], "--k", "2", "--t", "-0.25")
    z = BirkhoffVector.from_json(out)
    np.testing.assert_allclose(z.pairs[1], [0.5, 0.5], rtol=1e-15)
    code, out, _ = run(capsys, "flow", "-i", files["z"], "--k", "2", "--t", "-0.25", "--numeric", "--format", "csv")
    assert code == 0 and out.startswith("k,x,y\n")
    code, _, err = run(capsys, "flow", "-i", files["z"], "--k", "1", "--t", "-0.6")
    assert code == 1 and "flow leaves the domain" in err
    code, _, _ = run(capsys, "flow", "-i", files["z"])
    assert code == 2


def test_regularity(capsys):
    code, out, _ = run(capsys, "regularity", "--beta", "2", "--amplitude", "0.05", "-K", "12", "--seed", "4")
    assert code == 0
    rep = Theorem2Report.from_json(out)
    assert rep.K == 12 and rep.seed == 4


def test_brackets(files, capsys, monkeypatch):
    monkeypatch.setenv("GAPFLOW_THREADS", "2")
    code, out, _ = run(capsys, "brackets", "-i", files["q"], "-K", "2", "--grad-modes", "2")
    assert code == 0
    rows = json.loads(out)
    assert [(r["m"], r["n"]) for r in rows] == [(1, 2)]
    assert abs(rows[0]["relative"]) < 1e-4


def test_usage_errors(files, capsys, monkeypatch):
    assert run(capsys, "spectrum", "-i", str(files["dir"] / "missing.json"))[0] == 2
    assert run(capsys, "spectrum")[0] == 2
    bad = files["dir"] / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "spectrum", "-i", str(bad))[0] == 2
    assert run(capsys, "damp", "-i", files["q"])[0] == 2
    assert run(capsys, "regularity", "--beta", "5")[0] == 2
    assert run(capsys, "spectrum", "-i", files["q"], "-o", str(files["dir"] / "no" / "out.csv"))[0] == 2
    monkeypatch.setenv("GAPFLOW_THREADS", "zero")
    assert run(capsys, "brackets", "-i", files["q"], "-K", "2")[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["spectrum", "--tol-eig", "-1"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2


def test_output_file(files, capsys):
    out = files["dir"] / "gaps.csv"
    code, printed, _ = run(capsys, "gaps", "-i", files["q"], "-K", "2", "--format", "csv", "-o", str(out))
    assert code == 0 and printed == ""
    assert out.read_text().startswith("k,gamma\n")


def test_subprocess_stdin_and_determinism(files):
    q = open(files["q"]).read()
    cmd = [sys.executable, "-m", "gapflow", "actions", "-i", "-", "-K", "3", "--format", "csv"]
    a = subprocess.run(cmd, input=q, capture_output=True, text=True, check=True).stdout
    b = subprocess.run(cmd, input=q, capture_output=True, text=True, check=True).stdout
    assert a == b and a.startswith("n,gamma,action,ratio\n")
