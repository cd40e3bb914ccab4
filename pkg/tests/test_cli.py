import csv
import json

import numpy as np
import pytest

from twistframe import artifacts
from twistframe.cli import load_config, main
from twistframe.errors import ConfigError
from twistframe.grids import GridSpec, make_gaussian, norm
from twistframe.rangeops import TranslateBasis
from twistframe.frames import GeneratorSet, decompose


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run(tmp_path, cmd, text, *extra):
    cfg = write(tmp_path, text)
    out = tmp_path / "out"
    return main([cmd, "--config", str(cfg), "--out", str(out), *extra]), out


G1 = "[generators]\ng = gaussian(0, 0, 1)\n"
G7 = "[generators]\ng7 = gaussian(0, 0, 0.7)\n"


def test_analyze(tmp_path):
    rc, out = run(tmp_path, "analyze", G1 + "p = parseval(gaussian(0, 0, 1))\n")
    assert rc == 0
    with open(out / "frame_report.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["label", "A", "B", "A_est", "B_est", "is_frame", "is_parseval",
                             "omega_fraction", "Kmax"]
    g, p = rows
    assert float(g["A"]) > 0 and g["is_frame"] == "true" and g["is_parseval"] == "false"
    assert p["is_parseval"] == "true"
    with open(out / "bracket_g.csv") as fh:
        br = list(csv.reader(fh))
    assert br[0] == ["xi", "xi_prime", "re", "im", "in_omega"] and len(br) == 1 + 16 * 16
    report = (out / "gram_check.txt").read_text().splitlines()
    assert report[0].startswith("# twistframe analyze seed=42")
    assert all(line.endswith("pass") for line in report[1:])


def test_parsevalize(tmp_path):
    rc, out = run(tmp_path, "parsevalize", G1)
    assert rc == 0
    psi = artifacts.load_function(out / "psi_g.twsf", GridSpec())
    assert norm(psi) > 0.5
    assert "parseval-bracket[g]" in (out / "parsevalize_report.txt").read_text()


def test_decompose(tmp_path):
    text = G1 + "g2 = gaussian(0, 0, 2)\nt = twist(gaussian(0, 0, 1), 1, 0)\n"
    rc, out = run(tmp_path, "decompose", text)
    assert rc == 0
    man = json.loads((out / "manifest.json").read_text())
    assert [o["nonzero"] for o in man["outputs"]] == [True, True, False]
    assert man["max_fiber_overlap"] <= 1e-8
    for o in man["outputs"]:
        assert (out / o["file"]).exists()


def test_frameop(tmp_path):
    rc, out = run(tmp_path, "frameop", "[generators]\np = parseval(gaussian(0, 0, 0.7))\n")
    assert rc == 0
    lines = (out / "frameop_report.txt").read_text().splitlines()
    thm = [l for l in lines if l.startswith("thm5.2 ")][0]
    assert thm.endswith("pass") and float(thm.split("residual=")[1].split()[0]) <= 1e-3
    C = artifacts.load_range_field(out / "range_S.twrf")
    assert C.shape == (16, 16, 1, 1)
    assert np.abs(C - 1).max() <= 1e-3


def test_frameop_non_parseval(tmp_path):
    rc, out = run(tmp_path, "frameop", G7)
    assert rc == 0


def test_frameop_truncation_is_reported(tmp_path):
    # the width-1 Parseval generator decays slowly; Kmax=6 truncation shows up in the TSP row
    text = "[generators]\np = parseval(gaussian(0, 0, 1))\n"
    rc, out = run(tmp_path, "frameop", text)
    assert rc == 3
    assert "frameop-tsp" in (out / "frameop_report.txt").read_text()
    rc, _ = run(tmp_path, "frameop", text + "[frameop]\ntsp_tol = 1e-4\n")
    assert rc == 0


def test_verify_tsp_multiplier(tmp_path, capsys):
    rc, out = run(tmp_path, "verify-tsp", "[verify-tsp]\noperator = mult:exp(2*pi*i*y)\n")
    assert rc == 0
    line = [l for l in capsys.readouterr().out.splitlines() if l.startswith("residual=")][0]
    assert float(line.split("=")[1]) <= 1e-12


def test_verify_tsp_with_transfer(tmp_path):
    rc, out = run(tmp_path, "verify-tsp", G7 + "[verify-tsp]\noperator = mult:exp(2*pi*i*y)\n")
    assert rc == 0
    text = (out / "tsp_report.txt").read_text()
    for tag in ("tsp", "norm-bound", "bounded-below", "adjoint"):
        assert tag in text


def test_verify_tsp_rejects(tmp_path, capsys):
    rc, _ = run(tmp_path, "verify-tsp", "[verify-tsp]\noperator = mult:exp(2*pi*i*x*y)\n")
    assert rc == 3
    assert "tsp" in capsys.readouterr().err


def test_verify_tsp_matrix(tmp_path):
    spec = GridSpec()
    B = decompose(GeneratorSet.of(make_gaussian(spec, (0, 0), 0.7, label="g7")))
    size = TranslateBasis(B, 2).size
    np.save(tmp_path / "m.npy", 2.0 * np.eye(size))
    text = G7 + f"[verify-tsp]\noperator = matrix:{tmp_path / 'm.npy'}\n"
    # a diagonal matrix on the truncated frame is only approximately shift-preserving
    rc, out = run(tmp_path, "verify-tsp", text, "--kmax", "2")
    assert rc in (0, 3)
    assert "tsp" in (out / "tsp_report.txt").read_text()
    np.save(tmp_path / "bad.npy", np.eye(3))
    rc, _ = run(tmp_path, "verify-tsp", G7 + f"[verify-tsp]\noperator = matrix:{tmp_path / 'bad.npy'}\n")
    assert rc == 2


def test_demo_mult(tmp_path):
    rc, out = run(tmp_path, "demo-mult", "[run]\nseed = 42\n")
    assert rc == 0
    with open(out / "demo_mult.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["xi", "eta", "re", "im"]
    worst = max(abs(complex(float(r["re"]), float(r["im"]))
                    - np.exp(2j * np.pi * (float(r["eta"]) - float(r["xi"])))) for r in rows)
    assert worst <= 1e-6
    assert "unitary" in (out / "demo_mult_report.txt").read_text()


def test_demo_mult_rejects_x(tmp_path):
    rc, _ = run(tmp_path, "demo-mult", "[demo-mult]\nsymbol = exp(2*pi*i*x)\n")
    assert rc == 2


def test_deterministic(tmp_path):
    rc1, out = run(tmp_path, "analyze", G1)
    first = (out / "frame_report.csv").read_bytes()
    rc2, out = run(tmp_path, "analyze", G1)
    assert rc1 == rc2 == 0 and (out / "frame_report.csv").read_bytes() == first


@pytest.mark.parametrize("text", [
    "[run]\nkmax = 7\n" + G1,
    "[run]\nkmax = 0\n" + G1,
    "[bogus]\nx = 1\n" + G1,
    "[generators]\n",
    "[generators]\ng = gaussian(0, 0)\n",
    "[generators]\ng = __import__('os')\n",
    "[grid]\nN = 10\n" + G1,
    "[grid]\nq = 1\n" + G1,
    "not an ini",
])
def test_config_errors(tmp_path, text):
    rc, _ = run(tmp_path, "analyze", text)
    assert rc == 2


def test_missing_config(tmp_path):
    assert main(["analyze", "--config", str(tmp_path / "none.ini")]) == 2


def test_unknown_command():
    assert main(["frobnicate"]) == 2


def test_help(capsys):
    assert main(["--help"]) == 0
    assert "verify-tsp" in capsys.readouterr().out


def test_flag_overrides(tmp_path):
    p = write(tmp_path, "[grid]\nL = 8\nN = 16\n[run]\nseed = 1\nkmax = 4\n" + G1)
    cfg = load_config(p, seed=7, kmax=3, grid_n=8, grid_l=5, out=tmp_path)
    assert (cfg.seed, cfg.kmax, cfg.spec.N, cfg.spec.L) == (7, 3, 8, 5)
    with pytest.raises(ConfigError):
        load_config(p, seed=-1)
