from __future__ import annotations

import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from plateau import corpus
from plateau.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, _apply_thread_cap, main, run
from plateau.fileio import save_complex, save_json
from plateau.funcspace import ScalarField, field_from_payload, field_to_payload


@pytest.fixture(scope="module")
def golden(tmp_path_factory):
    d = tmp_path_factory.mktemp("golden")
    assert main(["golden", "--all", "--resolution", "0.2", "--out", str(d)]) == EXIT_OK
    return d


def _json(argv, capsys):
    code = main(argv + ["--json"])
    return code, json.loads(capsys.readouterr().out)


def test_golden_writes_every_corpus_id(golden):
    for name in corpus.GOLDEN_NAMES:
        assert (golden / f"{name}.json").exists()


def test_golden_unknown_id(tmp_path):
    assert main(["golden", "no-such-mesh", "--out", str(tmp_path / "x.json")]) == EXIT_INPUT


def test_validate(golden, tmp_path, capsys):
    code, out = _json(["validate", str(golden / "t-cone.json")], capsys)
    assert code == EXIT_OK
    assert out["details"]["structure"]["t_points"] == 1
    assert len(out["inputs"][str(golden / "t-cone.json")]) == 64
    assert main(["validate", str(golden / "mobius.json")]) == EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["validate", str(bad)]) == EXIT_INPUT
    assert main(["validate", str(tmp_path / "missing.json")]) == EXIT_INPUT


def test_argument_errors(golden):
    assert main(["measure", str(golden / "y-cone.json"), "--center", "1,2"]) == EXIT_INPUT
    assert main(["bernstein", str(golden / "y-cone.json"), "--n", "0..3"]) == EXIT_INPUT
    assert main(["no-such-command"]) == EXIT_INPUT


def test_measure(golden, capsys):
    code, out = _json(["measure", str(golden / "y-cone.json"), "--radii", "0.5,1.0"], capsys)
    assert code == EXIT_OK
    vals = {r["name"]: r["value"] for r in out["results"]}
    assert vals["C_fit"] == pytest.approx(1.5 * math.pi, rel=0.02)
    assert vals["max_conormal_sum"] <= 1e-12


def test_measure_reports_unbalanced_y(tmp_path, capsys):
    # measuring is informational: the residual is reported against its tolerance without a verdict
    path = tmp_path / "tilted.json"
    save_complex(corpus.y_cone(0.2, angles_deg=(0.0, 110.0, 235.0)), path)
    code, out = _json(["measure", str(path)], capsys)
    assert code == EXIT_OK
    row = next(r for r in out["results"] if r["name"] == "first_variation_residual")
    assert row["value"] > row["tol"] and row["pass"] is None
    vals = {r["name"]: r["value"] for r in out["results"]}
    assert vals["max_conormal_sum"] == pytest.approx(0.147153, abs=1e-6)


def test_spectrum_stable_and_unstable(golden, tmp_path, capsys):
    code, out = _json(["spectrum", str(golden / "y-cone.json"), "-k", "3"], capsys)
    assert code == EXIT_OK
    assert out["tolerances"]["tol_eig"]["source"] == "default"
    path = tmp_path / "tall.json"
    save_complex(corpus.catenoid(1.5, 0.2), path)
    code, out = _json(["spectrum", str(path), "-k", "1"], capsys)
    assert code == EXIT_FAIL
    assert out["verdicts"]["stable"] is False


def test_tolerance_override_is_reported(golden, capsys):
    code, out = _json(["spectrum", str(golden / "y-cone.json"), "-k", "1", "--tol-eig", "1e-3"], capsys)
    assert code == EXIT_OK
    assert out["tolerances"]["tol_eig"] == {"module": "variation", "source": "flag", "value": 1e-3}


def test_bernstein_analytic(golden, capsys):
    code, out = _json(["bernstein", str(golden / "t-cone.json"), "--analytic-cone", "--n", "1..4"], capsys)
    assert code == EXIT_OK
    vals = {r["name"]: r["value"] for r in out["results"]}
    assert vals["loglog_slope"] == pytest.approx(-1.0, abs=1e-12)
    assert vals["link_length"] == pytest.approx(6 * math.acos(-1 / 3), rel=1e-12)


def test_classify(golden, tmp_path, capsys):
    code, out = _json(["classify", str(golden / "double-t.json")], capsys)
    assert code == EXIT_OK
    assert out["details"]["classification"]["tag"] == "DoubleT"
    net = tmp_path / "net.json"
    assert main(["classify", str(golden / "network-prism.json"), "--emit-network", str(net)]) == EXIT_OK
    assert len(json.loads(net.read_text())["nodes"]) == 2
    assert main(["classify", str(golden / "t-cone.json"), "--emit-network", str(tmp_path / "none.json")]) == EXIT_FAIL


def test_classify_structure_error_exit(tmp_path, t_c):
    from plateau.complex import merge_complexes

    path = tmp_path / "three.json"
    save_complex(merge_complexes([t_c.transformed(translation=(10.0 * k, 0, 0)) for k in range(3)]), path)
    assert main(["classify", str(path)]) == EXIT_INPUT


def test_field_commands(tmp_path, capsys):
    c = corpus.y_cone(0.2)
    mesh = tmp_path / "y.json"
    save_complex(c, mesh)
    bad = np.zeros(c.n_dofs)
    v = int(c.junctions[0][len(c.junctions[0]) // 2])
    for p in c.junction_patches[0]:
        bad[c.dof(p, v)] = 1.0
    save_json(field_to_payload(ScalarField(c, bad)), tmp_path / "bad.json")
    code, out = _json(["field", "check", str(mesh), str(tmp_path / "bad.json")], capsys)
    assert code == EXIT_FAIL
    assert out["verdicts"]["compatible"] is False

    good = bad.copy()
    good[c.dof(c.junction_patches[0][2], v)] = -2.0
    save_json(field_to_payload(ScalarField(c, good)), tmp_path / "good.json")
    assert main(["field", "check", str(mesh), str(tmp_path / "good.json")]) == EXIT_OK
    capsys.readouterr()
    lifted = tmp_path / "lifted.json"
    assert main(["field", "lift", str(mesh), str(tmp_path / "good.json"), "--out", str(lifted)]) == EXIT_OK
    assert "vectors" in json.loads(lifted.read_text())
    assert main(["field", "restrict", str(mesh), str(lifted), "--out", str(tmp_path / "back.json")]) == EXIT_OK
    back = field_from_payload(c, json.loads((tmp_path / "back.json").read_text()))
    assert np.abs(back.values - good).max() <= 1e-10
    # a scalar field where a vector field is expected
    assert main(["field", "restrict", str(mesh), str(tmp_path / "good.json")]) == EXIT_INPUT


def test_relax_command(tmp_path, capsys):
    v, t, p, g = corpus.y_book(0.2, 1.0, 0.5, (0.0, 115.0, 230.0))
    from plateau.complex import build_complex

    mesh = tmp_path / "book.json"
    save_complex(build_complex(v, t, patch=p, junctions=[g]), mesh)
    out_mesh = tmp_path / "relaxed.json"
    argv = ["relax", str(mesh), "--steps", "300", "--slide-axis", "z", "--keep-radius", "1.0", "--out", str(out_mesh)]
    code, out = _json(argv, capsys)
    assert code == EXIT_OK
    vals = {r["name"]: r["value"] for r in out["results"]}
    assert vals["area_final"] < vals["area_initial"]
    assert vals["max_conormal_sum_final"] < vals["max_conormal_sum_initial"]
    assert out_mesh.exists()


def test_multi_commands(golden, capsys):
    book = str(golden / "weighted-book.json")
    code, out = _json(["multi", "check", book], capsys)
    assert code == EXIT_OK
    assert out["verdicts"] == {"equilibrium_angles": True, "first_variation_residual": True}
    assert main(["multi", "spectrum", book, "-k", "2"]) == EXIT_OK
    capsys.readouterr()
    code, out = _json(["multi", "bernstein", book, "--analytic-cone", "--n", "1..4"], capsys)
    assert code == EXIT_OK
    rn = [r["value"]["rhs_times_n"] for r in out["results"] if r["name"].startswith("n=")]
    assert rn == pytest.approx([3.5 * math.pi] * 4, rel=1e-12)


def test_run_returns_report(golden):
    code, rep, args = run(["validate", str(golden / "y-cone.json")])
    assert code == EXIT_OK and rep.all_pass and args.command == "validate"


def _cli(*argv, env=None):
    return subprocess.run([sys.executable, "-m", "plateau", *argv], capture_output=True, text=True, env=env)


def test_json_output_is_byte_identical(golden):
    argv = ("spectrum", str(golden / "t-cone.json"), "-k", "3", "--json")
    a, b = _cli(*argv), _cli(*argv)
    assert a.returncode == b.returncode == EXIT_OK
    assert a.stdout == b.stdout
    assert "timings" not in json.loads(a.stdout)
    timed = json.loads(_cli(*argv, "--timings").stdout)
    assert timed["timings"]["wall_seconds"] > 0


def test_thread_cap(monkeypatch, golden):
    monkeypatch.setenv("PLATEAU_THREADS", "2")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS"):
        monkeypatch.delenv(var, raising=False)
    _apply_thread_cap()
    assert os.environ["OMP_NUM_THREADS"] == "2" and os.environ["OPENBLAS_NUM_THREADS"] == "2"
    env = dict(os.environ, PLATEAU_THREADS="1")
    assert _cli("validate", str(golden / "y-cone.json"), env=env).returncode == EXIT_OK
