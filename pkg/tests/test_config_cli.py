import json
import math
import textwrap

import numpy as np
import pytest
from numpy.testing import assert_allclose

from singular_gbs import GbsParams, log_density_gbs
from singular_gbs.cli import main
from singular_gbs.config import dumps17, fmt17, load_config, parse_config, read_matrix_csv
from singular_gbs.errors import ConfigError

MODEL = """
seed = 5

[model]
n = 2
xi2 = { identity = 3, value = 0.25 }
beta = [[2.0, 0.5, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 0.5]]

[model.kernel]
kind = "pearson7"
nu = 5.0
theta = 3.0
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def test_parse_model(tmp_path):
    cfg = load_config(write(tmp_path, "p.toml", MODEL))
    mp = cfg.model
    assert (mp.n, mp.m, mp.s, mp.p) == (2, 3, 3, 2)
    assert_allclose(mp.Xi.eigenvalues, 0.5)
    assert mp.h.params["nu"] == 5.0
    assert cfg.rng.seed == 5


@pytest.mark.parametrize(
    "text",
    [
        "kernal = 1",
        "[model]\nn = 1\nxi2 = 1.0\nbeta = 1.0\nextra = 2",
        "[model]\nn = 1\nxi2 = 1.0",
        "[model]\nn = 1\nxi2 = [[1.0, 2.0], [0.0, 1.0]]\nbeta = 1.0",
        "[model]\nn = 1\nxi2 = [[1.0, 0.0], [0.0, 1.0]]\nbeta = [[1.0, 0.0], [0.0, 1.0]]",
        "[model]\nn = 1\nxi2 = 1.0\nbeta = 1.0\nkernel = { kind = \"pearson7\", nu = 0.1 }",
        "[model]\nn = 1\nxi2 = 1.0\nbeta = 1.0\nkernel = \"cauchy\"",
        "[io]\nwhere = 1",
        "[validate]\ncount = 1",
        "seed = -1",
    ],
)
def test_config_rejects(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "bad.toml", text))


def test_config_identity_and_eigen_forms():
    cfg = parse_config({"model": {"n": 1, "xi2": {"vectors": [[1.0], [0.0]], "eigenvalues": [4.0]},
                                  "beta": {"vectors": [[1.0], [0.0]], "eigenvalues": [2.0]}}})
    assert (cfg.model.m, cfg.model.s) == (2, 1)
    assert cfg.model.Xi.eigenvalues[0] == pytest.approx(2.0)


def test_read_matrix_csv(tmp_path):
    assert_allclose(read_matrix_csv(write(tmp_path, "a.csv", "1,2\n3,4\n")), [[1, 2], [3, 4]])
    for bad in ("1,2\n3\n", "1,x\n", ""):
        with pytest.raises(ConfigError):
            read_matrix_csv(write(tmp_path, "b.csv", bad))


def test_dumps17_round_trips():
    x = 0.1 + 0.2
    text = dumps17({"x": x, "v": [1, 2.5, float("inf")], "flag": True, "none": None, "name": 'a"b'})
    back = json.loads(text)
    assert back["x"] == x and back["v"][2] == math.inf and back["name"] == 'a"b'
    assert fmt17(1 / 3) == "0.33333333333333331"
    assert json.loads(dumps17({"a": [1, {"b": 2.0}]}, indent=2)) == {"a": [1, {"b": 2.0}]}


# -- CLI -------------------------------------------------------------------------------------


def test_cli_density(tmp_path, capsys):
    params = write(tmp_path, "p.toml", MODEL)
    T = np.diag([3.0, 0.5, 0.0])
    mat = tmp_path / "T.csv"
    np.savetxt(mat, T, delimiter=",")
    assert main(["density", "--params", str(params), "--matrix", str(mat)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["logdensity"] == pytest.approx(log_density_gbs(T, load_config(params).model), abs=1e-12)


def test_cli_density_off_support(tmp_path, capsys):
    params = write(tmp_path, "p.toml", MODEL)
    mat = tmp_path / "T.csv"
    np.savetxt(mat, np.diag([3.0, 0.5, 0.2]), delimiter=",")
    assert main(["density", "--params", str(params), "--matrix", str(mat)]) == 2
    assert "SupportError" in capsys.readouterr().err


def test_cli_sample_is_reproducible(tmp_path, capsys):
    params = write(tmp_path, "p.toml", MODEL)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sample", "--params", str(params), "--count", "5", "--out", str(a)]) == 0
    assert main(["sample", "--params", str(params), "--count", "5", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = read_matrix_csv(a)
    assert rows.shape == (5, 6)
    side = json.loads((tmp_path / "a.csv.eigenvalues.json").read_text())
    assert side["rank"] == 2 and len(side["eigenvalues"]) == 5


def test_cli_usage_errors(tmp_path, capsys):
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["sample", "--params", str(tmp_path / "missing.toml"), "--count", "1", "--out", "x"]) == 2
    assert main(["jacobian-check", "--shapes", "3,2"]) == 2
    assert main(["validate", "--threads", "0"]) == 2


def test_cli_jacobian_check_report(tmp_path, capsys):
    report = tmp_path / "r.json"
    assert main(["jacobian-check", "--shapes", "2,2,1,1", "--trials", "2", "--report", str(report)]) == 0
    data = json.loads(report.read_text())
    assert data["passed"] and data["audits"][0]["name"] == "jacobian"


def test_cli_validate_univariate(tmp_path, capsys):
    params = write(tmp_path, "u.toml", """
        [model]
        n = 1
        xi2 = 0.25
        beta = 1.0

        [validate]
        univ_draws = 5000
        """)
    report = tmp_path / "r.json"
    assert main(["validate", "--suite", "univ", "--params", str(params), "--report", str(report)]) == 0
    assert json.loads(report.read_text())["audits"][0]["metrics"]["mass"] == pytest.approx(1.0, abs=1e-8)


def test_cli_validate_failure_exit_code(tmp_path, capsys, monkeypatch):
    import singular_gbs.cli as cli
    from singular_gbs.validation import AuditReport

    monkeypatch.setattr(cli, "jacobian_campaign", lambda *a, **k: AuditReport("jacobian", False, {}, {}, []))
    assert main(["validate", "--suite", "jacobian"]) == 1
