import csv
import json
import math

import numpy as np
import pytest

from qmemsim import cli


def _run(tmp_path, *argv, sub="out"):
    out = tmp_path / sub
    code = cli.main([*argv, "--out", str(out)])
    return code, out


def _csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_check_ising_passes(tmp_path):
    code, out = _run(tmp_path, "check", "--kind", "ising", "--size", "4", "--beta", "0.7")
    assert code == 0
    rep = json.loads((out / "check.json").read_text())
    assert rep["schema"] == 1 and rep["pass"]
    assert rep["ergodicity"]["commutant_dimension"] == 2
    assert rep["ergodicity"]["dense_commutant_dimension"] == 2
    assert rep["factorization"]["max_error"] < 1e-8
    man = json.loads((out / "manifest.json").read_text())
    assert man["schema"] == 1 and man["status"] == "pass"
    assert {a["path"] for a in man["artifacts"]} == {"check.json"}


def test_check_reports_oracle_next_to_labels(tmp_path):
    code, out = _run(tmp_path, "check", "--kind", "ising", "--size", "4", "--beta", "0.7")
    o = json.loads((out / "check.json").read_text())["oracle"]
    assert o["pass"]
    assert o["omega_star"] == pytest.approx(4.0)
    assert o["nominal"]["bohr_frequency"] == 2.0
    assert o["nominal"]["stabilizer_expectation"] == pytest.approx(math.tanh(0.35))
    assert o["ed"]["star_or_bond_expectation"] == pytest.approx(o["implementation"]["stabilizer_expectation"],
                                                               abs=1e-10)
    assert o["differs_from_nominal"]["bohr_frequency"]


def test_check_failure_exits_one(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "TOL", -1.0)
    code, out = _run(tmp_path, "check", "--kind", "ising", "--size", "4")
    assert code == 1
    assert json.loads((out / "manifest.json").read_text())["status"] == "fail"


@pytest.mark.parametrize("argv, field", [
    (["autocorr", "--times", ""], "times"),
    (["autocorr", "--t-min", "5", "--t-max", "1"], "times"),
    (["check", "--kind", "cube"], "model.kind"),
    (["check", "--kind", "ising", "--size", "2"], "model.size"),
    (["autocorr", "--method", "kmc", "--n-traj", "10"], "n_traj"),
])
def test_config_errors_exit_two(tmp_path, capsys, argv, field):
    code, _ = _run(tmp_path, *argv)
    assert code == 2
    assert f"field '{field}'" in capsys.readouterr().err


def test_unknown_config_field(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"kind": "ising", "size": 4}, "temperature": 3}))
    code, _ = _run(tmp_path, "gibbs", "--config", str(cfg))
    assert code == 2
    assert "temperature" in capsys.readouterr().err


def test_usage_errors_exit_two(tmp_path):
    assert cli.main(["frobnicate"]) == 2
    assert cli.main(["check", "--beta", "warm"]) == 2
    assert cli.main([]) == 2


def test_capacity_suggests_other_method(tmp_path, capsys):
    code, _ = _run(tmp_path, "autocorr", "--kind", "kitaev", "--size", "3", "--method", "exact-full")
    assert code == 2
    err = capsys.readouterr().err
    assert "exact-reduced" in err or "kmc" in err


def test_gibbs_table(tmp_path):
    code, out = _run(tmp_path, "gibbs", "--kind", "kitaev", "--size", "2", "--betas", "0.5,1",
                     "--operators", "X1 X2 X3 X4;Z1")
    assert code == 0
    header, rows = _csv(out / "gibbs.csv")
    assert header == ["beta", "name", "pauli", "value_re", "value_im"]
    assert len(rows) == 4
    zero = [r for r in rows if r[1] == "Z1"]
    assert all(float(r[3]) == 0 for r in zero)


def test_autocorr_exact_and_kmc_agree(tmp_path):
    base = ["autocorr", "--kind", "kitaev", "--size", "2", "--beta", "0.6", "--logical", "Z1",
            "--times", "0,0.25,0.5,1,2"]
    assert _run(tmp_path, *base, sub="exact")[0] == 0
    assert _run(tmp_path, *base, "--method", "kmc", "--n-traj", "5000", "--seed", "4", sub="kmc")[0] == 0
    h, ex = _csv(tmp_path / "exact" / "autocorr.csv")
    assert h == ["t", "value"]
    h, km = _csv(tmp_path / "kmc" / "autocorr.csv")
    assert h == ["t", "mean", "stderr", "n_traj"]
    for e, k in zip(ex[1:], km[1:]):
        assert abs(float(e[1]) - float(k[1])) < 3 * float(k[2])
        assert int(k[3]) == 5000
    summary = json.loads((tmp_path / "kmc" / "summary.json").read_text())
    assert summary["schema"] == 1 and "tau" in summary["lifetime"]


def test_exact_full_matches_exact_reduced(tmp_path):
    base = ["autocorr", "--kind", "ising", "--size", "4", "--beta", "0.5", "--logical", "X",
            "--times", "0.1,1,3"]
    _run(tmp_path, *base, "--method", "exact-full", sub="full")
    _run(tmp_path, *base, sub="red")
    a = np.array([float(r[1]) for r in _csv(tmp_path / "full" / "autocorr.csv")[1]])
    b = np.array([float(r[1]) for r in _csv(tmp_path / "red" / "autocorr.csv")[1]])
    assert np.allclose(a, b, atol=1e-9)


def test_lifetime_scan_outputs(tmp_path):
    code, out = _run(tmp_path, "lifetime-scan", "--kind", "kitaev", "--sizes", "2,3", "--beta", "0.6")
    assert code == 0
    header, rows = _csv(out / "lifetimes.csv")
    assert "tau" in header and len(rows) == 2
    doc = json.loads((out / "lifetimes.json").read_text())
    assert doc["schema"] == 1 and len(doc["rows"]) == 2


def test_manifest_rerun_is_byte_identical(tmp_path):
    code, out = _run(tmp_path, "autocorr", "--kind", "kitaev", "--size", "2", "--beta", "0.8",
                     "--t-min", "0.1", "--t-max", "5", "--per-decade", "5", sub="first")
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["config_hash"] == cli.git_hash(cli.canonical_json(man["config"]).encode())
    code, again = _run(tmp_path, "autocorr", "--config", str(out / "manifest.json"), sub="second")
    assert code == 0
    assert (out / "autocorr.csv").read_bytes() == (again / "autocorr.csv").read_bytes()
    for art in man["artifacts"]:
        data = (out / art["path"]).read_bytes()
        assert cli.git_hash(data) == art["hash"]


def test_git_hash_matches_git_blob():
    # git hash-object of "hello\n"
    assert cli.git_hash(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"
