import hashlib
import json

import pytest

from heatinv.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_rho_text(capsys):
    assert run(capsys, "rho", "--alpha", "j", "--beta", "k") == (0, "-Rv[j,k]/2\n", "")


def test_rho_latex(capsys):
    code, out, _ = run(capsys, "rho", "--alpha", "j", "--beta", "k", "--format", "latex")
    assert out.strip() == r"-\frac{1}{2} \mathcal{R}_{jk}"


def test_rho_flat_bundle(capsys):
    code, out, _ = run(capsys, "rho", "--alpha", "j", "--beta", "k", "--flat-bundle")
    assert out.strip() == "0"


def test_rho_json_round_trips(capsys):
    from heatinv.rho_chi import rho
    from heatinv.textio import from_json

    code, out, _ = run(capsys, "rho", "--alpha", "jk", "--beta", "l", "--format", "json")
    assert from_json(out) == rho("jk", "l")


def test_chi(capsys):
    code, out, _ = run(capsys, "chi", "--alpha", "i", "--p", "1")
    assert out.strip() == "chi1: 2*Ric[i,p]*xi[p]/3 - Rv[i,p]*xi[p]"


def test_rk(capsys):
    code, out, _ = run(capsys, "rk", "--k", "2", "--operator", "scalar")
    assert out.strip() == "(2*Ric[p,q]*xi[p]*xi[q]/3)/(lambda - xi2)^3"


def test_invariant(capsys):
    assert run(capsys, "invariant", "--k", "2", "--operator", "scalar")[1] == "S/6\n"
    assert run(capsys, "invariant", "--k", "2")[1] == "S*d/6 - Tr(A)\n"


def test_hodge(capsys):
    code, out, _ = run(capsys, "hodge", "--n", "4", "--nu", "2", "--check")
    lines = out.splitlines()
    assert lines[0] == "a0 = 6"
    assert lines[1] == "a2 = -S"
    assert "c = (48, 90, -372, 132)" in lines
    assert lines[-1] == "pipeline agrees: True"


def test_hodge_table_json(capsys):
    code, out, _ = run(capsys, "hodge", "--n", "2", "--table", "--format", "json")
    rows = json.loads(out)
    assert [(r["n"], r["nu"]) for r in rows] == [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2)]


def test_jet_sphere(capsys):
    code, out, _ = run(capsys, "jet", "--n", "2", "--sphere", "1")
    assert code == 0
    assert out.splitlines()[0] == "S: 2"


def test_jet_identities(capsys):
    code, out, _ = run(capsys, "jet", "--n", "3", "--seed", "2", "--check", "identities")
    assert code == 0
    assert all(line.endswith(": 0") for line in out.splitlines())


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": "j", "beta": "k", "format": "latex"}))
    code, out, _ = run(capsys, "rho", "--config", str(cfg))
    assert out.strip() == r"-\frac{1}{2} \mathcal{R}_{jk}"
    code, out, _ = run(capsys, "rho", "--config", str(cfg), "--format", "text")
    assert out.strip() == "-Rv[j,k]/2"


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpah": "j"}))
    code, _, err = run(capsys, "rho", "--config", str(cfg))
    assert code == 2
    assert "unknown config key" in err


def test_output_and_manifest(capsys, tmp_path):
    out = tmp_path / "a2.txt"
    code, stdout, _ = run(capsys, "invariant", "--k", "2", "--output", str(out))
    assert code == 0 and stdout == ""
    text = out.read_text()
    assert text == "S*d/6 - Tr(A)\n"
    man = json.loads((tmp_path / "a2.txt.manifest.json").read_text())
    assert man["output"]["sha256"] == hashlib.sha256(text.encode()).hexdigest()
    assert man["config"]["k"] == 2
    assert "heatinv" in man["versions"]


@pytest.mark.parametrize("argv,msg", [
    (["invariant", "--k", "3"], "even"),
    (["hodge", "--n", "4", "--nu", "7"], "nu"),
    (["rho", "--alpha", "ijkl", "--beta", "mpq"], "bound"),
    (["rk", "--k", "2", "--operator", "hodge"], "--n"),
    (["jet", "--n", "1"], "at least 2"),
])
def test_errors_exit_2(capsys, argv, msg):
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert err.startswith("heatinv: error:") and msg in err


def test_missing_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
