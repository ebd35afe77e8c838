import subprocess
import sys
from fractions import Fraction

import pytest

from pmcert.cli import main

INTERVAL = """\
nvars: 1
kind: scherer_hol
F: "[[1 + x1, x1], [x1, 2 - x1]]"
scalar_gens: ["x1", "1 - x1"]
D: 2
"""

MOTZKIN = """\
nvars: 3
kind: reznick
F: "x1^4*x2^2 + x1^2*x2^4 + x3^6 - 3*x1^2*x2^2*x3^2"
"""


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return _write


def strip_timestamp(text):
    return "\n".join(l for l in text.splitlines() if not l.startswith("timestamp"))


def test_certify_then_verify(write, tmp_path, capsys):
    prob = write("interval.yaml", INTERVAL)
    assert main(["certify", prob]) == 0
    cert = tmp_path / "interval.cert"
    assert cert.exists()
    assert "N=0: exact" in capsys.readouterr().out
    assert main(["verify", str(cert), prob]) == 0
    assert "exact: residual_poly_norm=0" in capsys.readouterr().out


def test_out_flag(write, tmp_path):
    prob = write("p.yaml", INTERVAL)
    out = tmp_path / "elsewhere.txt"
    assert main(["certify", prob, "-o", str(out)]) == 0
    assert out.read_text().startswith("#")


def test_parse_error_exit_1(write, capsys):
    prob = write("bad.yaml", 'nvars: 1\nkind: scherer_hol\nF: "x1^"\n')
    assert main(["certify", prob]) == 1
    err = capsys.readouterr().err
    assert "bad.yaml:3:" in err


def test_unknown_key_rejected(write, capsys):
    prob = write("bad.yaml", INTERVAL + "colour: blue\n")
    assert main(["certify", prob]) == 1
    assert "colour" in capsys.readouterr().err


def test_precondition_violation_exit_1(write):
    prob = write("p.yaml", "nvars: 1\nkind: reznick\nF: \"x1^2 + 1\"\n")
    assert main(["certify", prob]) == 1


def test_numeric_only_exit_2(write, tmp_path):
    prob = write("p.yaml", INTERVAL)
    assert main(["certify", prob, "--schedule"]) == 2
    assert "status = numeric" in (tmp_path / "p.cert").read_text()


def test_motzkin_not_sos_exit_3(write, capsys):
    prob = write("m.yaml", MOTZKIN + "N_max: 0\n")
    assert main(["certify", prob]) == 3
    assert "N=0: infeasible_evidence" in capsys.readouterr().out


def test_inconclusive_exit_4(write):
    prob = write("p.yaml", INTERVAL)
    # feasible problem, but no solution can meet this residual bound and no evidence exists
    assert main(["certify", prob, "--tol-r", "1e-300"]) == 4


def test_tampered_certificate_exit_2(write, tmp_path, capsys):
    prob = write("p.yaml", INTERVAL)
    assert main(["certify", prob]) == 0
    cert = tmp_path / "p.cert"
    lines = cert.read_text().splitlines()
    i = lines.index("[block 0]") + 3           # first row of the first Gram
    toks = lines[i].split()
    toks[0] = str(Fraction(toks[0]) + Fraction(1, 10**6))
    lines[i] = " ".join(toks)
    cert.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["verify", str(cert), prob]) == 2
    assert "residual_poly_norm=1/1000000" in capsys.readouterr().out


def test_wrong_problem_exit_2(write, tmp_path):
    prob = write("p.yaml", INTERVAL)
    other = write("q.yaml", INTERVAL.replace("2 - x1", "3 - x1"))
    assert main(["certify", prob]) == 0
    assert main(["verify", str(tmp_path / "p.cert"), other]) == 2


def test_garbled_certificate_exit_1(write, tmp_path):
    prob = write("p.yaml", INTERVAL)
    cert = write("junk.cert", "[meta]\nkind = scherer_hol\n")
    assert main(["verify", cert, prob]) == 1


def test_byte_determinism(write, tmp_path):
    prob = write("p.yaml", INTERVAL)
    main(["certify", prob, "-o", str(tmp_path / "a.cert")])
    main(["certify", prob, "-o", str(tmp_path / "b.cert")])
    a, b = (tmp_path / "a.cert").read_text(), (tmp_path / "b.cert").read_text()
    assert strip_timestamp(a) == strip_timestamp(b)


def test_flags_override_file(write, tmp_path):
    prob = write("p.yaml", INTERVAL)
    assert main(["certify", prob, "--kind", "handelman", "--seed", "7"]) == 0
    text = (tmp_path / "p.cert").read_text()
    assert "kind = handelman" in text and "seed = 7" in text


def test_seed_from_environment(write, tmp_path, monkeypatch):
    monkeypatch.setenv("PMCERT_SEED", "99")
    prob = write("p.yaml", INTERVAL)
    assert main(["certify", prob]) == 0
    assert "seed = 99" in (tmp_path / "p.cert").read_text()


def test_sample_check_interval(write, capsys):
    prob = write("p.yaml", INTERVAL)
    assert main(["sample-check", prob, "--count", "500"]) == 0
    out = capsys.readouterr().out
    value = float(out.split("min eigmin(F(x)) = ")[1].split()[0])
    # smallest eigenvalue of F on [0, 1] is attained at x = 0: eig of [[1,0],[0,2]]
    assert 0 < value < 1.01


def test_sample_check_negative_exit_2(write):
    prob = write("p.yaml", 'nvars: 1\nkind: scherer_hol\nF: "-1"\n')
    assert main(["sample-check", prob]) == 2


def test_sample_check_empty_exit_5(write, capsys):
    prob = write("p.yaml", 'nvars: 1\nkind: scherer_hol\nF: "1"\nscalar_gens: ["-1 - x1^2"]\ncount: 10\n')
    assert main(["sample-check", prob]) == 5
    assert "possibly empty K in box" in capsys.readouterr().out


def test_homogenize(write, capsys):
    prob = write("p.yaml", 'nvars: 1\nkind: ppv_nonhomog\nF: "x1^2 + x1 + 1"\n')
    assert main(["homogenize", prob]) == 0
    out = capsys.readouterr().out
    assert "x0" in out and "x1^2" in out


def test_console_entry_point(write):
    prob = write("p.yaml", INTERVAL)
    run = subprocess.run([sys.executable, "-m", "pmcert.cli", "sample-check", prob],
                         capture_output=True, text=True)
    assert run.returncode == 0
