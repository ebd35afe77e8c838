import warnings
from fractions import Fraction

import numpy as np
import pytest

from pmcert import certify
from pmcert.certify import CertificationFailed, build_target
from pmcert.cones import GeneratorSet, sample_K
from pmcert.polycore import Poly, parse_matrix, parse_poly, sum_of_squares_poly
from pmcert.verify import verify_certificate


def P(text, n=1):
    return parse_poly(text, n)


def M(text, n=1):
    return parse_matrix(text, n)


INTERVAL = M("[[1 + x1, x1], [x1, 2 - x1]]")
INTERVAL_GENS = [P("x1"), P("1 - x1")]


def sound_on(cert, gens, box=(-1, 1), count=300):
    pts = sample_K(gens, count, box, seed=5).points
    vals = cert.lhs.to_float().evaluate_many(pts)
    return float(np.min(np.linalg.eigvalsh(vals)[:, 0])) >= -1e-9


def test_interval_is_positive_definite_on_grid():
    xs = np.linspace(0, 1, 1001)
    det = 2 + xs - 2 * xs**2
    assert det.min() >= 1 - 1e-12 and (1 + xs).min() > 0


def test_scherer_hol_interval():
    cert = certify.scherer_hol(INTERVAL, INTERVAL_GENS, D=2)
    assert cert.status == "exact" and cert.N == 0 and cert.denom == Poly.constant(1, 1)
    assert verify_certificate(cert.lhs, cert).exact
    assert {str(b.weight) for b in cert.blocks} <= {"1", "x1", "-x1 + 1", "1 - x1"} | {str(g) for g in INTERVAL_GENS}
    assert sound_on(cert, GeneratorSet(1, INTERVAL_GENS))


def test_pure_sos_single_weight():
    cert = certify.scherer_hol(M("[[1, x1], [x1, x1^2 + 1]]"))
    assert cert.status == "exact"
    assert [str(b.weight) for b in cert.blocks] == ["1"]


def test_negative_constant_is_refuted():
    with pytest.raises(CertificationFailed) as info:
        certify.scherer_hol(M("-1"), INTERVAL_GENS)
    assert info.value.all_infeasible
    assert info.value.attempts[0].evidence_valid


def test_eps_shift():
    cert = certify.eps_shift(M("x1^2"), [P("1 - x1^2")], eps=Fraction(1, 100))
    assert cert.status == "exact"
    assert cert.lhs == M("x1^2 + 1/100")


def test_eps_shift_monotone():
    for eps in (Fraction(1, 100), Fraction(1, 10), 1):
        assert certify.eps_shift(INTERVAL, INTERVAL_GENS, eps=eps).status == "exact"


def test_eps_zero_rejected():
    with pytest.raises(ValueError):
        certify.eps_shift(M("x1^2"), eps=0)


def test_handelman_interval_semiring_weights():
    cert = certify.handelman(INTERVAL, INTERVAL_GENS, D=2)
    assert cert.status == "exact"
    allowed = {P("1"), P("x1"), P("1 - x1"), P("x1^2"), P("x1 - x1^2"), P("(1 - x1)^2")}
    assert set(cert.cone_weights) == allowed
    assert {b.weight for b in cert.blocks} <= allowed


def test_handelman_simplex():
    gens = [P("x1", 2), P("x2", 2), P("1 - x1 - x2", 2)]
    cert = certify.handelman(M("2 - x1 - x2", 2), gens, D=2)
    assert cert.status == "exact"
    assert sound_on(cert, GeneratorSet(2, gens), box=(0, 1))


def test_handelman_needs_linear_generator():
    with pytest.raises(ValueError):
        certify.handelman(INTERVAL, [P("1 - x1^2")])


def test_putinar_vasilescu_already_sos():
    cert = certify.putinar_vasilescu(M("x1^2 + x2^2", 2))
    assert cert.N == 0 and cert.status == "exact"


def test_homogeneous_kinds_reject_bad_input():
    with pytest.raises(ValueError):
        certify.putinar_vasilescu(M("x1^2 + 1", 1))
    with pytest.raises(ValueError):
        certify.reznick(M("x1^3", 1))
    with pytest.raises(ValueError):
        certify.pv_nonhomog(M("x1^3 + 1", 1))
    with pytest.raises(ValueError):
        certify.ppv_nonhomog(M("x1 + 1", 1))
    with pytest.raises(ValueError):
        certify.marshall(M("x1^2", 1), eps=0, lam=1)
    with pytest.raises(ValueError):
        certify.marshall_nonhomog(M("x1^3 + 1", 1), eps=1, lam=1)


def test_reznick_square():
    cert = certify.reznick(M("(x1^2 + x2^2)^2", 2))
    assert cert.N == 0 and [str(b.weight) for b in cert.blocks] == ["1"]


def test_homogeneous_block_expansions():
    cert = certify.reznick(M("(x1^2 + x2^2)^2", 2))
    for blk in cert.blocks:
        assert all(sum(m) == 2 for m in blk.basis)


def test_pv_nonhomog_sos():
    cert = certify.pv_nonhomog(M("x1^2 + 1"))
    assert cert.N == 0 and cert.lhs == M("x1^2 + 1") and cert.nvars == 1
    assert verify_certificate(cert.lhs, cert).exact


def test_polya_classical_identity():
    assert P("(x1 + x2) * (x1^2 - x1*x2 + x2^2)", 2) == P("x1^3 + x2^3", 2)


def test_polya_quadratic():
    cert = certify.polya(M("x1^2 - x1*x2 + x2^2", 2))
    assert cert.status == "exact" and cert.N <= 3
    for w in cert.cone_weights:
        assert all(c >= 0 for c in w.terms.values())
    assert sound_on(cert, GeneratorSet(2), box=(0, 1))


def test_polya_forced_n1():
    cert = certify.polya(M("x1^2 - x1*x2 + x2^2", 2), N_range=(1, 1))
    assert cert.N == 1 and cert.lhs == M("x1^3 + x2^3", 2)


def test_polya_pv_sos():
    assert certify.polya_pv(M("x1^2 + x2^2", 2)).N == 0


def test_polya_boundary_case_reports_statuses():
    # xy vanishes on the axes; whatever happens, every attempt is reported
    try:
        cert = certify.polya(M("x1*x2", 2), N_range=(0, 2))
        assert verify_certificate(cert.lhs, cert).exact
    except CertificationFailed as exc:
        assert [a.N for a in exc.attempts] == [0, 1, 2]


def test_ppv_nonhomog():
    cert = certify.ppv_nonhomog(M("x1^2 + x1 + 1"))
    assert cert.status == "exact" and cert.nvars == 1
    assert verify_certificate(cert.lhs, cert).exact
    assert certify.ppv_nonhomog(M("1")).N == 0


def test_marshall_trivial():
    cert = certify.marshall(M("(x1^2 + x2^2)^2", 2), eps=1, lam=1)
    assert cert.N == 2 and cert.status == "exact"
    assert cert.lhs == M("2*(x1^2 + x2^2)^2", 2)


def test_marshall_warns_without_lambda():
    with pytest.warns(UserWarning):
        certify.marshall(M("(x1^2 + x2^2)^2", 2), eps=1)


def test_marshall_nonhomog_square():
    cert = certify.marshall_nonhomog(M("(x1^2 - 1)^2"), eps=Fraction(1, 10), lam=1)
    assert cert.N == 2 and verify_certificate(cert.lhs, cert).exact


def test_build_target_marshall_lhs():
    sig = sum_of_squares_poly(2)
    t = build_target("marshall", M("x1^2", 2), None, N=2, eps=Fraction(1, 2), lam=1)
    assert t.lhs == M("x1^2", 2).map(lambda p: (p + sig * Fraction(1, 2)) * sig)


def test_unknown_kind_and_bad_D():
    with pytest.raises(ValueError):
        certify.run("nope", INTERVAL)
    with pytest.raises(ValueError):
        certify.run("scherer_hol", INTERVAL, D=3)


def test_attempts_reported():
    seen = []
    certify.reznick(M("(x1^2 + x2^2)^2", 2), on_attempt=seen.append)
    assert len(seen) == 1 and "exact" in seen[0].line()
