from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest

from pmcert.certificate import Certificate, dumps, loads
from pmcert.cones import GeneratorSet, build_cone
from pmcert.gram import GramBlock, assemble
from pmcert.polycore import Poly, parse_matrix, parse_poly
from pmcert.sdp import FEASIBLE, solve
from pmcert.verify import MalformedCertificate, numerical_kernel, psd_rational, round_project, verify_certificate

from conftest import synthetic_problem

F = Fraction


def obj(rows):
    n = len(rows)
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i, j] = F(rows[i][j])
    return out


def test_psd_examples():
    assert psd_rational([[2, -1], [-1, 2]]).psd
    assert psd_rational([[1, 1], [1, 1]]).psd
    assert not psd_rational([[1, 2], [2, 1]]).psd
    assert not psd_rational([[0, 1], [1, 0]]).psd


def test_noisy_identity_rounds_to_identity():
    p = assemble(parse_matrix("1 + x1^2", 1), build_cone("putinar", GeneratorSet(1), 0))
    sol = SimpleNamespace(Q=[np.eye(2) + 1e-9 * np.array([[1, -2], [-2, 3]])], free=None, pruned=None)
    out = round_project(sol, p)
    assert out.status == "exact" and out.denom == 10**3
    assert out.blocks[0].Q.tolist() == [[1, 0], [0, 1]]


def test_singular_gram_recovered_exactly():
    # (x - 1)^2 has exactly one Gram matrix on {1, x}, and it is singular
    p = assemble(parse_matrix("x1^2 - 2*x1 + 1", 1), build_cone("putinar", GeneratorSet(1), 0))
    sol = solve(p)
    assert sol.status == FEASIBLE
    out = round_project(sol, p)
    assert out.status == "exact"
    assert out.blocks[0].Q.tolist() == [[1, -1], [-1, 1]]


def test_numerical_kernel_gap():
    Q = np.array([[1.0, -1.0], [-1.0, 1.0]]) + 1e-12 * np.eye(2)
    V = numerical_kernel(Q, 2.0)
    assert V.shape == (2, 1)
    assert numerical_kernel(np.eye(3), 1.0).shape == (3, 0)


def test_synthetic_rounding_rate(rng):
    exact = total = 0
    for _ in range(20):
        p = synthetic_problem(rng, [rng.randint(2, 4), rng.randint(1, 3)], rng.randint(2, 5))
        sol = solve(p)
        if sol.status != FEASIBLE:
            continue
        total += 1
        out = round_project(sol, p, denoms=(10**3, 10**6))
        if out.status == "exact":
            exact += 1
            assert all(r == 0 for r in p.residual([b.Q for b in out.blocks]))
    assert total and exact / total >= 0.8


def sos_cert():
    lhs = parse_matrix("[[1, x1], [x1, x1^2 + 1]]", 1)
    r1 = [1, 0, 0, 1]      # e0 + e3: entry 0 gets 1, entry 1 gets x
    r2 = [0, 1, 0, 0]      # e1: entry 1 gets 1
    Q = obj([[a * b + c * d for b, d in zip(r1, r2)] for a, c in zip(r1, r2)])
    blk = GramBlock(Poly.constant(1, 1), [(0,), (1,)], 2, Q)
    cert = Certificate("scherer_hol", 0, lhs, [blk], "exact", F(0), Poly.constant(1, 1),
                       (Poly.constant(1, 1),))
    return lhs, cert


def tampered(cert, i, j, delta):
    blk = cert.blocks[0]
    Q = blk.Q.copy()
    Q[i, j] += delta
    cert.blocks[0] = GramBlock(blk.weight, blk.basis, blk.t, Q)
    return cert


def test_handmade_certificate_verifies():
    lhs, cert = sos_cert()
    rep = verify_certificate(lhs, cert)
    assert rep.exact and rep.residual_poly_norm == 0 and rep.psd_ok == [True]


def test_tampered_certificate_is_numeric_only():
    lhs, cert = sos_cert()
    tampered(cert, 0, 0, F(1, 10**6))
    rep = verify_certificate(lhs, cert)
    assert rep.status == "numeric_only" and rep.residual_poly_norm == F(1, 10**6)


def test_weight_outside_cone_is_malformed():
    lhs, cert = sos_cert()
    blk = cert.blocks[0]
    cert.blocks[0] = GramBlock(parse_poly("1 - x1", 1), blk.basis, blk.t, blk.Q)
    with pytest.raises(MalformedCertificate):
        verify_certificate(lhs, cert)


def test_asymmetric_is_malformed():
    lhs, cert = sos_cert()
    tampered(cert, 0, 1, 1)
    with pytest.raises(MalformedCertificate):
        verify_certificate(lhs, cert)


def test_size_mismatch_is_malformed():
    lhs, cert = sos_cert()
    with pytest.raises(MalformedCertificate):
        verify_certificate(parse_matrix("1 + x1^2", 1), cert)


def test_serialization_round_trip_same_report():
    lhs, cert = sos_cert()
    text = dumps(cert, include_timestamp=False)
    back = loads(text)
    assert dumps(back, include_timestamp=False) == text
    assert verify_certificate(back.lhs, back) == verify_certificate(lhs, cert)
