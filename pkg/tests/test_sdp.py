from fractions import Fraction

import numpy as np
import pytest

from pmcert.cones import GeneratorSet, build_cone
from pmcert.gram import SdpProblem, assemble
from pmcert.polycore import parse_matrix
from pmcert.sdp import FEASIBLE, INFEASIBLE, check_dual_evidence, rationalize_evidence, solve

from conftest import synthetic_problem


def problem(text, nvars=1, D=0):
    return assemble(parse_matrix(text, nvars), build_cone("putinar", GeneratorSet(nvars), D))


def test_toy_feasible():
    p = problem("1 + x1^2")
    sol = solve(p)
    assert sol.status == FEASIBLE
    assert sol.max_residual <= 1e-8 * sol.scale and sol.min_eig >= -1e-9
    assert np.allclose(sol.Q[0], np.eye(2), atol=1e-6)


def test_negative_diagonal_gives_evidence():
    p = problem("-1")
    sol = solve(p)
    assert sol.status == INFEASIBLE
    chk = check_dual_evidence(p, sol.y)
    assert chk.valid and chk.ytb > 0


def test_synthetic_feasible(rng):
    hits = 0
    for _ in range(10):
        p = synthetic_problem(rng, [rng.randint(2, 4), rng.randint(1, 3)], rng.randint(2, 6))
        sol = solve(p)
        hits += sol.status == FEASIBLE
        if sol.status == FEASIBLE:
            assert max(abs(r) for r in p.residual(sol.Q)) <= 1e-8 * p.scale()
    assert hits == 10


def test_synthetic_infeasible(rng):
    for _ in range(10):
        p = synthetic_problem(rng, [rng.randint(2, 4), rng.randint(1, 3)], rng.randint(2, 6), feasible=False)
        sol = solve(p)
        assert sol.status == INFEASIBLE
        assert check_dual_evidence(p, sol.y).valid


def test_dual_check_rejects_zero_and_survives_small_perturbation():
    p = problem("[[-1 - x1^2, 0], [0, -2]]")
    assert not check_dual_evidence(p, [0] * p.nrows).valid
    y = solve(p).y
    chk = check_dual_evidence(p, y)
    assert chk.valid and chk.margin > 0
    # a nudge well inside the eigenvalue margin cannot break -S(y) >= 0
    weight = sum(abs(c) for r in p.rows for c in r.values())
    delta = Fraction(chk.margin / (10 * weight)).limit_denominator(10**12)
    bumped = [v + delta * (-1) ** j for j, v in enumerate(y)]
    assert check_dual_evidence(p, bumped).valid


def test_dual_check_length_mismatch():
    p = problem("-1")
    with pytest.raises(ValueError):
        check_dual_evidence(p, [1, 2])


def test_rationalize_evidence_rejects_zero():
    assert rationalize_evidence(problem("-1"), [0.0]) is None


def test_deterministic():
    p = problem("[[1 + x1^2, x1], [x1, 2 + x1^2]]", D=2)
    a, b = solve(p, seed=3), solve(p, seed=3)
    assert a.status == b.status == FEASIBLE
    assert all(np.array_equal(x, y) for x, y in zip(a.Q, b.Q))


def test_scale_invariance():
    p = problem("[[2 + x1^2, x1], [x1, 1 + x1^2]]", D=2)
    q = SdpProblem(p.blocks, [{k: 10 * c for k, c in r.items()} for r in p.rows],
                   [10 * v for v in p.b], p.labels)
    a, b = solve(p), solve(q)
    assert a.status == b.status == FEASIBLE


def test_structurally_empty_rejected():
    with pytest.raises(ValueError):
        solve(SdpProblem([], [], [], []))


def test_bad_tolerance_rejected():
    with pytest.raises(ValueError):
        solve(problem("1"), tol_r=0)


def test_summary_mentions_status():
    assert solve(problem("1")).summary().startswith("feasible")
