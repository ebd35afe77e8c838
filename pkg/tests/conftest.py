import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import strategies as st

from pmcert.polycore import Poly, PolyMatrix


def random_poly(rng, nvars, max_deg=3, nterms=4, exact=True, coeff_range=5):
    terms = {}
    for _ in range(nterms):
        d = rng.randint(0, max_deg)
        m = [0] * nvars
        for _ in range(d):
            m[rng.randrange(nvars)] += 1
        c = Fraction(rng.randint(-coeff_range, coeff_range), rng.randint(1, 3))
        terms[tuple(m)] = terms.get(tuple(m), 0) + c
    p = Poly(nvars, terms)
    return p if exact else p.to_float()


def random_sym_matrix(rng, t, nvars, max_deg=2, nterms=3):
    rows = [[None] * t for _ in range(t)]
    for i in range(t):
        for j in range(i, t):
            rows[i][j] = rows[j][i] = random_poly(rng, nvars, max_deg, nterms)
    return PolyMatrix(rows)


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def nprng():
    return np.random.default_rng(1234)


def monomials(nvars, max_deg):
    return st.lists(st.integers(0, max_deg), min_size=nvars, max_size=nvars).filter(
        lambda m: sum(m) <= max_deg).map(tuple)


def polys(nvars=2, max_deg=3):
    coeffs = st.fractions(min_value=-5, max_value=5, max_denominator=4)
    return st.dictionaries(monomials(nvars, max_deg), coeffs, max_size=5).map(lambda d: Poly(nvars, d))


def synthetic_problem(rng, sizes, nrows, feasible=True):
    """Random block-PSD system; feasible ones get ``b = A(R R^T)`` with full-rank ``R``.

    Infeasible ones are built around a vector ``y`` with ``sum_j y_j C_j = -I``
    and ``b'y > 0``, so they carry strict Farkas evidence by construction.
    """
    from pmcert.gram import BlockSpec, SdpProblem

    blocks = [BlockSpec(Poly.constant(1, 1), tuple((i,) for i in range(s)), 1) for s in sizes]
    keys = [(k, i, l) for k, s in enumerate(sizes) for i in range(s) for l in range(i, s)]
    rows = []
    for _ in range(nrows):
        row = {}
        for key in rng.sample(keys, min(len(keys), rng.randint(1, 4))):
            c = rng.randint(-3, 3)
            if c:
                row[key] = Fraction(c)
        if not row:
            row[keys[0]] = Fraction(1)
        rows.append(row)
    if feasible:
        Qs = []
        for s in sizes:
            R = np.array([[rng.randint(-3, 3) for _ in range(s)] for _ in range(s)]) + 4 * np.eye(s)
            Qs.append(R @ R.T)
        b = [sum(c * Fraction(int(Qs[k][i, l])) for (k, i, l), c in row.items()) for row in rows]
        return SdpProblem(blocks, rows, b, [((j,), 0, 0) for j in range(nrows)])
    y = [Fraction(rng.choice([-2, -1, 1, 2])) for _ in range(nrows)]
    # last row closes S(y) = -I
    S = {}
    for yj, row in zip(y[:-1], rows[:-1]):
        for (k, i, l), c in row.items():
            S[(k, i, l)] = S.get((k, i, l), 0) + yj * c
    last = {}
    for key in keys:
        k, i, l = key
        target = Fraction(-1) if i == l else Fraction(0)
        v = (target - S.get(key, 0)) / y[-1]
        if v:
            last[key] = v
    rows[-1] = last
    b = [Fraction(rng.randint(-5, 5)) for _ in range(nrows)]
    ytb = sum(a * c for a, c in zip(y, b))
    b[-1] += (1 - ytb) / y[-1]
    return SdpProblem(blocks, rows, b, [((j,), 0, 0) for j in range(nrows)])


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
