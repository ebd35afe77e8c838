import numpy as np
import pytest
from math import comb

from pmcert.cones import GeneratorSet, add_ball, build_cone, membership_mask, sample_K, scalarize
from pmcert.polycore import Poly, parse_matrix, parse_poly

from conftest import random_sym_matrix


def P(s, n=1):
    return parse_poly(s, n)


def test_scalarize_1x1():
    assert scalarize(parse_matrix("x1^2 - 1", 1)) == [P("x1^2-1")]


def test_scalarize_2x2():
    assert scalarize(parse_matrix("[[1, x1],[x1, 1]]", 1)) == [P("2"), P("1 - x1^2")]


def test_scalarize_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        scalarize(parse_matrix("[[1, x1],[0, 1]]", 1))


def test_scalarize_matches_eigenvalues(rng, nprng):
    G = random_sym_matrix(rng, 3, 2, max_deg=2)
    polys = scalarize(G)
    X = nprng.uniform(-2, 2, size=(1000, 2))
    psd = np.linalg.eigvalsh(G.evaluate_many(X))[:, 0] >= -1e-9
    minors = np.all([p.evaluate_many(X) >= -1e-9 for p in polys], axis=0)
    assert np.array_equal(psd, minors)


def test_homogeneous_even_generator_scalarizes_homogeneous():
    G = parse_matrix("[[x1^2, x1*x2],[x1*x2, x2^2 + x1^2]]", 2)
    for c in scalarize(G):
        assert c.is_homogeneous() and c.degree % 2 == 0


def test_add_ball():
    g = add_ball(GeneratorSet(1, [P("x1")]), 2)
    assert list(g.scalar_gens) == [P("x1"), P("4 - x1^2")]
    g = add_ball(GeneratorSet(2), 1)
    assert list(g.scalar_gens) == [parse_poly("1 - x1^2 - x2^2", 2)]
    with pytest.raises(ValueError):
        add_ball(g, 0)


def test_ball_samples_stay_in_ball():
    g = add_ball(GeneratorSet(2, [parse_poly("x1", 2)]), 2)
    pts = sample_K(g, 500, (-3, 3)).points
    assert np.all(np.linalg.norm(pts, axis=1) <= 2 + 1e-9) and np.all(pts[:, 0] >= -1e-9)


def test_build_cone_putinar():
    g = GeneratorSet(1, [P("x1"), P("1-x1")])
    assert build_cone("putinar", g, 2).weights == (P("1"), P("x1"), P("1-x1"))


def test_build_cone_semiring():
    g = GeneratorSet(1, [P("x1"), P("1-x1")])
    w = build_cone("semiring", g, 2).weights
    expect = [P(s) for s in ("1", "x1", "1-x1", "x1^2", "x1*(1-x1)", "(1-x1)^2")]
    assert set(w) == set(expect) and len(w) == len(expect)


def test_build_cone_polya_pv():
    w = build_cone("polya_pv", GeneratorSet(2), 2, target_degree=3).weights
    assert len(w) == comb(2 + 3, 3)
    assert all(len(p.terms) == 1 and p.degree <= 3 for p in w)


def test_build_cone_no_duplicates_and_cap():
    g = GeneratorSet(1, [P("x1"), P("x1"), P("1-x1^2")])
    for kind in ("putinar", "semiring", "polya_pv"):
        w = build_cone(kind, g, 4).weights
        assert len(set(w)) == len(w) and all(p.degree <= 4 for p in w)


def test_build_cone_errors():
    with pytest.raises(ValueError):
        build_cone("putinar", GeneratorSet(1), 3)
    with pytest.raises(ValueError):
        build_cone("putinar", GeneratorSet(1, [], [parse_matrix("[[1, x1],[x1, 1]]", 1)]), 2)


def test_sample_interval():
    r = sample_K(GeneratorSet(1, [P("x1"), P("1-x1")]), 300, (-2, 2))
    assert r.status == "ok" and len(r) == 300
    assert np.all((r.points >= 0) & (r.points <= 1))
    assert 0.15 < r.acceptance_rate < 0.35


def test_sample_empty():
    r = sample_K(GeneratorSet(1, [P("-1-x1^2")]), 10, (-2, 2), max_attempts=5000)
    assert r.status == "possibly_empty" and len(r) == 0


def test_sample_matrix_generator():
    g = GeneratorSet(1, [], [parse_matrix("[[1, x1],[x1, 1]]", 1)])
    r = sample_K(g, 200, (-3, 3))
    assert np.all(np.abs(r.points) <= 1 + 1e-9)


def test_sampling_same_points_after_scalarization():
    g = GeneratorSet(2, [], [parse_matrix("[[1, x1],[x1, 1 - x2^2]]", 2)])
    a = sample_K(g, 300, (-1, 1), seed=7)
    b = sample_K(g.scalarized(), 300, (-1, 1), seed=7)
    assert a.status == "ok" and np.array_equal(a.points, b.points)


def test_sampling_is_deterministic():
    g = GeneratorSet(1, [P("x1")])
    assert np.array_equal(sample_K(g, 50, seed=3).points, sample_K(g, 50, seed=3).points)


def test_sample_preconditions():
    with pytest.raises(ValueError):
        sample_K(GeneratorSet(1), 0)
    with pytest.raises(ValueError):
        sample_K(GeneratorSet(1), 5, (1, 0))
