"""Generator sets and the scalar weight families of certificate cones.

A cone is encoded by a list of scalar weights ``w_k``; membership of a
symmetric polynomial matrix means it equals ``sum_k w_k * (SOS matrix)``.
For the quadratic module ``M(G)^t`` the weights are ``{1} + G``; for the
semiring ``P(G)^t`` they are the products ``g^alpha``; the orthant variant
multiplies those by monomials ``x^beta``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .polycore import Poly, PolyMatrix, sum_of_squares_poly

DEFAULT_SEED = 20240917

CONE_KINDS = ("putinar", "semiring", "polya_pv")
DENOMS = ("none", "sum_sq", "sum_lin", "one_plus_sum_sq", "one_plus_sum_lin")


@dataclass(frozen=True)
class GeneratorSet:
    nvars: int
    scalar_gens: tuple = ()
    matrix_gens: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "scalar_gens", tuple(self.scalar_gens))
        object.__setattr__(self, "matrix_gens", tuple(self.matrix_gens))
        for g in self.scalar_gens:
            if not isinstance(g, Poly) or g.nvars != self.nvars:
                raise ValueError("scalar generators must be Poly with matching nvars")
        for G in self.matrix_gens:
            if G.nvars != self.nvars:
                raise ValueError("matrix generator nvars mismatch")
            if not G.symmetric:
                raise ValueError("matrix generators must be symmetric")

    @property
    def exact(self):
        gens = self.scalar_gens or tuple(G[0, 0] for G in self.matrix_gens)
        return gens[0].exact if gens else True

    def flags(self):
        """``(degree, homogeneous, linear)`` for each scalar then matrix generator."""
        out = []
        for g in self.scalar_gens:
            info = g.degree_info()
            out.append((info.degree, info.is_homogeneous, info.degree == 1))
        for G in self.matrix_gens:
            info = G.degree_info()
            out.append((info.degree, info.is_homogeneous, info.degree == 1))
        return out

    def linear_gens(self):
        return [g for g in self.scalar_gens if g.degree == 1]

    def scalarized(self) -> "GeneratorSet":
        """Replace every matrix generator by its principal-minor sums (zeros dropped)."""
        if not self.matrix_gens:
            return self
        gens = list(self.scalar_gens)
        for G in self.matrix_gens:
            for c in scalarize(G):
                if not c.is_zero() and c not in gens:
                    gens.append(c)
        return GeneratorSet(self.nvars, gens, ())

    def homogenize(self) -> "GeneratorSet":
        return GeneratorSet(self.nvars + 1,
                            [g.homogenize() for g in self.scalar_gens],
                            [G.homogenize() for G in self.matrix_gens])

    def is_empty(self):
        return not self.scalar_gens and not self.matrix_gens


def _det(entries, rows: tuple, cols: tuple, cache: dict):
    key = (rows, cols)
    if key in cache:
        return cache[key]
    if len(rows) == 1:
        val = entries[rows[0]][cols[0]]
    else:
        r0, rest = rows[0], rows[1:]
        val = None
        for pos, c in enumerate(cols):
            a = entries[r0][c]
            if a.is_zero():
                continue
            minor = _det(entries, rest, cols[:pos] + cols[pos + 1:], cache)
            term = a * minor
            if pos % 2:
                term = -term
            val = term if val is None else val + term
        if val is None:
            val = Poly.zero(entries[0][0].nvars, entries[0][0].exact)
    cache[key] = val
    return val


def scalarize(G: PolyMatrix) -> list[Poly]:
    """Sums of principal ``k x k`` minors, ``k = 1..t``.

    These are the characteristic polynomial coefficients up to sign; a real
    symmetric matrix is PSD exactly when all of them are nonnegative.
    """
    if not G.symmetric:
        raise ValueError("scalarize needs a symmetric matrix")
    t = G.size
    cache: dict = {}
    out = []
    for k in range(1, t + 1):
        acc = Poly.zero(G.nvars, G.exact)
        for S in itertools.combinations(range(t), k):
            acc = acc + _det(G.entries, S, S, cache)
        out.append(acc)
    return out


def add_ball(gens: GeneratorSet, rho) -> GeneratorSet:
    """Append ``rho^2 - sum x_i^2``, making the quadratic module Archimedean."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    exact = gens.exact
    if exact and isinstance(rho, float):
        rho = Fraction(rho)
    ball = Poly.constant(rho * rho, gens.nvars, exact) - sum_of_squares_poly(gens.nvars, exact)
    return GeneratorSet(gens.nvars, list(gens.scalar_gens) + [ball], gens.matrix_gens)


@dataclass(frozen=True)
class ConeSpec:
    kind: str
    weights: tuple
    equality_mults: tuple = ()
    denom: str = "none"
    denom_power: int = 0
    mult_degree: int = 0
    target_degree: int | None = None

    def __post_init__(self):
        if not self.weights:
            raise ValueError("cone needs at least one weight")
        if self.denom not in DENOMS:
            raise ValueError(f"unknown denominator family {self.denom!r}")
        if self.denom_power < 0:
            raise ValueError("denominator power must be nonnegative")
        if self.mult_degree < 0 or self.mult_degree % 2:
            raise ValueError("multiplier degree must be a nonnegative even integer")

    @property
    def nvars(self):
        return self.weights[0].nvars


def _dedup(polys):
    seen, out = set(), []
    for p in polys:
        if p.is_zero() or p in seen:
            continue
        seen.add(p)
        out.append(p)
    return out


def _products(gens, cap):
    """All ``g^alpha`` with total degree at most ``cap`` (constants used at most once)."""
    nv = gens[0].nvars
    exact = gens[0].exact
    one = Poly.constant(1, nv, exact)
    consts = [g for g in gens if g.degree <= 0]
    moving = [g for g in gens if g.degree > 0]
    out = [one] + consts
    frontier = [(one, 0, 0)]  # (product, degree, first generator allowed)
    while frontier:
        nxt = []
        for p, d, start in frontier:
            for idx in range(start, len(moving)):
                g = moving[idx]
                nd = d + g.degree
                if nd > cap:
                    continue
                q = p * g
                out.append(q)
                nxt.append((q, nd, idx))
        frontier = nxt
    return out


def _monomials_upto(nvars, cap, exact):
    from .gram import monomial_basis
    return [Poly.monomial(m, 1, exact) for m in monomial_basis(nvars, cap)]


def build_cone(kind: str, gens: GeneratorSet, D: int, N: int = 0, target_degree: int | None = None,
               denom: str = "none", equality_mults=()) -> ConeSpec:
    """Weight family for ``kind`` in ``{'putinar', 'semiring', 'polya_pv'}``.

    ``target_degree`` is the degree of the identity being matched; weights of
    larger degree are dropped (their multiplier would have to vanish).
    """
    if kind not in CONE_KINDS:
        raise ValueError(f"unknown cone kind {kind!r}")
    if D < 0 or D % 2:
        raise ValueError("D must be a nonnegative even integer")
    if gens.matrix_gens:
        raise ValueError("matrix generators must be scalarized before building a cone")
    cap = D if target_degree is None else max(D, int(target_degree))
    nv, exact = gens.nvars, gens.exact
    one = Poly.constant(1, nv, exact)
    scal = list(gens.scalar_gens)
    if kind == "putinar":
        weights = [one] + scal
    elif kind == "semiring":
        weights = _products(scal, cap) if scal else [one]
    else:
        prods = _products(scal, cap) if scal else [one]
        weights = []
        for gp in prods:
            room = cap - max(gp.degree, 0)
            for mono in _monomials_upto(nv, room, exact):
                weights.append(mono * gp)
    weights = [w for w in _dedup(weights) if w.degree <= cap]
    return ConeSpec(kind, tuple(weights), tuple(equality_mults), denom, N, D, target_degree)


@dataclass
class SampleResult:
    points: np.ndarray
    attempts: int
    seed: int
    status: str  # "ok" | "possibly_empty"

    @property
    def acceptance_rate(self) -> float:
        return len(self.points) / self.attempts if self.attempts else 0.0

    def __len__(self):
        return len(self.points)


def membership_mask(gens: GeneratorSet, X: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    ok = np.ones(X.shape[0], dtype=bool)
    for g in gens.scalar_gens:
        ok &= g.evaluate_many(X) >= -tol
    for G in gens.matrix_gens:
        vals = G.evaluate_many(X)
        ok &= np.linalg.eigvalsh(vals)[:, 0] >= -tol
    return ok


def sample_K(gens: GeneratorSet, count: int, box=(-1.0, 1.0), tol: float = 1e-9,
             seed: int = DEFAULT_SEED, max_attempts: int | None = None) -> SampleResult:
    """Uniform rejection sampling of ``K(G)`` inside an axis-aligned box."""
    if count < 1:
        raise ValueError("count must be >= 1")
    n = gens.nvars
    lo = np.broadcast_to(np.asarray(box[0], dtype=float), (n,))
    hi = np.broadcast_to(np.asarray(box[1], dtype=float), (n,))
    if np.any(lo >= hi):
        raise ValueError("box needs lo < hi in every coordinate")
    if max_attempts is None:
        max_attempts = max(200 * count, 20000)
    rng = np.random.default_rng(seed)
    chunk = 4096
    found, attempts = [], 0
    while attempts < max_attempts and sum(len(f) for f in found) < count:
        X = lo + (hi - lo) * rng.random((chunk, n))
        take = min(chunk, max_attempts - attempts)
        X = X[:take]
        mask = membership_mask(gens, X, tol)
        accepted = X[mask]
        have = sum(len(f) for f in found)
        if have + len(accepted) >= count:
            # count attempts up to the last accepted point actually used
            need = count - have
            last = np.flatnonzero(mask)[need - 1]
            found.append(accepted[:need])
            attempts += int(last) + 1
            break
        found.append(accepted)
        attempts += take
    pts = np.concatenate(found) if found else np.empty((0, n))
    status = "ok" if len(pts) else "possibly_empty"
    return SampleResult(pts, attempts, seed, status)
