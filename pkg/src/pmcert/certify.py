"""Theorem drivers: build the identity to certify, scan the exponent N, round.

Each driver reduces to ``lhs in cone``: it builds ``lhs`` (F times a power of
a denominator, possibly shifted), a weight family, assembles the
coefficient-matching SDP, solves it and tries to make the solution exact.
The first N whose SDP is feasible wins. Drivers for nonhomogeneous data
homogenize, run the homogeneous driver and substitute ``X0 = 1`` into every
weight, basis monomial and the left side; Gram matrices carry over as is.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import sdp as sdp_mod
from .certificate import Certificate
from .cones import DEFAULT_SEED, ConeSpec, GeneratorSet, build_cone, sample_K
from .gram import GramBlock, InfeasibleByDegree, SdpProblem, assemble
from .polycore import Poly, PolyMatrix, sum_of_squares_poly, sum_of_vars_poly
from .sdp import check_dual_evidence
from .verify import DEFAULT_SCHEDULE, round_project, verify_certificate

KINDS = ("scherer_hol", "eps_shift", "handelman", "putinar_vasilescu", "reznick", "pv_nonhomog",
         "polya_pv", "polya", "ppv_nonhomog", "marshall", "marshall_nonhomog")

_HOMOG_BASE = {"pv_nonhomog": "putinar_vasilescu", "ppv_nonhomog": "polya_pv",
               "marshall_nonhomog": "marshall"}


class CertificationFailed(RuntimeError):
    """No N in the scanned range produced a feasible SDP."""

    def __init__(self, kind, attempts):
        self.kind = kind
        self.attempts = attempts
        lines = "; ".join(f"N={a.N}: {a.status}" for a in attempts)
        super().__init__(f"{kind}: no certificate found ({lines})")

    @property
    def all_infeasible(self) -> bool:
        return bool(self.attempts) and all(a.status == sdp_mod.INFEASIBLE for a in self.attempts)


@dataclass
class Attempt:
    N: int
    status: str
    detail: str = ""
    evidence: list | None = None
    evidence_valid: bool | None = None
    seconds: float = 0.0

    def line(self) -> str:
        extra = f" ({self.detail})" if self.detail else ""
        return f"N={self.N}: {self.status}{extra} [{self.seconds:.2f}s]"


@dataclass
class Target:
    """The identity ``lhs = sum_k w_k * SOS_k`` for one kind and one N."""
    kind: str
    N: int
    lhs: PolyMatrix
    cone: ConeSpec
    denom: Poly
    homogeneous: bool


@dataclass
class Tolerances:
    tol_r: float = 1e-8
    tol_e: float = 1e-9
    max_iter: int = 200
    schedule: tuple = DEFAULT_SCHEDULE


def _rational(x, name):
    if isinstance(x, float):
        x = Fraction(str(x))
    x = Fraction(x)
    if x <= 0:
        raise ValueError(f"{name} must be positive")
    return x


def _exact_matrix(F) -> PolyMatrix:
    if isinstance(F, Poly):
        F = PolyMatrix([[F]])
    if not F.symmetric:
        raise ValueError("F must be symmetric")
    return F if F.exact else F.map(lambda p: p.to_exact())


def _gens(gens, nvars) -> GeneratorSet:
    if gens is None:
        return GeneratorSet(nvars)
    if isinstance(gens, GeneratorSet):
        g = gens
    else:
        gens = list(gens)
        g = GeneratorSet(nvars, [x for x in gens if isinstance(x, Poly)],
                         [x for x in gens if isinstance(x, PolyMatrix)])
    if g.nvars != nvars:
        raise ValueError("generators and F disagree on the number of variables")
    return g.scalarized()


def _require_even_homogeneous(F: PolyMatrix, gens: GeneratorSet, allow_zero=False):
    info = F.degree_info()
    if not info.is_homogeneous:
        raise ValueError("F must be homogeneous")
    d = int(info.degree)
    if d % 2 or (d == 0 and not allow_zero):
        raise ValueError(f"F must have even degree{'' if allow_zero else ' > 0'}, got {d}")
    for g in gens.scalar_gens:
        gi = g.degree_info()
        if not gi.is_homogeneous or int(gi.degree) % 2:
            raise ValueError(f"generator {g} must be homogeneous of even degree")
    return d


def build_target(kind: str, F, gens=None, N: int = 0, D: int = 2, eps=None, lam=None) -> Target:
    """Left side and cone for ``kind`` at exponent ``N`` (homogeneous kinds only
    see their own variables; nonhomogeneous kinds return the dehomogenized view)."""
    F = _exact_matrix(F)
    nv, t = F.nvars, F.size
    G = _gens(gens, nv)
    if kind in _HOMOG_BASE:
        Fh, Gh = _homogenize_problem(F, G)
        inner = build_target(_HOMOG_BASE[kind], Fh, Gh, N, D, eps, lam)
        weights = []
        for w in inner.cone.weights:
            dw = w.dehomogenize()
            if dw not in weights:
                weights.append(dw)
        cone = ConeSpec(inner.cone.kind, tuple(weights), (), _nonhomog_denom(inner.cone.denom),
                        inner.cone.denom_power, inner.cone.mult_degree, inner.cone.target_degree)
        return Target(kind, N, inner.lhs.dehomogenize(), cone, inner.denom.dehomogenize(), False)
    one = Poly.constant(1, nv)
    I = PolyMatrix.identity(t, nv)
    if kind in ("scherer_hol", "eps_shift", "handelman"):
        lhs = F
        if kind == "eps_shift":
            if eps is None:
                raise ValueError("eps_shift needs eps > 0")
            lhs = F + I * _rational(eps, "eps")
        if kind == "handelman" and not G.linear_gens():
            raise ValueError("handelman needs at least one linear generator")
        ck = "semiring" if kind == "handelman" else "putinar"
        target_deg = max(int(lhs.degree) if not lhs.is_zero() else 0, D)
        cone = build_cone(ck, G, D, 0, target_deg)
        return Target(kind, 0, lhs, cone, one, False)
    if kind in ("putinar_vasilescu", "reznick", "marshall"):
        if kind == "reznick" and not G.is_empty():
            raise ValueError("reznick takes no generators")
        d = _require_even_homogeneous(F, G)
        sigma = sum_of_squares_poly(nv)
        if kind == "marshall":
            if eps is None:
                raise ValueError("marshall needs eps > 0")
            eps = _rational(eps, "eps")
            lam = _rational(1 if lam is None else lam, "lambda")
            if N < d // 2:
                raise ValueError(f"marshall needs N >= d/2 = {d // 2}")
            shifted = F + I * (sigma ** (d // 2) * (eps / lam ** d))
            denom = sigma ** (N - d // 2)
            lhs = shifted * denom
        else:
            denom = sigma ** N
            lhs = F * denom
        cone = build_cone("putinar", G, D, N, int(lhs.degree), denom="sum_sq")
        return Target(kind, N, lhs, cone, denom, True)
    if kind in ("polya_pv", "polya"):
        if kind == "polya" and not G.is_empty():
            raise ValueError("polya takes no generators")
        _require_even_homogeneous(F, G, allow_zero=True)
        denom = sum_of_vars_poly(nv) ** N
        lhs = F * denom
        cone = build_cone("polya_pv", G, D, N, int(lhs.degree), denom="sum_lin")
        return Target(kind, N, lhs, cone, denom, True)
    raise ValueError(f"unknown kind {kind!r}")


def _nonhomog_denom(denom):
    return {"sum_sq": "one_plus_sum_sq", "sum_lin": "one_plus_sum_lin"}.get(denom, denom)


def _homogenize_problem(F: PolyMatrix, G: GeneratorSet):
    d = F.degree
    if d == float("-inf") or int(d) % 2:
        raise ValueError(f"F must have even degree, got {d}")
    for g in G.scalar_gens:
        if int(g.degree) % 2:
            raise ValueError(f"generator {g} must have even degree")
    Fh = F.homogenize()
    return Fh, GeneratorSet(F.nvars + 1, [g.homogenize() for g in G.scalar_gens], ())


def _default_range(kind, F: PolyMatrix, D):
    if kind in ("scherer_hol", "eps_shift", "handelman"):
        return (0, 0)
    d = int(F.degree) if not F.is_zero() else 0
    lo = d // 2 if kind in ("marshall", "marshall_nonhomog") else 0
    return (lo, d // 2 + D)


def _plausibility(kind, F: PolyMatrix, gens: GeneratorSet, seed, count=200):
    """Sampled minimum of eigmin(F) on K; a hint about the positivity hypothesis only."""
    orthant = kind in ("polya_pv", "polya", "ppv_nonhomog")
    box = (0.0, 1.0) if orthant else (-1.0, 1.0)
    res = sample_K(gens, count, box, seed=seed)
    if res.status != "ok":
        return "possibly empty K in box"
    vals = F.to_float().evaluate_many(res.points)
    m = float(np.min(np.linalg.eigvalsh(vals)[:, 0]))
    return f"min eigmin(F) over {len(res)} samples in {list(box)}^n = {m:.6g}"


def _float_blocks(problem: SdpProblem, Qs):
    return [GramBlock(spec.weight, spec.basis, spec.t, np.asarray(Q, dtype=float))
            for spec, Q in zip(problem.blocks, Qs)]


def _dehomogenize_cert(cert: Certificate, kind: str) -> Certificate:
    blocks = [GramBlock(b.weight.dehomogenize(), [m[1:] for m in b.basis], b.t, b.Q) for b in cert.blocks]
    weights = []
    for w in cert.cone_weights:
        dw = w.dehomogenize()
        if dw not in weights:
            weights.append(dw)
    out = Certificate(kind, cert.N, cert.lhs.dehomogenize(), blocks, cert.status, cert.residual,
                      cert.denom.dehomogenize(), tuple(weights), dict(cert.provenance))
    if cert.status == "exact":
        rep = verify_certificate(out.lhs, out)
        if not rep.exact:
            raise AssertionError("dehomogenized certificate failed exact verification")
    return out


def _solve_target(target: Target, tol: Tolerances, seed: int):
    """(problem, solution) or (None, Attempt) when the degree count already rules it out."""
    try:
        problem = assemble(target.lhs, target.cone, homogeneous=target.homogeneous or None)
    except InfeasibleByDegree as exc:
        return None, exc
    return problem, sdp_mod.solve(problem, tol.tol_r, tol.tol_e, tol.max_iter, seed)


def _degree_evidence(exc: InfeasibleByDegree):
    return exc.label, (1 if exc.value > 0 else -1)


def run(kind: str, F, gens=None, D: int = 2, N_range=None, eps=None, lam=None,
        tol: Tolerances | None = None, seed: int = DEFAULT_SEED, on_attempt=None) -> Certificate:
    """Generic linear scan over N for any kind in ``KINDS``."""
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    if D < 0 or D % 2:
        raise ValueError("D must be a nonnegative even integer")
    tol = tol or Tolerances()
    F = _exact_matrix(F)
    G = _gens(gens, F.nvars)
    if kind in ("marshall", "marshall_nonhomog") and lam is None:
        warnings.warn("lambda not given; using lambda = 1", stacklevel=2)
        lam = 1
    if kind in _HOMOG_BASE:
        Fh, Gh = _homogenize_problem(F, G)
        base = _HOMOG_BASE[kind]
        lo_hi = N_range or _default_range(base, Fh, D)
        cert = run(base, Fh, Gh, D, lo_hi, eps, lam, tol, seed, on_attempt)
        out = _dehomogenize_cert(cert, kind)
        out.provenance["plausibility"] = _plausibility(kind, F, G, seed)
        return out
    lo, hi = N_range or _default_range(kind, F, D)
    if kind in ("scherer_hol", "eps_shift", "handelman") and (lo, hi) != (0, 0):
        lo, hi = 0, 0
    attempts = []
    for N in range(lo, hi + 1):
        t0 = time.perf_counter()
        target = build_target(kind, F, G, N, D, eps, lam)
        problem, sol = _solve_target(target, tol, seed)
        if problem is None:
            a = Attempt(N, sdp_mod.INFEASIBLE, f"degree: {sol}", None, True, time.perf_counter() - t0)
            attempts.append(a)
            if on_attempt:
                on_attempt(a)
            continue
        if sol.status != sdp_mod.FEASIBLE:
            valid = check_dual_evidence(problem, sol.y).valid if sol.y is not None else None
            a = Attempt(N, sol.status, sol.summary(), sol.y, valid, time.perf_counter() - t0)
            attempts.append(a)
            if on_attempt:
                on_attempt(a)
            continue
        cert = _certificate_from(target, problem, sol, tol, seed, D, eps, lam)
        a = Attempt(N, "exact" if cert.status == "exact" else "numeric_only", sol.summary(),
                    seconds=time.perf_counter() - t0)
        attempts.append(a)
        if on_attempt:
            on_attempt(a)
        cert.provenance["plausibility"] = _plausibility(kind, F, G, seed)
        return cert
    raise CertificationFailed(kind, attempts)


def _certificate_from(target: Target, problem, sol, tol: Tolerances, seed, D, eps, lam) -> Certificate:
    prov = {"seed": seed, "D": D, "solver": sol.solver, "iterations": sol.iterations,
            "max_residual": f"{sol.max_residual:.3e}", "min_eig": f"{sol.min_eig:.3e}",
            "margin": f"{sol.margin:.3e}",
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S")}
    if eps is not None:
        prov["eps"] = str(_rational(eps, "eps"))
    if lam is not None and target.kind in ("marshall",):
        prov["lambda"] = str(_rational(lam, "lambda"))
    weights = tuple(target.cone.weights)
    rr = round_project(sol, problem, tol.schedule)
    if rr.status == "exact":
        cert = Certificate(target.kind, target.N, target.lhs, rr.blocks, "exact", Fraction(0),
                           target.denom, weights, prov)
        prov["denom_used"] = rr.denom
        prov["kernel_dims"] = ",".join(map(str, rr.kernel_dims))
        prov["projection_distance"] = f"{rr.projection_distance:.3e}"
        rep = verify_certificate(target.lhs, cert)
        if rep.exact:
            return cert
    blocks = _float_blocks(problem, sol.Q)
    cert = Certificate(target.kind, target.N, target.lhs, blocks, "numeric", 0.0, target.denom, weights, prov)
    diff = target.lhs.to_float() - cert.expansion()
    cert.residual = float(diff.norm_inf()) if not diff.is_zero() else 0.0
    return cert


# -- named drivers -------------------------------------------------------

def scherer_hol(F, gens=None, D: int = 2, **kw) -> Certificate:
    """F in the quadratic module generated by ``{1} + gens`` (N = 0)."""
    return run("scherer_hol", F, gens, D, **kw)


def eps_shift(F, gens=None, eps=None, D: int = 2, **kw) -> Certificate:
    """``F + eps*I`` in the quadratic module; eps must be positive."""
    if eps is None or Fraction(str(eps) if isinstance(eps, float) else eps) <= 0:
        raise ValueError("eps must be positive")
    return run("eps_shift", F, gens, D, eps=eps, **kw)


def handelman(F, gens, D: int = 2, **kw) -> Certificate:
    """F in the semiring cone: weights are products of generators."""
    return run("handelman", F, gens, D, **kw)


def putinar_vasilescu(F, gens=None, D: int = 2, N_range=None, **kw) -> Certificate:
    """``sigma^N F`` in the quadratic module, ``sigma = sum x_i^2``; homogeneous data."""
    return run("putinar_vasilescu", F, gens, D, N_range, **kw)


def reznick(F, D: int = 2, N_range=None, **kw) -> Certificate:
    """``sigma^N F`` is an SOS matrix."""
    return run("reznick", F, None, D, N_range, **kw)


def pv_nonhomog(F, gens=None, D: int = 2, N_range=None, **kw) -> Certificate:
    """``(1 + sigma)^N F`` in the quadratic module, via homogenization."""
    return run("pv_nonhomog", F, gens, D, N_range, **kw)


def polya_pv(F, gens=None, D: int = 2, N_range=None, **kw) -> Certificate:
    """``(sum x_i)^N F`` with weights ``x^beta * g^alpha``."""
    return run("polya_pv", F, gens, D, N_range, **kw)


def polya(F, D: int = 2, N_range=None, **kw) -> Certificate:
    """``(sum x_i)^N F`` with monomial weights."""
    return run("polya", F, None, D, N_range, **kw)


def ppv_nonhomog(F, gens=None, D: int = 2, N_range=None, **kw) -> Certificate:
    """``(1 + sum x_i)^N F`` via homogenization."""
    return run("ppv_nonhomog", F, gens, D, N_range, **kw)


def marshall(F, gens=None, eps=None, lam=None, D: int = 2, N_range=None, **kw) -> Certificate:
    """``sigma^(N-d/2) (F + eps/lam^d sigma^(d/2) I)`` in the quadratic module, N >= d/2."""
    if eps is None:
        raise ValueError("eps must be positive")
    _rational(eps, "eps")
    return run("marshall", F, gens, D, N_range, eps=eps, lam=lam, **kw)


def marshall_nonhomog(F, gens=None, eps=None, lam=None, D: int = 2, N_range=None, **kw) -> Certificate:
    """The ``(1 + sigma)`` analogue of :func:`marshall`."""
    if eps is None:
        raise ValueError("eps must be positive")
    _rational(eps, "eps")
    return run("marshall_nonhomog", F, gens, D, N_range, eps=eps, lam=lam, **kw)
