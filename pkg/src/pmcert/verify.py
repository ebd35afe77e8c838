"""Turn floating-point Gram matrices into exact rational certificates and audit them.

Rounding alone rarely lands exactly on the coefficient-matching subspace,
so every rounded point is corrected by the exact minimum-norm update
``d = A^T (A A^T)^+ r``. When the float solution is singular (the target
polynomial has real zeros, so every certificate is singular) the numerical
kernel is rationalized and ``Q v = 0`` is imposed as extra exact equations
before projecting; otherwise the projection would leak tiny negative
eigenvalues into the kernel.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .gram import GramBlock, SdpProblem, expand_block
from .linalg import PsdResult, min_norm_correction, psd_rational
from .polycore import PolyMatrix

__all__ = ["ExactReport", "RoundResult", "MalformedCertificate", "round_project",
           "psd_rational", "verify_certificate", "numerical_kernel"]

DEFAULT_SCHEDULE = (10**3, 10**6, 10**9, 10**12)


class MalformedCertificate(ValueError):
    pass


@dataclass
class ExactReport:
    status: str                       # "exact" | "numeric_only"
    pivots: list
    residual_poly_norm: Fraction
    denom: int | None = None
    projection_distance: float | None = None
    psd_ok: list = field(default_factory=list)

    @property
    def exact(self) -> bool:
        return self.status == "exact"

    def summary(self) -> str:
        bad = [k for k, ok in enumerate(self.psd_ok) if not ok]
        psd = "all blocks PSD" if not bad else f"blocks not PSD: {bad}"
        return f"{self.status}: residual_poly_norm={self.residual_poly_norm}  {psd}"


@dataclass
class RoundResult:
    status: str                       # "exact" | "numeric_only"
    blocks: list | None
    free: list | None
    denom: int | None
    projection_distance: float | None
    best_residual: float
    kernel_dims: list


def numerical_kernel(Q: np.ndarray, global_scale: float, rel: float = 1e-6, gap: float = 1e3):
    """Eigenvectors below a clear spectral gap, or an empty ``(n, 0)`` array."""
    n = Q.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    w, V = np.linalg.eigh((Q + Q.T) / 2)
    top = max(global_scale, 1e-300)
    if w[-1] < rel * top:
        return V
    best = 0
    for r in range(1, n):
        small, nxt = abs(w[r - 1]), w[r]
        if small < rel * top and nxt > gap * max(small, 1e-15 * top):
            best = r
    return V[:, :best]


def _rationalize_kernel(V: np.ndarray, Q: np.ndarray, tol: float):
    """Rational basis of ``span(V)`` in reduced echelon form, validated against ``Q``."""
    n, r = V.shape
    if r == 0:
        return []
    if r == n:
        return [[Fraction(int(i == j)) for i in range(n)] for j in range(n)]
    Vt = V.T.copy()
    piv = []
    for i in range(r):
        rest = [c for c in range(n) if c not in piv]
        c = max(rest, key=lambda c: abs(Vt[i, c]))
        piv.append(c)
        Vt[i] /= Vt[i, c]
        for i2 in range(r):
            if i2 != i:
                Vt[i2] -= Vt[i2, c] * Vt[i]
    qn = max(np.linalg.norm(Q), 1.0)
    for lim in (10, 100, 1000, 10**4, 10**6):
        W = [[Fraction(v).limit_denominator(lim) for v in row] for row in Vt]
        for i, c in enumerate(piv):
            for i2 in range(r):
                W[i2][c] = Fraction(int(i == i2))
        Wf = np.array([[float(v) for v in row] for row in W])
        if np.linalg.norm(Q @ Wf.T) <= tol * qn * max(1.0, np.linalg.norm(Wf)):
            return W
    return None


def _var_layout(p: SdpProblem, pruned):
    dead = [set(pr) for pr in pruned] if pruned else [set() for _ in p.blocks]
    alive_vars = set()
    for k, size in enumerate(p.block_sizes):
        for i in range(size):
            if i in dead[k]:
                continue
            for l in range(i, size):
                if l not in dead[k]:
                    alive_vars.add((k, i, l))
    return dead, alive_vars


def _to_frac(x, D):
    return Fraction(round(float(x) * D), D)


def _attempt(p, sol_Q, sol_f, D, dead, alive_vars, kernels):
    # rows restricted to live Gram variables, free variables keyed ("f", i)
    rows = []
    for j, row in enumerate(p.rows):
        r = {key: Fraction(c) for key, c in row.items() if key in alive_vars}
        for i, c in p.free_rows[j].items():
            r[("f", i)] = Fraction(c)
        rows.append(r)
    rhs = [Fraction(b) for b in p.b]
    Qf = []
    for k, Q in enumerate(sol_Q):
        Q = np.array(Q, dtype=float)
        W = kernels[k]
        if W:
            Wf = np.array([[float(v) for v in row] for row in W])
            alive = [i for i in range(Q.shape[0]) if i not in dead[k]]
            P = np.eye(len(alive)) - Wf.T @ np.linalg.pinv(Wf.T)
            sub = Q[np.ix_(alive, alive)]
            Q = Q.copy()
            Q[np.ix_(alive, alive)] = P @ sub @ P
        Qf.append(Q)
    for k, W in enumerate(kernels):
        if not W:
            continue
        alive = [i for i in range(p.block_sizes[k]) if i not in dead[k]]
        for v in W:
            for a, r_ in enumerate(alive):
                eq = {}
                for c_, col in enumerate(alive):
                    if v[c_] == 0:
                        continue
                    key = (k, min(r_, col), max(r_, col))
                    eq[key] = eq.get(key, 0) + v[c_]
                eq = {kk: vv for kk, vv in eq.items() if vv != 0}
                if eq:
                    rows.append(eq)
                    rhs.append(Fraction(0))
    x = {}
    for (k, i, l) in alive_vars:
        x[(k, i, l)] = _to_frac(Qf[k][i, l], D)
    for i in range(p.nfree):
        x[("f", i)] = _to_frac(sol_f[i], D)
    resid = [b - sum((c * x[key] for key, c in row.items()), Fraction(0)) for row, b in zip(rows, rhs)]
    pre = max((abs(float(r)) for r in resid[: p.nrows]), default=0.0)
    d = min_norm_correction(rows, resid)
    if d is None:
        return None, pre, None
    for key, v in d.items():
        x[key] = x[key] + v
    dist = float(np.sqrt(sum(float(v) ** 2 for v in d.values())))
    Qs = []
    for k, size in enumerate(p.block_sizes):
        Q = [[Fraction(0)] * size for _ in range(size)]
        for i in range(size):
            for l in range(i, size):
                v = x.get((k, i, l))
                if v is not None:
                    Q[i][l] = Q[l][i] = v
        Qs.append(Q)
    f = [x[("f", i)] for i in range(p.nfree)]
    return (Qs, f), pre, dist


def round_project(sol, p: SdpProblem, denoms: Sequence[int] = DEFAULT_SCHEDULE) -> RoundResult:
    """First denominator in ``denoms`` whose rounded, projected Grams are exactly PSD."""
    Qs = [np.asarray(Q, dtype=float) for Q in sol.Q]
    f = np.asarray(sol.free, dtype=float) if sol.free is not None else np.zeros(p.nfree)
    dead, alive_vars = _var_layout(p, getattr(sol, "pruned", None))
    gscale = max((np.max(np.abs(Q)) for Q in Qs if Q.size), default=1.0)
    kernels, kdims = [], []
    for k, Q in enumerate(Qs):
        alive = [i for i in range(Q.shape[0]) if i not in dead[k]]
        sub = Q[np.ix_(alive, alive)]
        V = numerical_kernel(sub, gscale)
        W = _rationalize_kernel(V, sub, 1e-5) if V.shape[1] else []
        kernels.append(W or [])
        kdims.append(len(W) if W else 0)
    plain = [[] for _ in Qs]
    strategies = [kernels, plain] if any(kdims) else [plain]
    best = float("inf")
    for D in denoms:
        for ker in strategies:
            out, pre, dist = _attempt(p, Qs, f, D, dead, alive_vars, ker)
            best = min(best, pre)
            if out is None:
                continue
            Qe, fe = out
            if all(psd_rational(Q).psd for Q in Qe):
                blocks = [GramBlock(spec.weight, spec.basis, spec.t, _obj(Q)) for spec, Q in zip(p.blocks, Qe)]
                return RoundResult("exact", blocks, fe, D, dist, 0.0,
                                   [len(w) for w in ker])
    return RoundResult("numeric_only", None, None, None, None, best, kdims)


def _obj(Q):
    n = len(Q)
    arr = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            arr[i, j] = Fraction(Q[i][j])
    return arr


def _exact_block(blk: GramBlock) -> GramBlock:
    if blk.is_exact:
        return blk
    return GramBlock(blk.weight.to_exact(), blk.basis, blk.t, _obj(blk.Q.tolist()))


def verify_certificate(lhs: PolyMatrix, cert, cone_weights=None) -> ExactReport:
    """Recompute ``lhs - sum_k expand_block(B_k)`` in rationals and check every Gram.

    Uses only ``cert.blocks`` (and the declared cone weights); nothing from
    the solver is trusted.
    """
    blocks = list(cert.blocks)
    if cone_weights is None:
        cone_weights = getattr(cert, "cone_weights", None)
    lhs = lhs if lhs.exact else lhs.map(lambda p: p.to_exact())
    t, nv = lhs.size, lhs.nvars
    allowed = set(w.to_exact() for w in cone_weights) if cone_weights else None
    for k, blk in enumerate(blocks):
        if blk.t != t:
            raise MalformedCertificate(f"block {k}: t={blk.t} but lhs is {t}x{t}")
        if blk.weight.nvars != nv or any(len(m) != nv for m in blk.basis):
            raise MalformedCertificate(f"block {k}: variable count mismatch")
        if blk.Q.shape != (len(blk.basis) * t,) * 2:
            raise MalformedCertificate(f"block {k}: Q size does not match basis and t")
        if allowed is not None and blk.weight.to_exact() not in allowed:
            raise MalformedCertificate(f"block {k}: weight {blk.weight} is not in the cone")
        Qe = _exact_block(blk).Q
        if any(Qe[i, j] != Qe[j, i] for i in range(Qe.shape[0]) for j in range(i)):
            raise MalformedCertificate(f"block {k}: Q is not symmetric")
    total = PolyMatrix.zeros(t, nv, True)
    pivots, oks = [], []
    for blk in blocks:
        eb = _exact_block(blk)
        total = total + expand_block(eb)
        res: PsdResult = psd_rational(eb.Q.tolist())
        pivots.append(res.pivots)
        oks.append(res.psd)
    diff = lhs - total
    norm = Fraction(0)
    for u in range(t):
        for v in range(t):
            for c in diff[u, v].terms.values():
                norm = max(norm, abs(Fraction(c)))
    status = "exact" if norm == 0 and all(oks) else "numeric_only"
    prov = getattr(cert, "provenance", {}) or {}
    return ExactReport(status, pivots, norm, prov.get("denom_used"), prov.get("projection_distance"), oks)
