"""Block-PSD feasibility with affine equalities, solved with cvxopt.

Phase 1 maximizes the margin ``lam`` with ``Q_k - lam*I >= 0``. It is posed
to cvxopt in the y-space form

    min  b'y + cap*mu   s.t.  S_k(y) = sum_j y_j C_kj >= 0,  mu >= 0,
                              sum_j y_j tr(C_j) + mu = 1,  A_free' y = 0,

whose cvxopt dual variables are ``Z_k = Q_k - lam*I`` with ``lam`` the
negated multiplier of the normalization row. When the margin is negative a
second solve looks for a strictly separating ``y`` (a Farkas vector):

    max delta  s.t.  S_k(y) <= -delta*I,  b'y = 1,  A_free' y = 0,  delta <= cap.
"""
from __future__ import annotations

import contextlib
import io
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg

from .gram import SdpProblem
from .linalg import min_norm_correction, psd_rational

FEASIBLE = "feasible"
INFEASIBLE = "infeasible_evidence"
INCONCLUSIVE = "inconclusive"


@dataclass
class SdpSolution:
    status: str
    Q: list
    free: np.ndarray
    max_residual: float
    min_eig: float
    margin: float
    iterations: int
    scale: float
    y: list | None = None           # exact Farkas vector when status is infeasible_evidence
    evidence_margin: float | None = None
    pruned: list = field(default_factory=list)
    solver: str = "cvxopt"
    log: list = field(default_factory=list)
    seed: int = 0

    def summary(self) -> str:
        return (f"{self.status}: residual={self.max_residual:.3e} min_eig={self.min_eig:.3e} "
                f"margin={self.margin:.3e} iters={self.iterations}")


@dataclass(frozen=True)
class DualCheck:
    valid: bool
    margin: float     # min over blocks of eigmin(-S_k(y)), as a float
    ytb: Fraction
    reason: str = ""

    def __bool__(self):
        return self.valid


def _cvx():
    from cvxopt import matrix, solvers
    return matrix, solvers


def _dense_rows(p: SdpProblem, keep=None):
    """Row matrix over the coordinates ``(k, i, l)`` (plus free variables)."""
    coords, pos = [], {}
    for k, size in enumerate(p.block_sizes):
        idx = range(size) if keep is None else keep[k]
        idx = list(idx)
        for a, i in enumerate(idx):
            for l in idx[a:]:
                pos[(k, i, l)] = len(coords)
                coords.append((k, i, l))
    M = np.zeros((p.nrows, len(coords) + p.nfree))
    for j, row in enumerate(p.rows):
        for key, c in row.items():
            col = pos.get(key)
            if col is not None:
                M[j, col] = float(c)
        for i, c in p.free_rows[j].items():
            M[j, len(coords) + i] = float(c)
    return M, coords


def _independent_rows(M, tol=1e-10):
    if M.shape[0] == 0:
        return []
    _, R, perm = scipy.linalg.qr(M.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0:
        return []
    r = int(np.sum(d > tol * d[0]))
    return sorted(perm[:r].tolist())


def _diagonal_presolve(p: SdpProblem):
    """Drop Gram indices whose diagonal entry is forced to zero.

    A row with ``b_j = 0`` that touches only diagonal entries, all with the
    same sign, forces those entries (hence whole rows/columns) to vanish.
    """
    alive = [set(range(s)) for s in p.block_sizes]
    changed = True
    while changed:
        changed = False
        for j, row in enumerate(p.rows):
            if p.b[j] != 0 or p.free_rows[j]:
                continue
            live = [(key, c) for key, c in row.items() if key[1] in alive[key[0]] and key[2] in alive[key[0]]]
            if not live or any(i != l for (k, i, l), _ in live):
                continue
            signs = {c > 0 for _, c in live}
            if len(signs) == 1:
                for (k, i, _), _c in live:
                    alive[k].discard(i)
                changed = True
    return [sorted(a) for a in alive]


def _run_cvxopt(c, Gl, hl, Gs, hs, A, b, max_iter, log, tol=1e-10):
    matrix, solvers = _cvx()
    opts = {"show_progress": True, "maxiters": int(max_iter), "abstol": tol,
            "reltol": tol, "feastol": tol}
    buf = io.StringIO()
    try:
        with contextlib.redirect_stdout(buf):
            res = solvers.sdp(matrix(c), Gl=matrix(Gl), hl=matrix(hl),
                              Gs=[matrix(G) for G in Gs], hs=[matrix(h) for h in hs],
                              A=matrix(A), b=matrix(b), options=opts)
    finally:
        log.extend(line for line in buf.getvalue().splitlines() if line.strip())
    return res


# Tighter than 1e-10 stalls on problems whose optimal face is not strictly
# complementary (every singular certificate); looser is the retry.
SOLVER_TOLS = (1e-10, 1e-8)


def _evaluate(p: SdpProblem, Qs, f):
    res = p.residual([np.asarray(Q, dtype=float) for Q in Qs], f)
    max_res = max((abs(float(r)) for r in res), default=0.0)
    eigs = [np.linalg.eigvalsh(Q)[0] for Q in Qs if Q.size]
    return max_res, (min(eigs) if eigs else 0.0)


def _phase1(p, keep, rows_idx, max_iter, log):
    M, coords = _dense_rows(p, keep)
    nq = len(coords)
    Mk = M[rows_idx]
    norms = np.linalg.norm(Mk, axis=1)
    norms[norms == 0] = 1.0
    Mk = Mk / norms[:, None]
    bk = np.array([float(p.b[j]) for j in rows_idx]) / norms
    m = len(rows_idx)
    sizes = [len(kp) for kp in keep]
    local = [{i: a for a, i in enumerate(kp)} for kp in keep]
    Gs = [np.zeros((s * s, m + 1)) for s in sizes]
    trace = np.zeros(m)
    for col, (k, i, l) in enumerate(coords):
        s = sizes[k]
        a, bb = local[k][i], local[k][l]
        coef = Mk[:, col]
        if a == bb:
            Gs[k][a * s + a, :m] -= coef
            trace += coef
        else:
            Gs[k][a * s + bb, :m] -= coef / 2
            Gs[k][bb * s + a, :m] -= coef / 2
    live = [k for k, s in enumerate(sizes) if s]
    Gs_live = [Gs[k] for k in live]
    hs = [np.zeros((sizes[k], sizes[k])) for k in live]
    cap = 1.0
    c = np.concatenate([bk, [cap]])
    Gl = np.zeros((1, m + 1)); Gl[0, m] = -1.0
    hl = np.zeros(1)
    free_cols = Mk[:, nq:]
    if free_cols.shape[1]:
        _, R, perm = scipy.linalg.qr(free_cols, mode="economic", pivoting=True)
        d = np.abs(np.diag(R))
        fr = sorted(perm[: int(np.sum(d > 1e-10 * d[0]))].tolist()) if d.size and d[0] > 0 else []
    else:
        fr = []
    A = np.zeros((1 + len(fr), m + 1))
    A[0, :m] = trace; A[0, m] = 1.0
    for r, i in enumerate(fr):
        A[1 + r, :m] = free_cols[:, i]
    beq = np.zeros(1 + len(fr)); beq[0] = 1.0
    def recover(res):
        yeq = np.array(res["y"]).ravel()
        lam = -yeq[0]
        Qs = [np.zeros((s, s)) for s in p.block_sizes]
        for pos_, k in enumerate(live):
            Z = np.array(res["zs"][pos_])
            Z = (Z + Z.T) / 2
            kp = keep[k]
            Qs[k][np.ix_(kp, kp)] = Z + max(lam, 0.0) * np.eye(sizes[k])
        f = np.zeros(p.nfree)
        for r, i in enumerate(fr):
            f[i] = -yeq[1 + r]
        return Qs, f, lam

    # a run stopped by the iteration limit can still hold a usable point, and
    # a looser retry can do worse, so keep the best candidate seen
    best, best_key, err, iters, status = None, None, None, 0, "unknown"
    for tol in SOLVER_TOLS:
        try:
            res = _run_cvxopt(c, Gl, hl, Gs_live, hs, A, beq, max_iter, log, tol)
        except (ArithmeticError, ValueError) as exc:
            err = exc
            log.append(f"cvxopt (tol {tol:g}) failed: {exc}")
            continue
        iters += int(res.get("iterations", 0) or 0)
        if res["y"] is None or res["zs"] is None:
            continue
        cand = recover(res)
        max_res, min_eig = _evaluate(p, cand[0], cand[1])
        key = max_res / p.scale() + max(-min_eig, 0.0)
        if np.isfinite(key) and (best_key is None or key < best_key):
            best, best_key, status = cand, key, res["status"]
        if res["status"] == "optimal":
            break
    if best is None and err is not None:
        raise err
    return best, iters, status


def _phase1_primal(p, keep, rows_idx, max_iter, log):
    """Same problem in Gram coordinates: max lam - eta*tr(Q) s.t. A(Q) = b, Q - lam*I >= 0, lam <= 1.

    Used when the y-space form stalls, typically because the supremum of lam
    is not attained and the solver's dual drifts off.
    """
    M, coords = _dense_rows(p, keep)
    nq = len(coords)
    Mk = M[rows_idx]
    norms = np.linalg.norm(Mk, axis=1)
    norms[norms == 0] = 1.0
    Mk = Mk / norms[:, None]
    bk = np.array([float(p.b[j]) for j in rows_idx]) / norms
    nx = nq + p.nfree + 1
    sizes = [len(kp) for kp in keep]
    local = [{i: a for a, i in enumerate(kp)} for kp in keep]
    live = [k for k, s in enumerate(sizes) if s]
    Gs = {k: np.zeros((sizes[k] ** 2, nx)) for k in live}
    for col, (k, i, l) in enumerate(coords):
        s, a, bb = sizes[k], local[k][i], local[k][l]
        Gs[k][a * s + bb, col] = -1.0
        Gs[k][bb * s + a, col] = -1.0
    for k in live:
        for a in range(sizes[k]):
            Gs[k][a * sizes[k] + a, nx - 1] = 1.0
    # a small trace penalty keeps the optimal set bounded when sup lam is
    # only approached as Q grows without bound
    c = np.zeros(nx); c[-1] = -1.0
    eta = 1e-4 / max(1, sum(sizes))
    for col, (k, i, l) in enumerate(coords):
        if i == l:
            c[col] = eta
    Gl = np.zeros((1, nx)); Gl[0, -1] = 1.0
    hl = np.ones(1)
    A = np.hstack([Mk, np.zeros((len(rows_idx), 1))])
    hs = [np.zeros((sizes[k], sizes[k])) for k in live]
    best, best_key, err, iters, status = None, None, None, 0, "unknown"
    for tol in SOLVER_TOLS:
        try:
            res = _run_cvxopt(c, Gl, hl, [Gs[k] for k in live], hs, A, bk, max_iter, log, tol)
        except (ArithmeticError, ValueError) as exc:
            err = exc
            log.append(f"cvxopt (tol {tol:g}) failed: {exc}")
            continue
        iters += int(res.get("iterations", 0) or 0)
        if res["x"] is None:
            continue
        x = np.array(res["x"]).ravel()
        Qs = [np.zeros((s, s)) for s in p.block_sizes]
        for col, (k, i, l) in enumerate(coords):
            Qs[k][i, l] = Qs[k][l, i] = x[col]
        cand = (Qs, x[nq:nq + p.nfree].copy(), x[-1])
        max_res, min_eig = _evaluate(p, Qs, cand[1])
        key = max_res / p.scale() + max(-min_eig, 0.0)
        if np.isfinite(key) and (best_key is None or key < best_key):
            best, best_key, status = cand, key, res["status"]
        if res["status"] == "optimal":
            break
    if best is None and err is not None:
        raise err
    return best, iters, status


def _phase2(p, max_iter, log):
    """Strictly separating Farkas vector on the full problem, or None."""
    M, coords = _dense_rows(p)
    nq = len(coords)
    rows_idx = _independent_rows(M)
    if not rows_idx:
        return None
    Mk = M[rows_idx]
    norms = np.linalg.norm(Mk, axis=1)
    norms[norms == 0] = 1.0
    Mk = Mk / norms[:, None]
    bk = np.array([float(p.b[j]) for j in rows_idx]) / norms
    if not np.any(bk):
        return None
    m = len(rows_idx)
    sizes = p.block_sizes
    Gs = [np.zeros((s * s, m + 1)) for s in sizes]
    for col, (k, i, l) in enumerate(coords):
        s = sizes[k]
        coef = Mk[:, col]
        if i == l:
            Gs[k][i * s + i, :m] += coef
        else:
            Gs[k][i * s + l, :m] += coef / 2
            Gs[k][l * s + i, :m] += coef / 2
    for k, s in enumerate(sizes):
        Gs[k][np.arange(s) * (s + 1), m] = 1.0
    hs = [np.zeros((s, s)) for s in sizes]
    cap = 1.0
    c = np.zeros(m + 1); c[m] = -1.0
    Gl = np.zeros((1, m + 1)); Gl[0, m] = 1.0
    hl = np.array([cap])
    free_cols = Mk[:, nq:]
    A = np.zeros((1 + free_cols.shape[1], m + 1))
    A[0, :m] = bk
    beq = np.zeros(A.shape[0]); beq[0] = 1.0
    if free_cols.shape[1]:
        A[1:, :m] = free_cols.T
        keep_eq = _independent_rows(A)
        if 0 not in keep_eq:
            return None
        A, beq = A[keep_eq], beq[keep_eq]
    res = None
    for tol in SOLVER_TOLS:
        try:
            res = _run_cvxopt(c, Gl, hl, Gs, hs, A, beq, max_iter, log, tol)
        except (ArithmeticError, ValueError) as exc:
            log.append(f"cvxopt (tol {tol:g}) failed: {exc}")
            continue
        if res["status"] == "optimal":
            break
    if res is None or res["x"] is None:
        return None
    x = np.array(res["x"]).ravel()
    delta = x[m]
    if not delta > 0:
        return None
    y = np.zeros(p.nrows)
    y[rows_idx] = x[:m] / norms
    return y


def _linear_evidence(p: SdpProblem):
    """``y`` with ``A' y = 0`` and ``b'y > 0`` when the equalities alone are inconsistent."""
    M, _ = _dense_rows(p)
    b = np.array([float(v) for v in p.b])
    if M.shape[1] == 0:
        return b
    proj = M @ np.linalg.lstsq(M, b, rcond=None)[0]
    y = b - proj
    if np.linalg.norm(y) <= 1e-9 * max(1.0, np.linalg.norm(b)):
        return None
    return y


def _projection_fallback(p: SdpProblem, max_iter, seed, log):
    """Alternating projections between the affine set and the PSD cone."""
    M, coords = _dense_rows(p)
    nq = len(coords)
    b = np.array([float(v) for v in p.b])
    Mp = np.linalg.pinv(M)
    rng = np.random.default_rng(seed)
    x = Mp @ b + 1e-6 * rng.standard_normal(M.shape[1])
    sizes = p.block_sizes
    for it in range(max_iter):
        x = x - Mp @ (M @ x - b)
        Qs = [np.zeros((s, s)) for s in sizes]
        for col, (k, i, l) in enumerate(coords):
            Qs[k][i, l] = Qs[k][l, i] = x[col]
        for k, Q in enumerate(Qs):
            w, V = np.linalg.eigh(Q)
            Qs[k] = (V * np.maximum(w, 0)) @ V.T
        for col, (k, i, l) in enumerate(coords):
            x[col] = Qs[k][i, l]
        log.append(f"proj {it}: residual {np.max(np.abs(M @ x - b)) if len(b) else 0:.3e}")
        if len(b) == 0 or np.max(np.abs(M @ x - b)) < 1e-12:
            break
    return Qs, x[nq:], it + 1


def solve(p: SdpProblem, tol_r: float = 1e-8, tol_e: float = 1e-9, max_iter: int = 200,
          seed: int = 0) -> SdpSolution:
    if tol_r <= 0 or tol_e <= 0:
        raise ValueError("tolerances must be positive")
    if not p.blocks or p.nrows == 0:
        raise ValueError("structurally empty problem")
    scale = p.scale()
    log: list = []
    keep = _diagonal_presolve(p)
    pruned = [sorted(set(range(s)) - set(kp)) for s, kp in zip(p.block_sizes, keep)]

    def kept_row(j):
        k_live = any(key[1] in keep_sets[key[0]] and key[2] in keep_sets[key[0]] for key in p.rows[j])
        return k_live or bool(p.free_rows[j])

    keep_sets = [set(kp) for kp in keep]
    live_rows = [j for j in range(p.nrows) if kept_row(j)]
    dead_nonzero = [j for j in range(p.nrows) if j not in set(live_rows) and p.b[j] != 0]

    result, iters, solver = None, 0, "cvxopt"
    if not dead_nonzero and live_rows:
        M, _ = _dense_rows(p, keep)
        sub = M[live_rows]
        ind = [live_rows[i] for i in _independent_rows(sub)]
        b_live = np.array([float(p.b[j]) for j in live_rows])
        consistent = True
        if ind:
            Mi = M[ind]
            coef = np.linalg.lstsq(Mi.T, sub.T, rcond=None)[0]
            pred = coef.T @ np.array([float(p.b[j]) for j in ind])
            consistent = np.max(np.abs(pred - b_live)) <= 1e-9 * max(1.0, np.max(np.abs(b_live)))
        if ind and consistent:
            failures = 0
            for form in (_phase1, _phase1_primal):
                try:
                    cand, it, _st = form(p, keep, ind, max_iter, log)
                except (ArithmeticError, ValueError) as exc:
                    log.append(f"cvxopt failed: {exc}")
                    failures += 1
                    continue
                iters += it
                if cand is None:
                    continue
                result = cand
                max_res, min_eig = _evaluate(p, cand[0], cand[1])
                if max_res <= tol_r * scale and min_eig >= -tol_e:
                    break
            if failures == 2:
                log.append("falling back to projections")
                Qs, f, iters = _projection_fallback(p, max_iter, seed, log)
                result, solver = (Qs, f, float("nan")), "projection"

    if result is not None:
        Qs, f, lam = result
        max_res, min_eig = _evaluate(p, Qs, f)
        if max_res <= tol_r * scale and min_eig >= -tol_e:
            return SdpSolution(FEASIBLE, Qs, f, max_res, min_eig, float(lam), iters, scale,
                               pruned=pruned, solver=solver, log=log, seed=seed)
    else:
        Qs = [np.zeros((s, s)) for s in p.block_sizes]
        f = np.zeros(p.nfree)
        max_res, min_eig, lam = float("inf"), 0.0, float("nan")

    y_exact = None
    y = _linear_evidence(p)
    if y is not None:
        y_exact = rationalize_evidence(p, y, annihilate_all=True)
    if y_exact is None:
        try:
            y = _phase2(p, max_iter, log)
        except (ArithmeticError, ValueError) as exc:
            log.append(f"farkas solve failed: {exc}")
            y = None
        if y is not None:
            y_exact = rationalize_evidence(p, y)
    if y_exact is not None:
        chk = check_dual_evidence(p, y_exact)
        return SdpSolution(INFEASIBLE, Qs, f, max_res, min_eig, float(lam), iters, scale,
                           y=y_exact, evidence_margin=chk.margin, pruned=pruned,
                           solver=solver, log=log, seed=seed)
    return SdpSolution(INCONCLUSIVE, Qs, f, max_res, min_eig, float(lam), iters, scale,
                       pruned=pruned, solver=solver, log=log, seed=seed)


def _dual_matrices(p: SdpProblem, y):
    mats = [[[Fraction(0)] * s for _ in range(s)] for s in p.block_sizes]
    for j, row in enumerate(p.rows):
        yj = y[j]
        if yj == 0:
            continue
        for (k, i, l), c in row.items():
            v = Fraction(c) * yj
            if i == l:
                mats[k][i][i] += v
            else:
                mats[k][i][l] += v / 2
                mats[k][l][i] += v / 2
    return mats


def check_dual_evidence(p: SdpProblem, y) -> DualCheck:
    """Exact audit of a Farkas vector: ``-S_k(y) >= 0`` for all k, ``A_free' y = 0``, ``b'y > 0``."""
    if len(y) != p.nrows:
        raise ValueError(f"y has length {len(y)}, problem has {p.nrows} constraints")
    y = [Fraction(v) for v in y]
    ytb = sum((yj * Fraction(bj) for yj, bj in zip(y, p.b)), Fraction(0))
    mats = _dual_matrices(p, y)
    fl = [np.array([[float(v) for v in r] for r in S]) for S in mats]
    margin = min((float(np.linalg.eigvalsh(-S)[0]) for S in fl if S.size), default=0.0) + 0.0
    if ytb <= 0:
        return DualCheck(False, margin, ytb, "b'y is not positive")
    for i in range(p.nfree):
        s = sum((Fraction(fr[i]) * y[j] for j, fr in enumerate(p.free_rows) if i in fr), Fraction(0))
        if s != 0:
            return DualCheck(False, margin, ytb, "free-variable columns not annihilated")
    for k, S in enumerate(mats):
        if not psd_rational([[-v for v in r] for r in S]).psd:
            return DualCheck(False, margin, ytb, f"block {k}: -S(y) is not PSD")
    return DualCheck(True, margin, ytb, "")


def rationalize_evidence(p: SdpProblem, y, denoms=(10**6, 10**9, 10**12), annihilate_all=False):
    """Round a float Farkas vector to rationals that pass ``check_dual_evidence``.

    Free-variable columns are annihilated exactly by a minimum-norm
    correction; with ``annihilate_all`` every Gram column is too (purely
    linear inconsistency, ``S(y) = 0``).
    """
    y = np.asarray(y, dtype=float)
    ymax = np.max(np.abs(y)) if y.size else 0.0
    if not ymax > 0:
        return None
    y = y / ymax
    free_cols = [{j: fr[i] for j, fr in enumerate(p.free_rows) if i in fr} for i in range(p.nfree)]
    if annihilate_all:
        cols: dict = {}
        for j, row in enumerate(p.rows):
            for key, c in row.items():
                cols.setdefault(key, {})[j] = c
        free_cols = list(cols.values()) + free_cols
    for D in denoms:
        yr = [Fraction(round(v * D), D) for v in y]
        if free_cols:
            resid = [-sum((Fraction(c) * yr[j] for j, c in col.items()), Fraction(0)) for col in free_cols]
            d = min_norm_correction(free_cols, resid)
            if d is None:
                continue
            yr = [v + d.get(j, 0) for j, v in enumerate(yr)]
        if check_dual_evidence(p, yr).valid:
            return yr
    return None
