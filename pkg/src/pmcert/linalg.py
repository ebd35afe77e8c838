"""Exact rational linear algebra on Fractions.

Nothing here uses a tolerance: a pivot is zero or it is not.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence


@dataclass(frozen=True)
class PsdResult:
    psd: bool
    pivots: tuple
    rank: int

    def __bool__(self):
        return self.psd


def to_fractions(Q) -> list[list[Fraction]]:
    return [[Fraction(v) for v in row] for row in Q]


def psd_rational(Q) -> PsdResult:
    """Decide positive semidefiniteness by LDL^T with symmetric pivoting.

    The pivot is the largest remaining diagonal entry. A negative pivot stops
    the factorization; a zero pivot means every remaining diagonal entry is
    zero, so the trailing block must vanish identically.
    """
    A = to_fractions(Q)
    n = len(A)
    for i in range(n):
        if len(A[i]) != n:
            raise ValueError("matrix must be square")
        for j in range(i):
            if A[i][j] != A[j][i]:
                raise ValueError("matrix must be symmetric")
    remaining = list(range(n))
    pivots = []
    while remaining:
        k = max(remaining, key=lambda i: A[i][i])
        p = A[k][k]
        if p < 0:
            pivots.append(p)
            return PsdResult(False, tuple(pivots), len(pivots) - 1)
        if p == 0:
            rank = len(pivots)
            zero_block = all(A[r][c] == 0 for r in remaining for c in remaining)
            if not zero_block:
                return PsdResult(False, tuple(pivots) + (Fraction(0),), rank)
            pivots.extend([Fraction(0)] * len(remaining))
            return PsdResult(True, tuple(pivots), rank)
        pivots.append(p)
        remaining.remove(k)
        row_k = A[k]
        for r in remaining:
            f = A[r][k]
            if f == 0:
                continue
            f = f / p
            Ar = A[r]
            for c in remaining:
                if row_k[c]:
                    Ar[c] -= f * row_k[c]
    return PsdResult(True, tuple(pivots), len(pivots))


def solve_psd_system(M: dict[int, dict[int, Fraction]], rhs: Sequence[Fraction]) -> list[Fraction] | None:
    """Solve ``M z = rhs`` for a sparse symmetric PSD ``M`` (a Gram matrix ``A A^T``).

    Zero pivots of a PSD matrix come with zero rows, so those unknowns are set
    to 0 and the right-hand side must vanish there. Returns ``None`` when the
    system is inconsistent.
    """
    n = len(rhs)
    rows = {i: dict(M.get(i, {})) for i in range(n)}
    r = [Fraction(v) for v in rhs]
    order = []
    for i in range(n):
        piv = rows[i].get(i, 0)
        if piv == 0:
            if any(v != 0 for c, v in rows[i].items() if c > i):
                # only possible for non-PSD input
                raise ValueError("zero pivot with nonzero row; matrix is not PSD")
            if r[i] != 0:
                return None
            order.append((i, None))
            continue
        order.append((i, piv))
        row_i = rows[i]
        for j, mji in list(row_i.items()):
            if j <= i:
                continue
            # symmetric: M[j][i] == M[i][j]
            f = mji / piv
            row_j = rows[j]
            for c, v in row_i.items():
                if c <= i:
                    continue
                nv = row_j.get(c, 0) - f * v
                if nv == 0:
                    row_j.pop(c, None)
                else:
                    row_j[c] = nv
            r[j] -= f * r[i]
    z = [Fraction(0)] * n
    for i, piv in reversed(order):
        if piv is None:
            continue
        s = r[i]
        for c, v in rows[i].items():
            if c > i:
                s -= v * z[c]
        z[i] = s / piv
    return z


def min_norm_correction(rows: Sequence[Mapping], residual: Sequence[Fraction]) -> dict | None:
    """Smallest (2-norm) ``d`` with ``A d = residual``, rows of ``A`` as sparse dicts.

    Computes ``d = A^T (A A^T)^+ residual`` exactly; ``None`` if inconsistent.
    """
    col_index: dict = {}
    for j, row in enumerate(rows):
        for var, a in row.items():
            col_index.setdefault(var, []).append((j, a))
    M: dict[int, dict[int, Fraction]] = {j: {} for j in range(len(rows))}
    for entries in col_index.values():
        for j1, a1 in entries:
            Mj = M[j1]
            for j2, a2 in entries:
                Mj[j2] = Mj.get(j2, 0) + a1 * a2
    for j in M:
        M[j] = {k: v for k, v in M[j].items() if v != 0}
    z = solve_psd_system(M, residual)
    if z is None:
        return None
    d: dict = {}
    for j, row in enumerate(rows):
        if z[j] == 0:
            continue
        for var, a in row.items():
            d[var] = d.get(var, 0) + a * z[j]
    return d


def rref(rows: list[list[Fraction]]):
    """Reduced row echelon form; returns ``(R, pivot_columns)``."""
    A = [list(map(Fraction, r)) for r in rows]
    if not A:
        return A, []
    m, n = len(A), len(A[0])
    piv_cols = []
    r = 0
    for c in range(n):
        p = next((i for i in range(r, m) if A[i][c] != 0), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        pv = A[r][c]
        A[r] = [v / pv for v in A[r]]
        for i in range(m):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        piv_cols.append(c)
        r += 1
        if r == m:
            break
    return A[:r], piv_cols


def nullspace(rows: list[list[Fraction]], ncols: int) -> list[list[Fraction]]:
    """Basis of ``{v : A v = 0}`` as a list of vectors."""
    if not rows:
        return [[Fraction(int(i == j)) for i in range(ncols)] for j in range(ncols)]
    R, piv = rref(rows)
    free = [c for c in range(ncols) if c not in piv]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for i, pc in enumerate(piv):
            v[pc] = -R[i][f]
        basis.append(v)
    return basis
