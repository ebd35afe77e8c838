"""Gram-matrix parametrization of weighted SOS-matrix terms.

A block with weight ``w``, monomial basis ``Z = (z_1..z_m)`` and matrix size
``t`` stands for ``w * (Z (x) I_t)^T Q (Z (x) I_t)``. Gram rows/columns are
indexed by ``a * t + u`` for basis element ``a`` and matrix row ``u``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .cones import ConeSpec
from .polycore import Poly, PolyMatrix, grlex_key, mono_mul


def monomial_basis(nvars: int, max_deg: int, homogeneous_only: bool = False,
                   exact_deg: int | None = None) -> list[tuple]:
    """All monomials of degree ``<= max_deg`` (or ``== exact_deg``) in graded-lex order."""
    if homogeneous_only:
        degs = [max_deg if exact_deg is None else exact_deg]
    else:
        degs = range(max_deg + 1)
    out = []
    for d in degs:
        if d < 0:
            continue
        level = [m for m in _compositions(d, nvars)]
        level.sort(key=grlex_key)
        out.extend(level)
    return out


def _compositions(d, n):
    if n == 0:
        if d == 0:
            yield ()
        return
    for first in range(d, -1, -1):
        for rest in _compositions(d - first, n - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class BlockSpec:
    weight: Poly
    basis: tuple
    t: int

    @property
    def size(self) -> int:
        return len(self.basis) * self.t


@dataclass(frozen=True)
class GramBlock:
    weight: Poly
    basis: tuple
    t: int
    Q: np.ndarray  # float, or object dtype holding Fractions

    def __post_init__(self):
        object.__setattr__(self, "basis", tuple(tuple(m) for m in self.basis))
        Q = np.array(self.Q, dtype=self.Q.dtype if isinstance(self.Q, np.ndarray) else None)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if Q.shape[0] != len(self.basis) * self.t:
            raise ValueError(f"Q is {Q.shape[0]}x{Q.shape[0]} but basis*t = {len(self.basis) * self.t}")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)

    @property
    def is_exact(self) -> bool:
        return self.Q.dtype == object

    @property
    def spec(self) -> BlockSpec:
        return BlockSpec(self.weight, self.basis, self.t)


def expand_block(block: GramBlock) -> PolyMatrix:
    """``w * (Z (x) I)^T Q (Z (x) I)`` as a symmetric polynomial matrix."""
    Q, t, basis, w = block.Q, block.t, block.basis, block.weight
    m = len(basis)
    if Q.shape != (m * t, m * t):
        raise ValueError("Gram size does not match basis and t")
    exact = block.is_exact
    if exact != w.exact:
        w = w.to_exact() if exact else w.to_float()
    nv = w.nvars
    acc = [[{} for _ in range(t)] for _ in range(t)]
    for i in range(m * t):
        a, u = divmod(i, t)
        for j in range(m * t):
            q = Q[i, j]
            if q == 0:
                continue
            b, v = divmod(j, t)
            mono = mono_mul(basis[a], basis[b])
            d = acc[u][v]
            d[mono] = d.get(mono, 0) + q
    rows = []
    for u in range(t):
        row = []
        for v in range(t):
            row.append(w * Poly(nv, acc[u][v], exact))
        rows.append(row)
    return PolyMatrix(rows)


class InfeasibleByDegree(ValueError):
    """Some coefficient of the target cannot be produced by any block."""

    def __init__(self, label, value):
        mono, u, v = label
        super().__init__(f"coefficient {value} of monomial {mono} in entry ({u},{v}) is not producible")
        self.label = label
        self.value = value


@dataclass
class SdpProblem:
    """``sum_k <C_kj, Q_k> + sum_i a_ji f_i = b_j`` with ``Q_k`` PSD and ``f`` free.

    ``rows[j]`` maps ``(k, i, l)`` with ``i <= l`` to the coefficient of
    ``Q_k[i, l]`` in constraint ``j`` (off-diagonal Gram entries are counted
    once, i.e. the symmetric pair is folded in).
    """

    blocks: list
    rows: list
    b: list
    labels: list
    free_rows: list = field(default_factory=list)
    nfree: int = 0
    t: int = 1
    nvars: int = 0

    def __post_init__(self):
        if not self.free_rows:
            self.free_rows = [{} for _ in self.rows]

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def block_sizes(self) -> list[int]:
        return [blk.size for blk in self.blocks]

    def scale(self) -> float:
        """Magnitude recorded for relative tolerances."""
        vals = [abs(float(v)) for v in self.b]
        for row in self.rows:
            vals.extend(abs(float(c)) for c in row.values())
        return max([1.0] + vals)

    def apply(self, Qs: Sequence[np.ndarray], f=None) -> list:
        """``A(Q) + A_free f`` row by row, in the arithmetic of the inputs."""
        out = []
        for j, row in enumerate(self.rows):
            s = 0
            for (k, i, l), c in row.items():
                s += c * Qs[k][i, l]
            if f is not None:
                for idx, c in self.free_rows[j].items():
                    s += c * f[idx]
            out.append(s)
        return out

    def residual(self, Qs, f=None) -> list:
        return [a - bj for a, bj in zip(self.apply(Qs, f), self.b)]

    def constraint_matrices(self, dtype=float):
        """Per block, the array ``C[k]`` of shape ``(nrows, n_k, n_k)`` with
        ``<C[k][j], Q_k> = sum of row j over block k``."""
        mats = [np.zeros((self.nrows, s, s), dtype=dtype) for s in self.block_sizes]
        if dtype == object:
            for M in mats:
                M.fill(Fraction(0))
        for j, row in enumerate(self.rows):
            for (k, i, l), c in row.items():
                if i == l:
                    mats[k][j, i, i] += c
                else:
                    half = c / 2 if dtype == object else float(c) / 2
                    mats[k][j, i, l] += half
                    mats[k][j, l, i] += half
        return mats

    def dump(self) -> str:
        """One constraint per line; solver-independent debug view."""
        lines = [f"# blocks: {self.block_sizes}  rows: {self.nrows}  free: {self.nfree}"]
        for k, blk in enumerate(self.blocks):
            lines.append(f"# block {k}: weight {blk.weight}  basis {list(blk.basis)}  t={blk.t}")
        for j, row in enumerate(self.rows):
            mono, u, v = self.labels[j]
            terms = [f"{c}*Q{k}[{i},{l}]" for (k, i, l), c in sorted(row.items())]
            terms += [f"{c}*f[{i}]" for i, c in sorted(self.free_rows[j].items())]
            lines.append(f"{list(mono)} ({u},{v}): " + (" + ".join(terms) or "0") + f" = {self.b[j]}")
        return "\n".join(lines)


def _block_basis(nvars, target, wdeg, homogeneous):
    room = target - wdeg
    if room < 0:
        return None
    if homogeneous:
        if room % 2:
            return None
        return monomial_basis(nvars, room // 2, homogeneous_only=True)
    return monomial_basis(nvars, room // 2)


def assemble(lhs: PolyMatrix, cone: ConeSpec, homogeneous: bool | None = None,
             target_degree: int | None = None) -> SdpProblem:
    """Coefficient-matching system for ``lhs = sum_k w_k * Gram_k (+ free terms)``.

    The target degree is ``max(deg lhs, cone.mult_degree)`` unless given; a
    homogeneous problem (homogeneous lhs and weights) matches exactly
    ``deg lhs`` and uses exact-degree bases.
    """
    if not lhs.symmetric:
        raise ValueError("lhs must be symmetric")
    t, nv = lhs.size, lhs.nvars
    for w in cone.weights:
        if w.nvars != nv:
            raise ValueError("cone weights and lhs disagree on nvars")
    exact = lhs.exact
    if homogeneous is None:
        homogeneous = lhs.is_homogeneous() and all(w.is_homogeneous() for w in cone.weights)
    if target_degree is None:
        dl = 0 if lhs.is_zero() else int(lhs.degree)
        target_degree = dl if homogeneous else max(dl, cone.mult_degree)

    blocks = []
    for w in cone.weights:
        w = w if w.exact == exact else (w.to_exact() if exact else w.to_float())
        basis = _block_basis(nv, target_degree, int(w.degree), homogeneous)
        if basis:
            blocks.append(BlockSpec(w, tuple(basis), t))

    index: dict = {}
    rows: list = []
    labels: list = []
    free_rows: list = []

    def row_for(label):
        j = index.get(label)
        if j is None:
            j = index[label] = len(rows)
            rows.append({})
            free_rows.append({})
            labels.append(label)
        return j

    for k, blk in enumerate(blocks):
        wterms = list(blk.weight.terms.items())
        basis = blk.basis
        size = blk.size
        for i in range(size):
            a, u = divmod(i, t)
            for l in range(i, size):
                b, v = divmod(l, t)
                mult = 1 if (i == l or u != v) else 2
                mono = mono_mul(basis[a], basis[b])
                eu, ev = (u, v) if u <= v else (v, u)
                for c, wc in wterms:
                    j = row_for((mono_mul(mono, c), eu, ev))
                    rows[j][(k, i, l)] = rows[j].get((k, i, l), 0) + mult * wc

    nfree = 0
    for h in cone.equality_mults:
        h = h if h.exact == exact else (h.to_exact() if exact else h.to_float())
        room = target_degree - int(h.degree)
        if room < 0:
            continue
        for u in range(t):
            for v in range(u, t):
                for gamma in monomial_basis(nv, room):
                    idx = nfree
                    nfree += 1
                    for c, hc in h.terms.items():
                        j = row_for((mono_mul(gamma, c), u, v))
                        free_rows[j][idx] = free_rows[j].get(idx, 0) + hc

    zero = Fraction(0) if exact else 0.0
    for u in range(t):
        for v in range(u, t):
            for mono in lhs[u, v].terms:
                row_for((mono, u, v))

    order = sorted(range(len(rows)), key=lambda j: (labels[j][1], labels[j][2], grlex_key(labels[j][0])))
    rows = [rows[j] for j in order]
    free_rows = [free_rows[j] for j in order]
    labels = [labels[j] for j in order]
    b = [lhs[u, v].coeff(mono) if lhs[u, v].terms.get(mono) is not None else zero for mono, u, v in labels]

    for j, label in enumerate(labels):
        if not rows[j] and not free_rows[j] and b[j] != 0:
            raise InfeasibleByDegree(label, b[j])
    return SdpProblem(blocks, rows, b, labels, free_rows, nfree, t, nv)


def blocks_from_solution(problem: SdpProblem, Qs) -> list[GramBlock]:
    return [GramBlock(spec.weight, spec.basis, spec.t, np.asarray(Q)) for spec, Q in zip(problem.blocks, Qs)]


def sum_blocks(blocks: Sequence[GramBlock], t: int, nvars: int, exact: bool) -> PolyMatrix:
    total = PolyMatrix.zeros(t, nvars, exact)
    for blk in blocks:
        total = total + expand_block(blk)
    return total
