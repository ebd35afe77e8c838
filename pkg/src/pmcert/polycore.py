"""Sparse multivariate polynomials and polynomial matrices.

Coefficients live in one of two scalar modes, fixed per object:

* exact -- :class:`fractions.Fraction` (ints are promoted),
* float -- binary64 ``float``.

Mixing modes inside one expression raises :class:`ScalarModeError`.
Monomials are exponent tuples; the homogenization variable ``X0`` always
occupies slot 0 of an ``n + 1`` variable context.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Integral, Rational
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

Monomial = tuple  # tuple[int, ...]

#: degree of the zero polynomial
ZERO_DEGREE = float("-inf")


class ScalarModeError(TypeError):
    """Raised when exact and float scalars would meet in one operation."""


class DimensionError(ValueError):
    pass


class DegreeInfo(NamedTuple):
    degree: float
    is_homogeneous: bool
    is_even_degree: bool


def grlex_key(m: Monomial):
    """Ascending graded-lex order: ``1 < x1 < x2 < x1^2 < x1*x2 < ...``."""
    return (sum(m), tuple(-e for e in m))


def _print_key(m: Monomial):
    return (-sum(m), tuple(-e for e in m))


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


def _coerce(c, exact: bool):
    if exact:
        if isinstance(c, Fraction):
            return c
        if isinstance(c, (Integral, Rational)) and not isinstance(c, bool):
            return Fraction(c)
        raise ScalarModeError(f"float-like scalar {c!r} in exact mode")
    if isinstance(c, Fraction):
        raise ScalarModeError(f"rational scalar {c!r} in float mode")
    return float(c)


def _is_scalar(c) -> bool:
    return isinstance(c, (int, float, Fraction, np.integer, np.floating)) and not isinstance(c, bool)


class Poly:
    """Immutable sparse polynomial in ``nvars`` variables."""

    __slots__ = ("nvars", "terms", "exact", "_hash")

    def __init__(self, nvars: int, terms: Mapping[Monomial, object] | None = None, exact: bool = True):
        self.nvars = int(nvars)
        self.exact = bool(exact)
        clean = {}
        for m, c in (terms or {}).items():
            m = tuple(int(e) for e in m)
            if len(m) != self.nvars:
                raise DimensionError(f"monomial {m} does not have {self.nvars} exponents")
            if any(e < 0 for e in m):
                raise ValueError(f"negative exponent in {m}")
            c = _coerce(c, self.exact)
            if c != 0:
                clean[m] = clean.get(m, 0) + c
                if clean[m] == 0:
                    del clean[m]
        self.terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, nvars, terms, exact):
        # trusted constructor: terms already pruned and coerced
        p = object.__new__(cls)
        p.nvars, p.terms, p.exact, p._hash = nvars, terms, exact, None
        return p

    # -- constructors ---------------------------------------------------
    @classmethod
    def zero(cls, nvars, exact=True):
        return cls._raw(nvars, {}, exact)

    @classmethod
    def constant(cls, c, nvars, exact=True):
        return cls(nvars, {(0,) * nvars: c}, exact)

    @classmethod
    def var(cls, i, nvars, exact=True):
        m = [0] * nvars
        m[i] = 1
        return cls(nvars, {tuple(m): 1}, exact)

    @classmethod
    def monomial(cls, exps, coeff=1, exact=True):
        return cls(len(exps), {tuple(exps): coeff}, exact)

    # -- basic properties -----------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self):
        if not self.terms:
            return ZERO_DEGREE
        return max(sum(m) for m in self.terms)

    def is_homogeneous(self) -> bool:
        return len({sum(m) for m in self.terms}) <= 1

    def degree_info(self) -> DegreeInfo:
        d = self.degree
        even = d != ZERO_DEGREE and d % 2 == 0
        return DegreeInfo(d, self.is_homogeneous(), even)

    def is_linear(self) -> bool:
        return self.degree == 1

    def coeff(self, m: Monomial):
        return self.terms.get(tuple(m), Fraction(0) if self.exact else 0.0)

    def sorted_terms(self):
        """Terms in descending graded-lex order."""
        return sorted(self.terms.items(), key=lambda kv: _print_key(kv[0]))

    def norm_inf(self):
        return max((abs(c) for c in self.terms.values()), default=Fraction(0) if self.exact else 0.0)

    def to_float(self) -> "Poly":
        if not self.exact:
            return self
        return Poly._raw(self.nvars, {m: float(c) for m, c in self.terms.items()}, False)

    def to_exact(self) -> "Poly":
        """Exact copy; float coefficients are converted without rounding."""
        if self.exact:
            return self
        return Poly._raw(self.nvars, {m: Fraction(c) for m, c in self.terms.items()}, True)

    # -- arithmetic -----------------------------------------------------
    def _check(self, other: "Poly"):
        if other.nvars != self.nvars:
            raise DimensionError(f"nvars mismatch: {self.nvars} vs {other.nvars}")
        if other.exact != self.exact:
            raise ScalarModeError("cannot mix exact and float polynomials")

    def _lift(self, other):
        if isinstance(other, Poly):
            self._check(other)
            return other
        if _is_scalar(other):
            return Poly.constant(_coerce(other, self.exact), self.nvars, self.exact)
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m, 0) + c
            if v == 0:
                out.pop(m, None)
            else:
                out[m] = v
        return Poly._raw(self.nvars, out, self.exact)

    __radd__ = __add__

    def __neg__(self):
        return Poly._raw(self.nvars, {m: -c for m, c in self.terms.items()}, self.exact)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        if _is_scalar(other):
            c = _coerce(other, self.exact)
            if c == 0:
                return Poly.zero(self.nvars, self.exact)
            return Poly._raw(self.nvars, {m: v * c for m, v in self.terms.items()}, self.exact)
        if not isinstance(other, Poly):
            return NotImplemented
        self._check(other)
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = mono_mul(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return Poly._raw(self.nvars, {m: c for m, c in out.items() if c != 0}, self.exact)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __pow__(self, k: int):
        if not isinstance(k, Integral) or k < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = Poly.constant(1, self.nvars, self.exact)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if _is_scalar(other):
            try:
                other = Poly.constant(other, self.nvars, self.exact)
            except ScalarModeError:
                return False
        if not isinstance(other, Poly):
            return NotImplemented
        return self.nvars == other.nvars and self.exact == other.exact and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, self.exact, frozenset(self.terms.items())))
        return self._hash

    # -- evaluation -----------------------------------------------------
    def evaluate(self, x: Sequence):
        """Value at one point.

        Exact polynomials evaluated at a point of ints/Fractions give a Fraction;
        anything else is computed in floats.
        """
        if len(x) != self.nvars:
            raise DimensionError(f"point has {len(x)} coordinates, expected {self.nvars}")
        rational = self.exact and all(isinstance(v, (Integral, Fraction)) for v in x)
        if rational:
            xs = [Fraction(v) for v in x]
            total = Fraction(0)
            for m, c in self.terms.items():
                term = c
                for v, e in zip(xs, m):
                    if e:
                        term *= v ** e
                total += term
            return total
        xs = [float(v) for v in x]
        total = 0.0
        for m, c in self.terms.items():
            term = float(c)
            for v, e in zip(xs, m):
                if e:
                    term *= v ** e
            total += term
        return total

    def evaluate_many(self, X) -> np.ndarray:
        """Vectorized float evaluation at the rows of ``X`` (shape ``(m, nvars)``)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.nvars:
            raise DimensionError(f"expected points of shape (m, {self.nvars})")
        out = np.zeros(X.shape[0])
        for m, c in self.terms.items():
            term = np.full(X.shape[0], float(c))
            for i, e in enumerate(m):
                if e:
                    term *= X[:, i] ** e
            out += term
        return out

    # -- homogenization -------------------------------------------------
    def homogenize(self, degree: int | None = None) -> "Poly":
        """Homogenize in ``nvars + 1`` variables, X0 in slot 0.

        ``degree`` defaults to the polynomial's own degree; a larger value pads
        every term with extra powers of X0 (used for matrix homogenization).
        """
        if self.is_zero():
            if degree is None:
                raise ValueError("cannot homogenize the zero polynomial")
            return Poly.zero(self.nvars + 1, self.exact)
        d = self.degree if degree is None else degree
        if d < self.degree:
            raise ValueError(f"target degree {d} below polynomial degree {self.degree}")
        terms = {(d - sum(m),) + m: c for m, c in self.terms.items()}
        return Poly._raw(self.nvars + 1, terms, self.exact)

    def dehomogenize(self) -> "Poly":
        """Substitute X0 := 1 (slot 0) and drop that variable."""
        if self.nvars < 1:
            raise DimensionError("no X0 slot to substitute")
        out: dict = {}
        for m, c in self.terms.items():
            k = m[1:]
            out[k] = out.get(k, 0) + c
        return Poly._raw(self.nvars - 1, {m: c for m, c in out.items() if c != 0}, self.exact)

    # -- printing -------------------------------------------------------
    def to_str(self, names: Sequence[str] | None = None) -> str:
        if names is None:
            names = default_names(self.nvars)
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.sorted_terms():
            neg = c < 0
            a = -c if neg else c
            factors = []
            for name, e in zip(names, m):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            cs = _fmt_scalar(a)
            if factors:
                body = "*".join(factors) if a == 1 else cs + "*" + "*".join(factors)
            else:
                body = cs
            parts.append((neg, body))
        neg0, first = parts[0]
        s = ("-" if neg0 else "") + first
        for neg, body in parts[1:]:
            s += (" - " if neg else " + ") + body
        return s

    def __str__(self):
        return self.to_str()

    def __repr__(self):
        mode = "exact" if self.exact else "float"
        return f"Poly({self.to_str()!r}, nvars={self.nvars}, {mode})"


def _fmt_scalar(c) -> str:
    if isinstance(c, Fraction):
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    return repr(float(c))


def default_names(nvars: int, with_x0: bool = False) -> list[str]:
    if with_x0:
        return [f"x{i}" for i in range(nvars)]
    return [f"x{i + 1}" for i in range(nvars)]


def sum_of_squares_poly(nvars: int, exact: bool = True, skip: int = 0) -> Poly:
    """sigma = sum of x_i^2 over slots ``skip..nvars-1``."""
    terms = {}
    for i in range(skip, nvars):
        m = [0] * nvars
        m[i] = 2
        terms[tuple(m)] = 1
    return Poly(nvars, terms, exact)


def sum_of_vars_poly(nvars: int, exact: bool = True, skip: int = 0) -> Poly:
    terms = {}
    for i in range(skip, nvars):
        m = [0] * nvars
        m[i] = 1
        terms[tuple(m)] = 1
    return Poly(nvars, terms, exact)


class PolyMatrix:
    """Immutable ``t x t`` matrix of :class:`Poly` sharing nvars and scalar mode."""

    __slots__ = ("entries", "nvars", "exact", "symmetric")

    def __init__(self, rows: Iterable[Iterable[Poly]]):
        entries = tuple(tuple(r) for r in rows)
        t = len(entries)
        if t == 0 or any(len(r) != t for r in entries):
            raise DimensionError("polynomial matrix must be square and nonempty")
        first = entries[0][0]
        for r in entries:
            for p in r:
                if not isinstance(p, Poly):
                    raise TypeError("entries must be Poly")
                first._check(p)
        self.entries = entries
        self.nvars = first.nvars
        self.exact = first.exact
        self.symmetric = all(entries[i][j] == entries[j][i] for i in range(t) for j in range(i + 1, t))

    @property
    def size(self) -> int:
        return len(self.entries)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    @classmethod
    def identity(cls, t, nvars, exact=True):
        one, zero = Poly.constant(1, nvars, exact), Poly.zero(nvars, exact)
        return cls([[one if i == j else zero for j in range(t)] for i in range(t)])

    @classmethod
    def zeros(cls, t, nvars, exact=True):
        zero = Poly.zero(nvars, exact)
        return cls([[zero] * t for _ in range(t)])

    @classmethod
    def diag(cls, polys: Sequence[Poly]):
        p0 = polys[0]
        zero = Poly.zero(p0.nvars, p0.exact)
        t = len(polys)
        return cls([[polys[i] if i == j else zero for j in range(t)] for i in range(t)])

    @property
    def degree(self):
        return max(p.degree for r in self.entries for p in r)

    def is_zero(self):
        return all(p.is_zero() for r in self.entries for p in r)

    def is_homogeneous(self) -> bool:
        return len({sum(m) for r in self.entries for p in r for m in p.terms}) <= 1

    def degree_info(self) -> DegreeInfo:
        d = self.degree
        return DegreeInfo(d, self.is_homogeneous(), d != ZERO_DEGREE and d % 2 == 0)

    def map(self, f) -> "PolyMatrix":
        return PolyMatrix([[f(p) for p in r] for r in self.entries])

    def to_float(self):
        return self.map(Poly.to_float)

    @property
    def T(self) -> "PolyMatrix":
        t = self.size
        return PolyMatrix([[self.entries[j][i] for j in range(t)] for i in range(t)])

    def _check(self, other: "PolyMatrix"):
        if other.size != self.size:
            raise DimensionError(f"size mismatch: {self.size} vs {other.size}")
        self.entries[0][0]._check(other.entries[0][0])

    def __add__(self, other):
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        self._check(other)
        return PolyMatrix([[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self.entries, other.entries)])

    def __sub__(self, other):
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        self._check(other)
        return PolyMatrix([[a - b for a, b in zip(r1, r2)] for r1, r2 in zip(self.entries, other.entries)])

    def __neg__(self):
        return self.map(lambda p: -p)

    def __mul__(self, other):
        """Scale entrywise by a scalar or a Poly."""
        if isinstance(other, PolyMatrix):
            return NotImplemented
        return self.map(lambda p: p * other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        self._check(other)
        t = self.size
        zero = Poly.zero(self.nvars, self.exact)
        rows = []
        for i in range(t):
            row = []
            for j in range(t):
                acc = zero
                for k in range(t):
                    a, b = self.entries[i][k], other.entries[k][j]
                    if a.terms and b.terms:
                        acc = acc + a * b
                row.append(acc)
            rows.append(row)
        return PolyMatrix(rows)

    def __eq__(self, other):
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        return self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def evaluate(self, x: Sequence) -> np.ndarray:
        """Numeric matrix at ``x``; an object array of Fractions for exact data at rational points."""
        vals = [[p.evaluate(x) for p in r] for r in self.entries]
        if all(isinstance(v, Fraction) for r in vals for v in r):
            return np.array(vals, dtype=object)
        return np.array(vals, dtype=float)

    def evaluate_many(self, X) -> np.ndarray:
        """Float matrices at every row of ``X``; shape ``(m, t, t)``."""
        X = np.asarray(X, dtype=float)
        t = self.size
        out = np.empty((X.shape[0], t, t))
        for i in range(t):
            for j in range(i, t):
                out[:, i, j] = self.entries[i][j].evaluate_many(X)
                if j != i:
                    out[:, j, i] = self.entries[j][i].evaluate_many(X) if not self.symmetric else out[:, i, j]
        return out

    def homogenize(self) -> "PolyMatrix":
        """Entrywise homogenization to the common matrix degree."""
        d = self.degree
        if d == ZERO_DEGREE:
            raise ValueError("cannot homogenize the zero matrix")
        return self.map(lambda p: p.homogenize(d))

    def dehomogenize(self) -> "PolyMatrix":
        return self.map(Poly.dehomogenize)

    def norm_inf(self):
        return max(p.norm_inf() for r in self.entries for p in r)

    def to_str(self, names=None) -> str:
        return "[" + ", ".join("[" + ", ".join(p.to_str(names) for p in r) + "]" for r in self.entries) + "]"

    def __str__(self):
        return self.to_str()

    def __repr__(self):
        return f"PolyMatrix({self.to_str()!r})"


def homogenize(p):
    """Homogenize a Poly or PolyMatrix; X0 becomes slot 0."""
    return p.homogenize()


def dehomogenize(p):
    return p.dehomogenize()


def degree_info(p) -> DegreeInfo:
    return p.degree_info()


def as_matrix(p) -> PolyMatrix:
    return p if isinstance(p, PolyMatrix) else PolyMatrix([[p]])


# ---------------------------------------------------------------------------
# text syntax
# ---------------------------------------------------------------------------

class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.message = message
        self.offset = offset


_PUNCT = set("+-*/^()[],")


def _tokenize(text: str):
    toks = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(("int", text[i:j], i))
            i = j
        elif ch == "x":
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            if j == i + 1:
                raise ParseError("variable name must be x followed by an index", i)
            toks.append(("var", text[i:j], i))
            i = j
        elif ch in _PUNCT:
            toks.append((ch, ch, i))
            i += 1
        else:
            raise ParseError(f"unexpected character {ch!r}", i)
    toks.append(("end", "", n))
    return toks


class _Parser:
    def __init__(self, text, nvars, allow_x0):
        self.toks = _tokenize(text)
        self.pos = 0
        self.nvars = nvars
        self.allow_x0 = allow_x0

    def peek(self):
        return self.toks[self.pos]

    def take(self, kind=None):
        tok = self.toks[self.pos]
        if kind is not None and tok[0] != kind:
            want = "end of input" if kind == "end" else repr(kind)
            got = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ParseError(f"expected {want}, found {got}", tok[2])
        self.pos += 1
        return tok

    def _nv(self):
        return self.nvars + 1 if self.allow_x0 else self.nvars

    def expr(self) -> Poly:
        if self.peek()[0] in "+-":
            sign = self.take()[0]
            acc = self.term()
            if sign == "-":
                acc = -acc
        else:
            acc = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            rhs = self.term()
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def term(self) -> Poly:
        acc = self.power()
        while self.peek()[0] in ("*", "/"):
            op, _, at = self.take()
            rhs = self.power()
            if op == "*":
                acc = acc * rhs
            else:
                if rhs.degree > 0 or rhs.is_zero():
                    raise ParseError("division only by nonzero constants", at)
                acc = acc * (1 / rhs.coeff((0,) * rhs.nvars))
        return acc

    def power(self) -> Poly:
        base = self.atom()
        if self.peek()[0] == "^":
            self.take()
            kind, val, at = self.peek()
            if kind != "int":
                raise ParseError("expected integer exponent after '^'", at)
            self.take()
            base = base ** int(val)
        return base

    def atom(self) -> Poly:
        kind, val, at = self.peek()
        nv = self._nv()
        if kind == "int":
            self.take()
            return Poly.constant(int(val), nv)
        if kind == "var":
            self.take()
            idx = int(val[1:])
            if self.allow_x0:
                slot = idx
                ok = 0 <= idx <= self.nvars
            else:
                slot = idx - 1
                ok = 1 <= idx <= self.nvars
            if not ok:
                raise ParseError(f"variable {val} out of range for nvars={self.nvars}", at)
            return Poly.var(slot, nv)
        if kind == "(":
            self.take()
            p = self.expr()
            self.take(")")
            return p
        if kind == "-":
            self.take()
            return -self.power()
        got = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {got}", at)

    def matrix(self) -> PolyMatrix:
        self.take("[")
        rows = []
        while True:
            self.take("[")
            row = [self.expr()]
            while self.peek()[0] == ",":
                self.take()
                row.append(self.expr())
            self.take("]")
            rows.append(row)
            if self.peek()[0] == ",":
                self.take()
                continue
            break
        self.take("]")
        if any(len(r) != len(rows) for r in rows):
            raise ParseError("matrix must be square", self.peek()[2])
        return PolyMatrix(rows)


def parse_poly(text: str, nvars: int, allow_x0: bool = False) -> Poly:
    """Parse ``3/2*x1^2*x2 - x3 + 1`` exactly.

    Variables are ``x1..xn``; with ``allow_x0`` the context has ``n + 1``
    variables and ``x0`` is slot 0.
    """
    p = _Parser(str(text), nvars, allow_x0)
    out = p.expr()
    p.take("end")
    return out


def parse_matrix(text: str, nvars: int, allow_x0: bool = False) -> PolyMatrix:
    """Parse ``[[p11, p12], [p21, p22]]``; a bare polynomial gives a 1x1 matrix."""
    p = _Parser(str(text), nvars, allow_x0)
    if p.peek()[0] == "[":
        out = p.matrix()
    else:
        out = PolyMatrix([[p.expr()]])
    p.take("end")
    return out
