"""Certificate record and its plain-text file format.

Layout (sections in this order, ``#`` starts a comment line)::

    [meta]
    kind = reznick
    N = 1
    ...
    [denom]
    x1^2 + x2^2 + x3^2
    [lhs]
    0 0 = <polynomial>
    [cone]
    <one weight per line>
    [block 0]
    weight = <polynomial>
    basis = 0,0,2 0,1,1 ...
    <one row of Q per line, space-separated p/q>

Everything is exact, so reading and writing round-trips bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .gram import GramBlock, expand_block
from .polycore import ParseError, Poly, PolyMatrix, default_names, parse_poly

TIMESTAMP_KEY = "timestamp"
_META_ORDER = ("kind", "N", "nvars", "t", "status", "residual", "seed", "denom_used",
               "eps", "lambda", "D", "solver", "iterations", "max_residual", "min_eig",
               "margin", "kernel_dims", "projection_distance", "plausibility", TIMESTAMP_KEY)


@dataclass
class Certificate:
    kind: str
    N: int
    lhs: PolyMatrix
    blocks: list
    status: str                  # "exact" | "numeric"
    residual: object
    denom: Poly
    cone_weights: tuple = ()
    provenance: dict = field(default_factory=dict)

    @property
    def nvars(self) -> int:
        return self.lhs.nvars

    @property
    def t(self) -> int:
        return self.lhs.size

    def expansion(self) -> PolyMatrix:
        exact = all(b.is_exact for b in self.blocks)
        total = PolyMatrix.zeros(self.t, self.nvars, exact)
        for blk in self.blocks:
            total = total + expand_block(blk)
        return total


class CertificateFormatError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


def _fmt_frac(v) -> str:
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _poly_str(p: Poly) -> str:
    return p.to_exact().to_str(default_names(p.nvars))


def dumps(cert: Certificate, include_timestamp: bool = True) -> str:
    nv = cert.nvars
    meta = dict(cert.provenance)
    meta.update(kind=cert.kind, N=cert.N, nvars=nv, t=cert.t, status=cert.status,
                residual=_fmt_frac(cert.residual) if isinstance(cert.residual, (int, Fraction))
                else repr(float(cert.residual)))
    if not include_timestamp:
        meta.pop(TIMESTAMP_KEY, None)
    keys = [k for k in _META_ORDER if k in meta] + sorted(k for k in meta if k not in _META_ORDER)
    out = ["# polynomial-matrix positivity certificate", "[meta]"]
    for k in keys:
        out.append(f"{k} = {meta[k]}")
    out += ["[denom]", _poly_str(cert.denom), "[lhs]"]
    for u in range(cert.t):
        for v in range(u, cert.t):
            out.append(f"{u} {v} = {_poly_str(cert.lhs[u, v])}")
    out.append("[cone]")
    out += [_poly_str(w) for w in cert.cone_weights]
    for k, blk in enumerate(cert.blocks):
        out.append(f"[block {k}]")
        out.append(f"weight = {_poly_str(blk.weight)}")
        out.append("basis = " + " ".join(",".join(map(str, m)) for m in blk.basis))
        for row in blk.Q:
            out.append(" ".join(_fmt_frac(v) for v in row))
    return "\n".join(out) + "\n"


def write_certificate(cert: Certificate, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(cert))


def _parse_meta_value(v: str):
    try:
        return int(v)
    except ValueError:
        return v


def loads(text: str) -> Certificate:
    sections: list = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            sections.append((line[1:-1].strip(), lineno, []))
        elif not sections:
            raise CertificateFormatError("content before the first section", lineno)
        else:
            sections[-1][2].append((lineno, line))
    if not sections or sections[0][0] != "meta":
        raise CertificateFormatError("missing [meta] section")
    meta = {}
    for lineno, line in sections[0][2]:
        if "=" not in line:
            raise CertificateFormatError("expected 'key = value'", lineno)
        k, v = line.split("=", 1)
        meta[k.strip()] = v.strip()
    try:
        nv, t, N = int(meta["nvars"]), int(meta["t"]), int(meta["N"])
        kind, status = meta["kind"], meta["status"]
    except (KeyError, ValueError) as exc:
        raise CertificateFormatError(f"bad or missing meta field: {exc}") from None

    def poly(s, lineno):
        try:
            return parse_poly(s, nv)
        except ParseError as exc:
            raise CertificateFormatError(str(exc), lineno) from None

    denom = Poly.constant(1, nv)
    entries = [[Poly.zero(nv) for _ in range(t)] for _ in range(t)]
    weights, blocks = [], []
    for name, start, body in sections[1:]:
        if name == "denom":
            if len(body) != 1:
                raise CertificateFormatError("[denom] needs exactly one line", start)
            denom = poly(body[0][1], body[0][0])
        elif name == "lhs":
            for lineno, line in body:
                head, _, expr = line.partition("=")
                try:
                    u, v = (int(s) for s in head.split())
                except ValueError:
                    raise CertificateFormatError("expected 'u v = polynomial'", lineno) from None
                if not (0 <= u <= v < t):
                    raise CertificateFormatError("entry index out of range", lineno)
                entries[u][v] = entries[v][u] = poly(expr.strip(), lineno)
        elif name == "cone":
            weights = [poly(line, lineno) for lineno, line in body]
        elif name.startswith("block"):
            blocks.append(_parse_block(body, start, nv, t, poly))
        else:
            raise CertificateFormatError(f"unknown section [{name}]", start)
    residual = meta.get("residual", "0")
    try:
        residual = Fraction(residual)
    except ValueError:
        pass
    prov = {k: _parse_meta_value(v) for k, v in meta.items()
            if k not in ("kind", "N", "nvars", "t", "status", "residual")}
    return Certificate(kind, N, PolyMatrix(entries), blocks, status, residual, denom, tuple(weights), prov)


def _parse_block(body, start, nv, t, poly):
    if len(body) < 2 or not body[0][1].startswith("weight") or not body[1][1].startswith("basis"):
        raise CertificateFormatError("block needs 'weight =' then 'basis =' lines", start)
    weight = poly(body[0][1].split("=", 1)[1].strip(), body[0][0])
    basis = []
    for tok in body[1][1].split("=", 1)[1].split():
        try:
            m = tuple(int(e) for e in tok.split(","))
        except ValueError:
            raise CertificateFormatError(f"bad monomial {tok!r}", body[1][0]) from None
        if len(m) != nv or min(m) < 0:
            raise CertificateFormatError(f"monomial {tok!r} has wrong arity", body[1][0])
        basis.append(m)
    n = len(basis) * t
    rows = body[2:]
    if len(rows) != n:
        raise CertificateFormatError(f"expected {n} rows of Q, found {len(rows)}", start)
    Q = np.empty((n, n), dtype=object)
    for i, (lineno, line) in enumerate(rows):
        toks = line.split()
        if len(toks) != n:
            raise CertificateFormatError(f"expected {n} entries", lineno)
        try:
            Q[i] = [Fraction(s) for s in toks]
        except (ValueError, ZeroDivisionError):
            raise CertificateFormatError("bad rational entry", lineno) from None
    return GramBlock(weight, basis, t, Q)


def read_certificate(path) -> Certificate:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
