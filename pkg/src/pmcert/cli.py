"""Command-line front end.

Exit codes:
  0  exact certificate / verified exactly / no negative sample
  1  parse error or malformed input
  2  numeric-only certificate / verification not exact / negative sample found
  3  every N attempted returned checked infeasibility evidence
  4  inconclusive (no certificate, no evidence at some N)
  5  sampling found no point of K in the box (possibly empty K)

Problem files are YAML mappings; command-line flags override file values.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from . import certify as C
from .certificate import CertificateFormatError, read_certificate, write_certificate
from .cones import DEFAULT_SEED, GeneratorSet, add_ball, sample_K
from .polycore import ParseError, PolyMatrix, default_names, parse_matrix, parse_poly
from .verify import MalformedCertificate, verify_certificate

SEED_ENV = "PMCERT_SEED"

EXIT_OK, EXIT_PARSE, EXIT_NUMERIC, EXIT_INFEASIBLE, EXIT_INCONCLUSIVE, EXIT_EMPTY = range(6)

_KEYS = {"nvars", "kind", "F", "scalar_gens", "matrix_gens", "eps", "lambda", "D", "N_min",
         "N_max", "seed", "tol_r", "tol_e", "max_iter", "box", "ball", "count"}


class ProblemError(ValueError):
    def __init__(self, path, line, col, message):
        super().__init__(f"{path}:{line}:{col}: {message}")


@dataclass
class Problem:
    path: str
    nvars: int
    F: PolyMatrix
    kind: str = "scherer_hol"
    scalar_gens: list = field(default_factory=list)
    matrix_gens: list = field(default_factory=list)
    eps: Fraction | None = None
    lam: Fraction | None = None
    D: int = 2
    N_min: int | None = None
    N_max: int | None = None
    seed: int | None = None
    tol_r: float = 1e-8
    tol_e: float = 1e-9
    max_iter: int = 200
    box: tuple = (-1.0, 1.0)
    ball: Fraction | None = None
    count: int = 1000

    def generators(self, scalarize=True) -> GeneratorSet:
        g = GeneratorSet(self.nvars, self.scalar_gens, self.matrix_gens)
        if self.ball is not None:
            g = add_ball(g, self.ball)
        return g.scalarized() if scalarize else g


def _err(path, node, msg, offset=0):
    m = node.start_mark
    col = m.column + 1 + offset
    if getattr(node, "style", None) in ("'", '"'):
        col += 1
    return ProblemError(path, m.line + 1, col, msg)


def _scalar(path, node, conv, what):
    if not isinstance(node, yaml.ScalarNode):
        raise _err(path, node, f"{what}: expected a scalar")
    try:
        return conv(node.value)
    except (ValueError, ZeroDivisionError):
        raise _err(path, node, f"{what}: cannot read {node.value!r}") from None


def _poly_text(path, node, nvars, matrix, what):
    if not isinstance(node, yaml.ScalarNode):
        raise _err(path, node, f"{what}: expected a polynomial string")
    try:
        return parse_matrix(node.value, nvars) if matrix else parse_poly(node.value, nvars)
    except ParseError as exc:
        off = exc.offset if "\n" not in node.value[: exc.offset] else 0
        raise _err(path, node, f"{what}: {exc.args[0] if exc.args else exc}", off) from None


def _seq(path, node, what):
    if not isinstance(node, yaml.SequenceNode):
        raise _err(path, node, f"{what}: expected a list")
    return node.value


def load_problem(path) -> Problem:
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
        root = yaml.compose(text)
    except OSError as exc:
        raise ProblemError(path, 0, 0, str(exc)) from None
    except yaml.YAMLError as exc:
        m = getattr(exc, "problem_mark", None)
        raise ProblemError(path, m.line + 1 if m else 0, m.column + 1 if m else 0,
                           getattr(exc, "problem", None) or str(exc)) from None
    if not isinstance(root, yaml.MappingNode):
        raise ProblemError(path, 1, 1, "problem file must be a mapping")
    nodes = {}
    for knode, vnode in root.value:
        key = knode.value
        if key not in _KEYS:
            raise _err(path, knode, f"unknown key {key!r}")
        if key in nodes:
            raise _err(path, knode, f"duplicate key {key!r}")
        nodes[key] = (knode, vnode)
    for req in ("nvars", "F"):
        if req not in nodes:
            raise ProblemError(path, 1, 1, f"missing required key {req!r}")
    nvars = _scalar(path, nodes["nvars"][1], int, "nvars")
    if nvars < 1:
        raise _err(path, nodes["nvars"][1], "nvars must be >= 1")
    F = _poly_text(path, nodes["F"][1], nvars, True, "F")
    if not F.symmetric:
        raise _err(path, nodes["F"][1], "F must be symmetric")
    prob = Problem(path, nvars, F)
    if "kind" in nodes:
        prob.kind = _scalar(path, nodes["kind"][1], str, "kind")
        if prob.kind not in C.KINDS:
            raise _err(path, nodes["kind"][1], f"unknown kind {prob.kind!r}")
    if "scalar_gens" in nodes:
        prob.scalar_gens = [_poly_text(path, n, nvars, False, "scalar_gens")
                            for n in _seq(path, nodes["scalar_gens"][1], "scalar_gens")]
    if "matrix_gens" in nodes:
        for n in _seq(path, nodes["matrix_gens"][1], "matrix_gens"):
            G = _poly_text(path, n, nvars, True, "matrix_gens")
            if not G.symmetric:
                raise _err(path, n, "matrix generator must be symmetric")
            prob.matrix_gens.append(G)
    frac = lambda s: Fraction(s.strip())
    for key, attr, conv in (("eps", "eps", frac), ("lambda", "lam", frac), ("ball", "ball", frac),
                            ("D", "D", int), ("N_min", "N_min", int), ("N_max", "N_max", int),
                            ("seed", "seed", int), ("tol_r", "tol_r", float), ("tol_e", "tol_e", float),
                            ("max_iter", "max_iter", int), ("count", "count", int)):
        if key in nodes:
            setattr(prob, attr, _scalar(path, nodes[key][1], conv, key))
    if "box" in nodes:
        items = _seq(path, nodes["box"][1], "box")
        if len(items) != 2:
            raise _err(path, nodes["box"][1], "box: expected [lo, hi]")
        lo, hi = (_scalar(path, n, float, "box") for n in items)
        if not lo < hi:
            raise _err(path, nodes["box"][1], "box: need lo < hi")
        prob.box = (lo, hi)
    if prob.D < 0 or prob.D % 2:
        raise _err(path, nodes["D"][1], "D must be a nonnegative even integer")
    return prob


def _default_seed():
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            print(f"warning: ignoring non-integer {SEED_ENV}={env!r}", file=sys.stderr)
    return DEFAULT_SEED


def _apply_flags(prob: Problem, args):
    for attr in ("kind", "D", "N_min", "N_max", "seed", "tol_r", "tol_e", "max_iter"):
        v = getattr(args, attr, None)
        if v is not None:
            setattr(prob, attr, v)
    if getattr(args, "eps", None) is not None:
        prob.eps = Fraction(args.eps)
    if getattr(args, "lam", None) is not None:
        prob.lam = Fraction(args.lam)
    if prob.seed is None:
        prob.seed = _default_seed()


def _n_range(prob: Problem):
    if prob.N_min is None and prob.N_max is None:
        return None
    F = prob.F
    if prob.kind in C._HOMOG_BASE:
        F = F.homogenize()
    lo, hi = C._default_range(prob.kind if prob.kind not in C._HOMOG_BASE else C._HOMOG_BASE[prob.kind],
                              F, prob.D)
    return (lo if prob.N_min is None else prob.N_min, hi if prob.N_max is None else prob.N_max)


def cmd_certify(args) -> int:
    try:
        prob = load_problem(args.problem)
    except ProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    _apply_flags(prob, args)
    out = args.out or str(Path(args.problem).with_suffix(".cert"))
    tol = C.Tolerances(prob.tol_r, prob.tol_e, prob.max_iter)
    if args.schedule is not None:
        tol.schedule = tuple(args.schedule)
    try:
        cert = C.run(prob.kind, prob.F, prob.generators(), prob.D, _n_range(prob), prob.eps, prob.lam,
                     tol, prob.seed, on_attempt=lambda a: print(a.line()))
    except C.CertificationFailed as exc:
        print(f"no certificate: {exc}")
        return EXIT_INFEASIBLE if exc.all_infeasible else EXIT_INCONCLUSIVE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    write_certificate(cert, out)
    print(f"{cert.status} certificate ({cert.kind}, N={cert.N}) written to {out}")
    return EXIT_OK if cert.status == "exact" else EXIT_NUMERIC


def cmd_verify(args) -> int:
    try:
        prob = load_problem(args.problem)
        cert = read_certificate(args.certificate)
    except (ProblemError, CertificateFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if cert.nvars != prob.nvars or cert.t != prob.F.size:
        print("error: certificate and problem disagree on nvars or matrix size", file=sys.stderr)
        return EXIT_PARSE
    eps = Fraction(cert.provenance["eps"]) if "eps" in cert.provenance else prob.eps
    lam = Fraction(cert.provenance["lambda"]) if "lambda" in cert.provenance else prob.lam
    D = int(cert.provenance.get("D", prob.D))
    try:
        target = C.build_target(cert.kind, prob.F, prob.generators(), cert.N, D, eps, lam)
        report = verify_certificate(target.lhs, cert, target.cone.weights)
    except (MalformedCertificate, ValueError) as exc:
        print(f"malformed certificate: {exc}", file=sys.stderr)
        return EXIT_PARSE
    print(report.summary())
    for k, piv in enumerate(report.pivots):
        neg = sum(1 for p in piv if p < 0)
        zero = sum(1 for p in piv if p == 0)
        print(f"block {k}: {len(piv)} pivots, {zero} zero, {neg} negative, min {min(piv) if piv else 0}")
    return EXIT_OK if report.exact else EXIT_NUMERIC


def cmd_sample_check(args) -> int:
    try:
        prob = load_problem(args.problem)
    except ProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    _apply_flags(prob, args)
    count = args.count or prob.count
    box = tuple(args.box) if args.box else prob.box
    res = sample_K(prob.generators(scalarize=False), count, box, seed=prob.seed)
    print(f"sampled {len(res)} points in {res.attempts} attempts "
          f"(acceptance {res.acceptance_rate:.3f}, seed {res.seed})")
    if res.status != "ok":
        print("possibly empty K in box")
        return EXIT_EMPTY
    vals = prob.F.to_float().evaluate_many(res.points)
    eig = np.linalg.eigvalsh(vals)[:, 0]
    i = int(np.argmin(eig))
    print(f"min eigmin(F(x)) = {eig[i]:.9g} at x = {np.array2string(res.points[i], precision=6)}")
    return EXIT_OK if eig[i] >= -args.tol else EXIT_NUMERIC


def cmd_homogenize(args) -> int:
    try:
        prob = load_problem(args.problem)
    except ProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    names = default_names(prob.nvars + 1, with_x0=True)
    print(f"F = {prob.F.homogenize().to_str(names)}")
    for g in prob.scalar_gens:
        print(f"scalar gen: {g.homogenize().to_str(names)}")
    for G in prob.matrix_gens:
        print(f"matrix gen: {G.homogenize().to_str(names)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pmcert", description=__doc__.split("\n")[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter,
                                 epilog=__doc__.split("\n", 1)[1])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, help=f"sampling seed (default: ${SEED_ENV} or {DEFAULT_SEED})")

    p = sub.add_parser("certify", help="search for a certificate and write it")
    p.add_argument("problem")
    p.add_argument("-o", "--out", help="certificate path (default: problem path with .cert)")
    p.add_argument("--kind", choices=C.KINDS)
    p.add_argument("--D", type=int)
    p.add_argument("--N-min", dest="N_min", type=int)
    p.add_argument("--N-max", dest="N_max", type=int)
    p.add_argument("--eps")
    p.add_argument("--lambda", dest="lam")
    p.add_argument("--tol-r", dest="tol_r", type=float)
    p.add_argument("--tol-e", dest="tol_e", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--schedule", type=int, nargs="*", metavar="DEN",
                   help="rounding denominators (none: skip rounding, keep the float certificate)")
    common(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("verify", help="check a certificate file exactly against a problem")
    p.add_argument("certificate")
    p.add_argument("problem")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sample-check", help="sample K and report the smallest eigenvalue of F")
    p.add_argument("problem")
    p.add_argument("--count", type=int)
    p.add_argument("--box", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--tol", type=float, default=1e-9)
    common(p)
    p.set_defaults(func=cmd_sample_check)

    p = sub.add_parser("homogenize", help="print homogenized F and generators")
    p.add_argument("problem")
    p.set_defaults(func=cmd_homogenize)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
