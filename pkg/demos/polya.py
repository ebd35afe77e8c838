"""Positivity on the orthant with nonnegative-coefficient weights.

x^2 - xy + y^2 is positive on the closed orthant minus the origin. By hand,
(x + y)(x^2 - xy + y^2) = x^3 + y^3. The search may find that identity or a
different one, and a forced N = 1 shows the multiplied form.
"""
from pmcert import certify
from pmcert.polycore import parse_matrix, parse_poly

F = parse_matrix("x1^2 - x1*x2 + x2^2", 2)
print("hand identity holds:",
      parse_poly("(x1 + x2)*(x1^2 - x1*x2 + x2^2)", 2) == parse_poly("x1^3 + x2^3", 2))

for rng in (None, (1, 1)):
    cert = certify.polya(F, N_range=rng)
    print(f"N={cert.N}: lhs {cert.lhs[0, 0]}")
    for blk in cert.blocks:
        print(f"  weight {blk.weight}, basis {list(blk.basis)}")

try:
    certify.polya(parse_matrix("x1*x2", 2), N_range=(0, 2))
    print("x1*x2: certified")
except certify.CertificationFailed as exc:
    print("x1*x2:", "; ".join(a.line() for a in exc.attempts))
