"""The Motzkin form is nonnegative but not a sum of squares.

Multiplying by x^2 + y^2 + z^2 fixes that. The N = 0 search returns a
Farkas vector that is checked in exact arithmetic; N = 1 returns an exact
rational certificate. The shifted form M + eps*sigma^3 is handled as well.
"""
from fractions import Fraction

from pmcert import certify
from pmcert.polycore import parse_matrix

M = parse_matrix("x1^4*x2^2 + x1^2*x2^4 + x3^6 - 3*x1^2*x2^2*x3^2", 3)

try:
    certify.reznick(M, N_range=(0, 0))
except certify.CertificationFailed as exc:
    a = exc.attempts[0]
    print(f"N=0: {a.status}, evidence audited: {a.evidence_valid}")

cert = certify.reznick(M, N_range=(1, 1))
print(f"N=1: {cert.status}, Gram size {cert.blocks[0].Q.shape[0]}, "
      f"rounded at denominator {cert.provenance['denom_used']}, kernel dims {cert.provenance['kernel_dims']}")

cert = certify.marshall(M, eps=Fraction(1, 100), lam=1)
print(f"shifted by sigma^3/100: {cert.status} at N={cert.N}")

dehom = parse_matrix("x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1", 2)
cert = certify.pv_nonhomog(dehom)
print(f"dehomogenized, times (1 + x^2 + y^2)^{cert.N}: {cert.status} over {cert.nvars} variables")
