"""A 2x2 matrix that is positive definite on [0, 1], certified two ways.

    F(x) = [[1 + x, x], [x, 2 - x]],   K = {x >= 0, 1 - x >= 0}

First as a weighted SOS matrix with weights {1, x, 1 - x}, then in the
semiring form where every weight is a product of the generators.
"""
from pmcert import certify
from pmcert.certificate import dumps
from pmcert.polycore import parse_matrix, parse_poly

F = parse_matrix("[[1 + x1, x1], [x1, 2 - x1]]", 1)
gens = [parse_poly("x1", 1), parse_poly("1 - x1", 1)]

for driver in (certify.scherer_hol, certify.handelman):
    cert = driver(F, gens, D=2)
    print(f"--- {driver.__name__}: {cert.status}, {len(cert.blocks)} blocks")
    for blk in cert.blocks:
        print(f"  weight {blk.weight}: Gram {blk.Q.shape[0]}x{blk.Q.shape[0]}")

print()
print(dumps(cert, include_timestamp=False))
