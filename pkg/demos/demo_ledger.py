"""
Numerical checks behind the perturbation argument
=================================================

The 3x3 integer matrix C0 governs the small-sigma behaviour of the quartic F.
"""
from ultraharnack.proof_ledger import (
    c0_determinant,
    c0_matrix,
    c0_spectrum,
    choose_eigenvector,
    f_leading_coefficient,
    ledger_report,
    richardson_leading,
)

print("C0 =\n", c0_matrix())
print("det C0 =", c0_determinant())
print("eigenvalues:", c0_spectrum()[0])
lam, v = choose_eigenvector()
print("F / sigma^2 -> ", f_leading_coefficient(v), "Richardson:", richardson_leading(v))

rep = ledger_report(trials=200, eq23_points=5)
print("identity error:", rep["identity_max_err"], " residual:", rep["eq23_residual_max"])
