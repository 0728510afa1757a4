"""
Checking the matrix estimate on random positive solutions
=========================================================

Build positive solutions as weighted sums of shifted kernels and check that
H(log u) - H(log f) is positive semidefinite wherever u is defined.
"""
import numpy as np

from ultraharnack import MixtureSolution, Problem, harnack_report, random_sweep

problem = Problem(2, 1)
sol = MixtureSolution(
    problem,
    xis=[[0.5, -1.0, 0.2], [-1.0, 0.0, 1.0]],
    taus=[-0.3, 0.0],
    log_weights=[np.log(2.0), -1.0],
)

rep = harnack_report(sol, [0.1, 0.4, -0.3], 0.7)
print("eigenvalues of M:", np.round(rep.eigenvalues, 6))
print("trace defects:", rep.trace_defect_partial, rep.trace_defect_full)

# equality for the kernel itself
f = MixtureSolution.single(problem)
print("M for u = f:\n", harnack_report(f, [1.0, 2.0, 3.0], 0.4).M)

# a thousand random mixtures and points, reproducible from the seed
summary = random_sweep(1000, seed=7)
print("violations:", len(summary["violations"]))
print("smallest eigenvalue relative to scale:", summary["min_eig_relative"])

# a pole in the future is outside the admissible class and breaks the estimate
late = MixtureSolution.single(Problem(1, 1), tau=0.04)
print("future pole, min eigenvalue at t = 0.06:", harnack_report(late, [0.0, 0.5], 0.06).min_eigenvalue)
