"""
From the matrix estimate to a two-point inequality
==================================================

Integrating the estimate along the optimal path gives
u(q, t2) >= (t1/t2)^{(n+3k)/2} exp(-A/4) u(p, t1), with A the minimal action.
"""
import numpy as np

from ultraharnack import MixtureSolution, Problem, action_closed_form, optimal_path, two_point_check
from ultraharnack.path import minimize_action_numeric

problem = Problem(1, 1)

# p = (0, 0) to q = (1, 0) in unit time: the x path dips so y returns to 0
plan = optimal_path(problem, [0, 0], 0.0, [1, 0], 1.0)
t = np.linspace(0, 1, 5)
print("x(t):", plan.diffusive(t)[:, 0])
print("closed-form action:", action_closed_form(problem, [0, 0], 0.0, [1, 0], 1.0))
print("discrete minimum  :", minimize_action_numeric(problem, [0, 0], 0.0, [1, 0], 1.0).action)

# for u = f the bound becomes sharp as t1 shrinks
f = MixtureSolution.single(problem)
for t1 in (1e-1, 1e-2, 1e-3):
    print(f"t1 = {t1:g}: bound / actual = {two_point_check(f, [0, 0], t1, [0.5, 0], 1.0).ratio:.6f}")
