"""
The fundamental solution and its log-Hessian
============================================

Evaluate the kernel of u_t = sum u_{x_i x_i} + sum x_i u_{x_{n+i}} and look
at the Hessian of its logarithm, which does not depend on x.
"""
import numpy as np

from ultraharnack import Problem, hessian_log_f, kernel, log_kernel_jet

problem = Problem(1, 1)

# value at the origin after unit time
print("f(0, 1) =", kernel(problem, [0.0, 0.0], 1.0))

# the log-Hessian is the same matrix at every point
for x in ([0.0, 0.0], [1.5, -2.0]):
    jet = log_kernel_jet(problem, x, 1.0)
    print("x =", x, "\n", jet.hess)

# its entries scale like 1/t, 1/t^2 and 1/t^3
for t in (0.1, 1.0, 10.0):
    print(f"t = {t:5}:", np.round(hessian_log_f(problem, t).ravel(), 6))

# the transport variable spreads like t^{3/2}: compare the profile in y
ys = np.linspace(-3, 3, 7)
print("f(0, y, 1):", np.round([kernel(problem, [0.0, y], 1.0) for y in ys], 5))
