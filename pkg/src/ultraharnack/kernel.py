"""Closed-form fundamental solutions of the Kolmogorov equation

    u_t = sum_{i<=n} u_{x_i x_i} + sum_{i<=k} x_i u_{x_{n+i}}

on R^{n+k} x (0, T), together with their log-derivatives.

Coordinates are ordered ``x = (x_1..x_n, x_{n+1}..x_{n+k})``: the first ``n``
are diffusive, the first ``k`` of those drive the transported coordinates
``x_{n+1}..x_{n+k}``.  All evaluation happens in the log domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonpositiveTime, PoleNotInPast, UltraHarnackError

#: Below this time lag the 1/t^3 terms overflow in double precision.
MIN_TIME = 1e-12


@dataclass(frozen=True)
class Problem:
    """Dimensions ``(n, k)`` of the equation, ``1 <= k <= n``."""

    n: int
    k: int

    def __post_init__(self):
        if int(self.n) != self.n or int(self.k) != self.k:
            raise UltraHarnackError(f"n and k must be integers, got {self.n!r}, {self.k!r}")
        if not 1 <= self.k <= self.n:
            raise UltraHarnackError(f"need 1 <= k <= n, got n={self.n}, k={self.k}")

    @property
    def N(self) -> int:
        return self.n + self.k

    @property
    def homogeneity(self) -> float:
        """The exponent (n + 3k)/2 of t in the kernel prefactor."""
        return 0.5 * (self.n + 3 * self.k)


@dataclass(frozen=True)
class KernelJet:
    """Value, gradient and Hessian (in x) of log Gamma at one space-time point."""

    log_value: float
    grad: np.ndarray
    hess: np.ndarray


def _check_lag(s):
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise PoleNotInPast("evaluation time must be strictly after the pole time")
    if np.any(s < MIN_TIME):
        raise NonpositiveTime(f"time lag below {MIN_TIME:g} is not supported")
    return s


def _as_point(problem: Problem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.N,):
        raise UltraHarnackError(f"expected a point of length {problem.N}, got shape {x.shape}")
    return x


def normalization_constant(problem: Problem) -> float:
    """Constant C making the kernel a probability density in x.

    Each transported pair contributes a Gaussian integral of 2*pi*t^2/sqrt(3),
    each purely diffusive coordinate sqrt(4*pi*t).
    """
    n, k = problem.n, problem.k
    return (math.sqrt(3.0) / (2.0 * math.pi)) ** k * (4.0 * math.pi) ** (-0.5 * (n - k))


def log_normalization_constant(problem: Problem) -> float:
    n, k = problem.n, problem.k
    return k * (0.5 * math.log(3.0) - math.log(2.0 * math.pi)) - 0.5 * (n - k) * math.log(4.0 * math.pi)


def _split(problem: Problem, x, xi, s):
    """Diffusive offsets d_i (i<=n) and transported offsets w_i (i<=k)."""
    n, k = problem.n, problem.k
    d = x[..., :n] - xi[..., :n]
    w = x[..., n:] - xi[..., n:] + 0.5 * (x[..., :k] + xi[..., :k]) * s[..., None]
    return d, w


def log_kernel_jets(problem: Problem, x, t: float, xis, taus):
    """Log-jets of Gamma(x, t; xi_j, tau_j) for a batch of poles.

    Parameters
    ----------
    problem : Problem
    x : array_like, shape (N,)
    t : float
    xis : array_like, shape (m, N)
    taus : array_like, shape (m,)

    Returns
    -------
    log_values : ndarray, shape (m,)
    grads : ndarray, shape (m, N)
    hessians : ndarray, shape (m, N, N)
    """
    n, k, N = problem.n, problem.k, problem.N
    x = _as_point(problem, x)
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    s = _check_lag(float(t) - np.atleast_1d(np.asarray(taus, dtype=float)))
    d, w = _split(problem, x, xis, s)

    sc = s[:, None]
    log_values = (
        log_normalization_constant(problem)
        - problem.homogeneity * np.log(s)
        - np.sum(d**2, axis=1) / (4.0 * s)
        - 3.0 * np.sum(w**2, axis=1) / s**3
    )

    grads = np.empty((len(s), N))
    grads[:, :n] = -d / (2.0 * sc)
    grads[:, :k] -= 3.0 * w / sc**2
    grads[:, n:] = -6.0 * w / sc**3

    hessians = np.zeros((len(s), N, N))
    hessians[:, :, :] = hessian_pattern(problem, s)
    return log_values, grads, hessians


def hessian_pattern(problem: Problem, s) -> np.ndarray:
    """Hessian of log Gamma for lag(s) ``s``; shape (N, N) or (m, N, N)."""
    n, k, N = problem.n, problem.k, problem.N
    s = np.asarray(s, dtype=float)
    H = np.zeros(s.shape + (N, N))
    idx = np.arange(k)
    diag = np.arange(k, n)
    H[..., idx, idx] = (-2.0 / s)[..., None]
    H[..., diag, diag] = (-0.5 / s)[..., None]
    H[..., n + idx, n + idx] = (-6.0 / s**3)[..., None]
    H[..., idx, n + idx] = (-3.0 / s**2)[..., None]
    H[..., n + idx, idx] = (-3.0 / s**2)[..., None]
    return H


def log_kernel_jet(problem: Problem, x, t: float, xi=None, tau: float = 0.0) -> KernelJet:
    """Log-jet of Gamma(x, t; xi, tau); the pole defaults to the origin."""
    if xi is None:
        xi = np.zeros(problem.N)
    xi = _as_point(problem, xi)
    lv, g, H = log_kernel_jets(problem, x, t, xi[None, :], [tau])
    return KernelJet(float(lv[0]), g[0], H[0])


def hessian_log_f(problem: Problem, t: float) -> np.ndarray:
    """Hessian of log f, f the fundamental solution with pole at the origin."""
    if not t >= MIN_TIME:
        raise NonpositiveTime(f"t must be >= {MIN_TIME:g}, got {t!r}")
    return hessian_pattern(problem, float(t))


def log_kernel(problem: Problem, x, t: float, xi=None, tau: float = 0.0) -> float:
    return log_kernel_jet(problem, x, t, xi, tau).log_value


def kernel(problem: Problem, x, t: float, xi=None, tau: float = 0.0) -> float:
    """Gamma itself; zero for ``t <= tau`` as for a fundamental solution."""
    if t <= tau:
        return 0.0
    return math.exp(log_kernel(problem, x, t, xi, tau))


def log_f_expanded(problem: Problem, x, t: float) -> float:
    """log f from the expanded (not completed-square) exponent.

    Only used to cross-check :func:`log_kernel`; not numerically preferable.
    """
    n, k = problem.n, problem.k
    x = _as_point(problem, x)
    if not t >= MIN_TIME:
        raise NonpositiveTime(f"t must be >= {MIN_TIME:g}")
    expo = (
        -(np.sum(x[:k] ** 2) + 0.25 * np.sum(x[k:n] ** 2)) / t
        - 3.0 * np.sum(x[:k] * x[n:]) / t**2
        - 3.0 * np.sum(x[n:] ** 2) / t**3
    )
    return log_normalization_constant(problem) - problem.homogeneity * math.log(t) + expo


def log_time_derivative(problem: Problem, x, t: float, xi=None, tau: float = 0.0) -> float:
    """d/dt of log Gamma at fixed x and pole."""
    x = _as_point(problem, x)
    xi = np.zeros(problem.N) if xi is None else _as_point(problem, xi)
    s = float(_check_lag(t - tau))
    d, w = _split(problem, x, xi, np.asarray(s))
    k = problem.k
    return float(
        -problem.homogeneity / s
        + np.sum(d**2) / (4.0 * s**2)
        + 9.0 * np.sum(w**2) / s**4
        - 3.0 * np.sum(w * (x[:k] + xi[:k])) / s**3
    )


def pde_residual_analytic(problem: Problem, x, t: float, xi=None, tau: float = 0.0) -> float:
    """Residual Gamma_t - sum Gamma_{x_i x_i} - sum x_i Gamma_{x_{n+i}}.

    Built from closed-form derivatives: Gamma_t = Gamma l_t,
    Gamma_{x_i x_i} = Gamma (l_{x_i x_i} + l_{x_i}^2), Gamma_{x_j} = Gamma l_{x_j}.
    """
    n, k = problem.n, problem.k
    x = _as_point(problem, x)
    jet = log_kernel_jet(problem, x, t, xi, tau)
    lt = log_time_derivative(problem, x, t, xi, tau)
    g, H = jet.grad, jet.hess
    rest = np.sum(np.diag(H)[:n] + g[:n] ** 2) + np.sum(x[:k] * g[n:])
    return math.exp(jet.log_value) * (lt - rest)


def log_kernel_values(problem: Problem, X, t: float, xi=None, tau: float = 0.0) -> np.ndarray:
    """log Gamma at many points; ``X`` has shape (..., N)."""
    X = np.asarray(X, dtype=float)
    xi = np.zeros(problem.N) if xi is None else _as_point(problem, xi)
    s = _check_lag(t - tau)
    d, w = _split(problem, X, xi, np.asarray(s))
    return (
        log_normalization_constant(problem)
        - problem.homogeneity * np.log(s)
        - np.sum(d**2, axis=-1) / (4.0 * s)
        - 3.0 * np.sum(w**2, axis=-1) / s**3
    )
