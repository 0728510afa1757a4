"""Positive solutions built from kernels, and their stable log-derivatives.

A solution is ``u = sum_j w_j Gamma(., .; xi_j, tau_j) + eps * P`` where ``P`` is
the caloric polynomial below.  Log-derivatives are formed from per-component
log-jets through responsibilities ``pi_j = softmax(log w_j + log Gamma_j)``::

    grad log u = sum_j pi_j g_j
    H(log u)   = sum_j pi_j H_j + sum_j pi_j (g_j - m)(g_j - m)^T,   m = grad log u

so nothing is ever exponentiated before normalisation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import (
    EmptySolution,
    InvalidInput,
    NonpositiveTime,
    OutOfDomain,
)
from .kernel import Problem, _as_point, log_kernel_jets, log_kernel_values


def caloric_polynomial(problem: Problem, x, t: float):
    """The polynomial solution used to perturb u at spatial infinity.

    ``P = t^2 sum_{i<=k} x_i^2 + |x|^2 + 2t (sum_{i<=k} x_i x_{n+i} + n) + (2k/3) t^3``

    Returns ``(value, grad, hess)`` with exact space derivatives.
    """
    n, k, N = problem.n, problem.k, problem.N
    x = _as_point(problem, x)
    if not t > 0:
        raise NonpositiveTime(f"t must be positive, got {t!r}")
    a, y = x[:k], x[n:]
    value = (
        t**2 * np.sum(a**2)
        + np.sum(x**2)
        + 2.0 * t * (np.sum(a * y) + n)
        + (2.0 * k / 3.0) * t**3
    )
    grad = 2.0 * x
    grad[:k] += 2.0 * t**2 * a + 2.0 * t * y
    grad[n:] += 2.0 * t * a
    hess = 2.0 * np.eye(N)
    idx = np.arange(k)
    hess[idx, idx] += 2.0 * t**2
    hess[idx, n + idx] = 2.0 * t
    hess[n + idx, idx] = 2.0 * t
    return float(value), grad, hess


def caloric_polynomial_dt(problem: Problem, x, t: float) -> float:
    n, k = problem.n, problem.k
    x = _as_point(problem, x)
    return float(2.0 * t * np.sum(x[:k] ** 2) + 2.0 * (np.sum(x[:k] * x[n:]) + n) + 2.0 * k * t**2)


@dataclass(frozen=True)
class SolutionJet:
    u: float
    grad_u: np.ndarray
    hess_u: np.ndarray
    log_u: float
    grad_log: np.ndarray
    hess_log: np.ndarray
    responsibilities: np.ndarray = field(repr=False, default=None)


def combine_log_jets(log_terms, grads, hessians):
    """Log-sum-exp combination of component log-jets.

    ``log_terms[j]`` is the log of the j-th (positive) summand, ``grads`` and
    ``hessians`` its log-gradient and log-Hessian.  Returns
    ``(log_u, grad_log, hess_log, responsibilities)``.
    """
    log_terms = np.asarray(log_terms, dtype=float)
    log_u = float(logsumexp(log_terms))
    pi = np.exp(log_terms - log_u)
    pi /= pi.sum()
    m = pi @ grads
    centred = grads - m
    hess = np.einsum("j,jab->ab", pi, hessians) + np.einsum("j,ja,jb->ab", pi, centred, centred)
    hess = 0.5 * (hess + hess.T)
    return log_u, m, hess, pi


@dataclass(frozen=True)
class MixtureSolution:
    """Immutable positive solution ``sum_j w_j Gamma_j + epsilon * P``.

    Weights are stored as logs so that weights spanning hundreds of orders of
    magnitude are representable.  The time domain is the open interval
    ``(t_min, t_max)``; by default ``t_min`` is the latest pole time (or 0 when
    ``epsilon > 0`` and that is later).
    """

    problem: Problem
    xis: np.ndarray
    taus: np.ndarray
    log_weights: np.ndarray
    epsilon: float = 0.0
    t_domain: tuple = None

    def __post_init__(self):
        N = self.problem.N
        xis = np.asarray(self.xis, dtype=float).reshape(-1, N)
        taus = np.asarray(self.taus, dtype=float).reshape(-1)
        lw = np.asarray(self.log_weights, dtype=float).reshape(-1)
        if not (len(xis) == len(taus) == len(lw)):
            raise InvalidInput("poles, times and weights must have equal length")
        if not (np.all(np.isfinite(xis)) and np.all(np.isfinite(taus)) and np.all(np.isfinite(lw))):
            raise InvalidInput("non-finite pole data")
        eps = float(self.epsilon)
        if not (math.isfinite(eps) and eps >= 0):
            raise InvalidInput(f"epsilon must be finite and >= 0, got {eps!r}")
        if len(lw) == 0 and eps == 0:
            raise EmptySolution("mixture has no components and epsilon = 0")

        latest = taus.max() if len(taus) else -np.inf
        if self.t_domain is None:
            t_min = float(latest)
            if eps > 0:
                t_min = max(t_min, 0.0)
            dom = (t_min, math.inf)
        else:
            dom = (float(self.t_domain[0]), float(self.t_domain[1]))
            if not dom[0] < dom[1]:
                raise InvalidInput(f"empty time domain {dom}")
            if len(taus) and not latest <= dom[0]:
                raise InvalidInput("every pole time must precede the time domain")
            if eps > 0 and dom[0] < 0:
                raise InvalidInput("with epsilon > 0 the time domain must lie in t > 0")
        for name, value in (("xis", xis), ("taus", taus), ("log_weights", lw)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "t_domain", dom)

    @classmethod
    def from_weights(cls, problem, xis, taus, weights, epsilon=0.0, t_domain=None):
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if np.any(~np.isfinite(weights)) or np.any(weights <= 0):
            raise InvalidInput("weights must be finite and positive")
        return cls(problem, xis, taus, np.log(weights), epsilon, t_domain)

    @classmethod
    def single(cls, problem, xi=None, tau=0.0, weight=1.0):
        """One kernel; with the default pole this is f itself."""
        xi = np.zeros(problem.N) if xi is None else xi
        return cls.from_weights(problem, [xi], [tau], [weight])

    @property
    def n_components(self) -> int:
        return len(self.taus)

    def scaled(self, factor: float) -> "MixtureSolution":
        """Same solution times a positive constant."""
        return MixtureSolution(
            self.problem, self.xis, self.taus, self.log_weights + math.log(factor),
            self.epsilon * factor, self.t_domain,
        )

    def contains_time(self, t: float) -> bool:
        lo, hi = self.t_domain
        return lo < t < hi and (self.epsilon == 0 or t > 0)

    def _check_time(self, t):
        if not self.contains_time(t):
            raise OutOfDomain(f"t={t!r} is outside the solution domain {self.t_domain}")

    def log_u(self, x, t: float) -> float:
        return self.jet(x, t).log_u

    def u(self, x, t: float) -> float:
        return math.exp(self.log_u(x, t))

    def jet(self, x, t: float) -> SolutionJet:
        return solution_jet(self, x, t)

    def to_dict(self) -> dict:
        d = {
            "n": self.problem.n,
            "k": self.problem.k,
            "poles": [
                {"xi": xi.tolist(), "tau": float(tau), "log_weight": float(lw)}
                for xi, tau, lw in zip(self.xis, self.taus, self.log_weights)
            ],
            "epsilon": self.epsilon,
        }
        if math.isfinite(self.t_domain[1]):
            d["t_domain"] = list(self.t_domain)
        return d


def solution_jet(sol: MixtureSolution, x, t: float) -> SolutionJet:
    """Value and log-derivatives (up to second order in x) of ``sol`` at (x, t)."""
    sol._check_time(t)
    problem = sol.problem
    x = _as_point(problem, x)
    N = problem.N

    parts_lv, parts_g, parts_H = [], [], []
    if sol.n_components:
        lv, g, H = log_kernel_jets(problem, x, t, sol.xis, sol.taus)
        parts_lv.append(lv + sol.log_weights)
        parts_g.append(g)
        parts_H.append(H)
    if sol.epsilon > 0:
        P, dP, HP = caloric_polynomial(problem, x, t)
        gP = dP / P
        parts_lv.append([math.log(sol.epsilon) + math.log(P)])
        parts_g.append(gP[None, :])
        parts_H.append((HP / P - np.outer(gP, gP))[None, :, :])

    log_u, grad_log, hess_log, pi = combine_log_jets(
        np.concatenate(parts_lv), np.concatenate(parts_g).reshape(-1, N),
        np.concatenate(parts_H).reshape(-1, N, N),
    )
    u = math.exp(log_u)
    grad_u = u * grad_log
    hess_u = u * (hess_log + np.outer(grad_log, grad_log))
    return SolutionJet(u, grad_u, hess_u, log_u, grad_log, hess_log, pi)


def log_u_values(sol: MixtureSolution, X, t: float) -> np.ndarray:
    """log u at many points ``X`` of shape (..., N); values only."""
    sol._check_time(t)
    problem = sol.problem
    X = np.asarray(X, dtype=float)
    terms = [
        lw + log_kernel_values(problem, X, t, xi, tau)
        for xi, tau, lw in zip(sol.xis, sol.taus, sol.log_weights)
    ]
    if sol.epsilon > 0:
        n, k = problem.n, problem.k
        a, y = X[..., :k], X[..., n:]
        P = (
            t**2 * np.sum(a**2, axis=-1) + np.sum(X**2, axis=-1)
            + 2.0 * t * (np.sum(a * y, axis=-1) + n) + (2.0 * k / 3.0) * t**3
        )
        terms.append(math.log(sol.epsilon) + np.log(P))
    return logsumexp(np.stack(terms), axis=0)


def _time_step(sol: MixtureSolution, t: float) -> float:
    h = 1e-5 * t
    lo, hi = sol.t_domain
    if sol.epsilon > 0:
        lo = max(lo, 0.0)
    room = min(t - lo, hi - t)
    return min(h, 0.5 * room)


def pde_residual_mixture(sol: MixtureSolution, x, t: float) -> float:
    """Residual of the log equation l_t = sum(l_ii + l_i^2) + sum x_i l_{n+i}.

    ``l_t`` comes from central differencing of log u in time, independent of
    the analytic time derivatives in :mod:`ultraharnack.kernel`.
    """
    problem = sol.problem
    n, k = problem.n, problem.k
    x = _as_point(problem, x)
    jet = solution_jet(sol, x, t)
    h = _time_step(sol, t)
    if h <= 0:
        raise OutOfDomain("no room for a time difference inside the domain")
    lt = (sol.log_u(x, t + h) - sol.log_u(x, t - h)) / (2.0 * h)
    g, H = jet.grad_log, jet.hess_log
    return float(lt - np.sum(np.diag(H)[:n] + g[:n] ** 2) - np.sum(x[:k] * g[n:]))


# --- JSON mixture files -------------------------------------------------------

def _reject_constant(name):
    raise InvalidInput(f"non-finite number {name} in mixture file")


def mixture_from_dict(data: dict) -> MixtureSolution:
    """Build a mixture from the JSON schema ``{"n","k","poles":[...],"epsilon"}``."""
    try:
        problem = Problem(int(data["n"]), int(data["k"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"bad problem dimensions: {exc}") from None
    poles = data.get("poles", [])
    if not isinstance(poles, list):
        raise InvalidInput("'poles' must be a list")
    xis, taus, lws = [], [], []
    for i, pole in enumerate(poles):
        try:
            xi = [float(v) for v in pole["xi"]]
            tau = float(pole.get("tau", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"pole {i}: {exc}") from None
        if len(xi) != problem.N:
            raise InvalidInput(f"pole {i}: xi has length {len(xi)}, expected {problem.N}")
        if "log_weight" in pole:
            lw = float(pole["log_weight"])
        else:
            w = float(pole.get("weight", 1.0))
            if not (math.isfinite(w) and w > 0):
                raise InvalidInput(f"pole {i}: weight must be positive, got {w!r}")
            lw = math.log(w)
        if not all(math.isfinite(v) for v in [*xi, tau, lw]):
            raise InvalidInput(f"pole {i}: non-finite value")
        xis.append(xi)
        taus.append(tau)
        lws.append(lw)
    eps = data.get("epsilon", 0.0)
    try:
        eps = float(eps)
    except (TypeError, ValueError):
        raise InvalidInput(f"bad epsilon {eps!r}") from None
    dom = data.get("t_domain")
    return MixtureSolution(
        problem, np.array(xis).reshape(-1, problem.N), np.array(taus), np.array(lws),
        eps, None if dom is None else tuple(dom),
    )


def load_mixture(path) -> MixtureSolution:
    with open(path) as fh:
        try:
            data = json.load(fh, parse_constant=_reject_constant)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise InvalidInput(f"{path}: top level must be an object")
    return mixture_from_dict(data)


def save_mixture(sol: MixtureSolution, path) -> None:
    with open(path, "w") as fh:
        json.dump(sol.to_dict(), fh, indent=2)
