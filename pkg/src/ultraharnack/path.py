"""Admissible paths and the two-point action.

An admissible path satisfies ``dx_{n+i}/dt = -x_i`` for ``i <= k``.  The
two-point bound comes from minimising ``int sum_{i<=n} (dx_i/dt)^2 dt`` over
such paths joining ``(p, t1)`` to ``(q, t2)``.  After subtracting the straight
line between the endpoints the first ``k`` components become parabolas
vanishing at both ends; the remaining ``n - k`` are straight lines.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import BadTimes, OutOfDomain, SingularKKT, UltraHarnackError
from .kernel import Problem, _as_point

GAUSS_NODES = 64


@lru_cache(maxsize=None)
def _gauss_legendre(nodes: int = GAUSS_NODES):
    return np.polynomial.legendre.leggauss(nodes)


def gauss_integrate(fn, a: float, b: float, nodes: int = GAUSS_NODES):
    """Gauss-Legendre quadrature of a vectorised ``fn`` over ``[a, b]``.

    ``fn`` maps an array of times of shape (m,) to (m,) or (m, d).
    """
    z, w = _gauss_legendre(nodes)
    half = 0.5 * (b - a)
    t = 0.5 * (a + b) + half * z
    return half * np.tensordot(w, fn(t), axes=(0, 0))


def _check_times(t1, t2):
    if not t1 < t2:
        raise BadTimes(f"need t1 < t2, got {t1!r}, {t2!r}")


def _constraint_targets(problem: Problem, p, q, dt):
    """Required value of int x_hat_i dt for i <= k."""
    n, k = problem.n, problem.k
    return -(q[n:] - p[n:]) - 0.5 * (q[:k] + p[:k]) * dt


@dataclass(frozen=True)
class PathPlan:
    """Closed-form optimal admissible path between two space-time points."""

    problem: Problem
    p: np.ndarray
    t1: float
    q: np.ndarray
    t2: float
    hat_coeffs: np.ndarray      # amplitude 6 K_i / dt^3 of (t2 - t)(t - t1), i <= k
    slopes: np.ndarray          # (q_i - p_i) / dt, i <= n
    intercepts: np.ndarray      # (p_i t2 - q_i t1) / dt, i <= n
    action: float

    @property
    def duration(self) -> float:
        return self.t2 - self.t1

    def hat(self, t) -> np.ndarray:
        """Deviation from the straight line, shape (len(t), n)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((len(t), self.problem.n))
        out[:, : self.problem.k] = np.outer((self.t2 - t) * (t - self.t1), self.hat_coeffs)
        return out

    def affine(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.outer(t, self.slopes) + self.intercepts

    def diffusive(self, t) -> np.ndarray:
        """x_1..x_n along the path, shape (len(t), n)."""
        return self.hat(t) + self.affine(t)

    def velocity(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        v = np.tile(self.slopes, (len(t), 1))
        v[:, : self.problem.k] += np.outer(self.t1 + self.t2 - 2.0 * t, self.hat_coeffs)
        return v

    def transported(self, t) -> np.ndarray:
        """x_{n+1}..x_{n+k} from integrating dx_{n+i}/dt = -x_i from t1."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = self.problem.k
        r = t - self.t1
        dt = self.duration
        p, q = self.p, self.q
        int_affine = np.outer(r, p[:k]) + np.outer(r**2 / (2.0 * dt), q[:k] - p[:k])
        int_hat = np.outer(dt * r**2 / 2.0 - r**3 / 3.0, self.hat_coeffs)
        return p[self.problem.n:] - int_affine - int_hat

    def __call__(self, t) -> np.ndarray:
        """Full state (x_1..x_{n+k}) at the given times, shape (len(t), N)."""
        return np.hstack([self.diffusive(t), self.transported(t)])

    def quadrature_action(self) -> float:
        return float(np.sum(gauss_integrate(lambda s: self.velocity(s) ** 2, self.t1, self.t2)))

    def constraint_residuals(self) -> np.ndarray:
        """int x_hat_i dt minus its required value, for i <= k."""
        k = self.problem.k
        got = gauss_integrate(lambda s: self.hat(s)[:, :k], self.t1, self.t2)
        return got - _constraint_targets(self.problem, self.p, self.q, self.duration)

    def sample(self, count: int = 101) -> np.ndarray:
        """Rows ``(t, x_1, ..., x_{n+k})`` at equally spaced times."""
        t = np.linspace(self.t1, self.t2, count)
        return np.column_stack([t, self(t)])


def action_closed_form(problem: Problem, p, t1: float, q, t2: float) -> float:
    """Minimal action ``sum (q_i-p_i)^2/dt + 12/dt^3 sum [q_{n+i}-p_{n+i} + (q_i+p_i) dt/2]^2``."""
    _check_times(t1, t2)
    p = _as_point(problem, p)
    q = _as_point(problem, q)
    n = problem.n
    dt = t2 - t1
    K = _constraint_targets(problem, p, q, dt)
    return float(np.sum((q[:n] - p[:n]) ** 2) / dt + 12.0 * np.sum(K**2) / dt**3)


def optimal_path(problem: Problem, p, t1: float, q, t2: float) -> PathPlan:
    _check_times(t1, t2)
    p = _as_point(problem, p).copy()
    q = _as_point(problem, q).copy()
    n = problem.n
    dt = t2 - t1
    K = _constraint_targets(problem, p, q, dt)
    p.setflags(write=False)
    q.setflags(write=False)
    return PathPlan(
        problem=problem,
        p=p,
        t1=float(t1),
        q=q,
        t2=float(t2),
        hat_coeffs=6.0 * K / dt**3,
        slopes=(q[:n] - p[:n]) / dt,
        intercepts=(p[:n] * t2 - q[:n] * t1) / dt,
        action=action_closed_form(problem, p, t1, q, t2),
    )


@dataclass(frozen=True)
class DiscretePath:
    action: float
    times: np.ndarray
    states: np.ndarray      # shape (steps + 1, N)


def _solve_component(steps: int, h: float, a: float, b: float, target=None):
    """Minimise sum (x_{j+1} - x_j)^2 / h with x_0 = a, x_steps = b.

    With ``target`` given, the trapezoid integral of x must equal it.
    """
    m = steps - 1
    G = (2.0 / h) * (2.0 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1))
    rhs = np.zeros(m)
    rhs[0] += 2.0 * a / h
    rhs[-1] += 2.0 * b / h
    if target is not None:
        kkt = np.zeros((m + 1, m + 1))
        kkt[:m, :m] = G
        kkt[:m, m] = kkt[m, :m] = h
        rhs = np.append(rhs, target - 0.5 * h * (a + b))
        G = kkt
    try:
        sol = scipy.linalg.solve(G, rhs, assume_a="sym", check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
        raise SingularKKT(str(exc)) from None
    if not np.all(np.isfinite(sol)):
        raise SingularKKT("non-finite KKT solution")
    return np.concatenate([[a], sol[:m], [b]])


def minimize_action_numeric(problem: Problem, p, t1: float, q, t2: float, steps: int = 1024) -> DiscretePath:
    """Independent oracle: discretised action minimised by a direct KKT solve.

    Each diffusive component is piecewise linear on ``steps`` uniform cells;
    for ``i <= k`` the trapezoid integral (exact for piecewise-linear paths) is
    pinned so that the transported coordinate lands on ``q_{n+i}``.
    """
    _check_times(t1, t2)
    if int(steps) != steps or steps < 16:
        raise UltraHarnackError(f"steps must be an integer >= 16, got {steps!r}")
    steps = int(steps)
    p = _as_point(problem, p)
    q = _as_point(problem, q)
    n, k, N = problem.n, problem.k, problem.N
    times = np.linspace(t1, t2, steps + 1)
    h = (t2 - t1) / steps
    states = np.empty((steps + 1, N))
    action = 0.0
    for i in range(n):
        target = -(q[n + i] - p[n + i]) if i < k else None
        xi = _solve_component(steps, h, p[i], q[i], target)
        states[:, i] = xi
        action += float(np.sum(np.diff(xi) ** 2) / h)
    for i in range(k):
        x = states[:, i]
        cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (x[1:] + x[:-1]))])
        states[:, n + i] = p[n + i] - cum
    return DiscretePath(action, times, states)


def integrate_harnack_along_path(sol, plan: PathPlan):
    """Both sides of the integrated inequality along ``plan``.

    ``lhs = log u(q, t2)``;
    ``rhs = log u(p, t1) - (n+3k)/2 log(t2/t1) - action / 4``.
    """
    if not (plan.t1 > 0 and sol.contains_time(plan.t1) and sol.contains_time(plan.t2)):
        raise OutOfDomain("path times must lie inside the solution domain")
    problem = sol.problem
    lhs = sol.log_u(plan.q, plan.t2)
    rhs = (
        sol.log_u(plan.p, plan.t1)
        - problem.homogeneity * math.log(plan.t2 / plan.t1)
        - 0.25 * plan.action
    )
    return lhs, rhs
