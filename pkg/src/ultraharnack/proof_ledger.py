"""Computable ingredients of the maximum-principle proof of the matrix estimate.

The perturbed defect is ``Mt = Ht + R(t)`` where ``Ht`` stands for the Hessian
of ``log u~`` and ``R(t)`` is the reference matrix with entries
``2 alpha/t``, ``(1+sigma)/(2t)``, ``6 gamma/t^3`` on the diagonal and
``3 beta/t^2`` at ``(i, n+i)``.  The parameters are
``alpha = 1 + sigma delta0``, ``beta = 1 + sigma theta0``,
``gamma = 1 + sigma eta0`` with ``(delta0, theta0, eta0)`` a positive
eigenvector of :func:`c0_matrix`.

Everything here is algebra on explicit matrices; the contradiction argument
itself is not reproduced.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEigenvector, NonpositiveTime, NoPositiveWindow, UltraHarnackError
from .kernel import Problem

_C0 = ((-8, 10, -3), (10, -14, 5), (-3, 5, -2))


@dataclass(frozen=True)
class PerturbParams:
    sigma: float
    delta0: float = 0.0
    theta0: float = 0.0
    eta0: float = 0.0

    @property
    def alpha(self) -> float:
        return 1.0 + self.sigma * self.delta0

    @property
    def beta(self) -> float:
        return 1.0 + self.sigma * self.theta0

    @property
    def gamma(self) -> float:
        return 1.0 + self.sigma * self.eta0

    @classmethod
    def from_vector(cls, sigma: float, v) -> "PerturbParams":
        d, th, et = (float(c) for c in v)
        return cls(float(sigma), d, th, et)


def c0_matrix() -> np.ndarray:
    return np.array(_C0, dtype=float)


def c0_determinant() -> int:
    """Exact integer determinant by cofactor expansion."""
    (a, b, c), (d, e, f), (g, h, i) = _C0
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


def c0_spectrum():
    """Eigenvalues (ascending) and unit eigenvectors (columns) of C0."""
    return np.linalg.eigh(c0_matrix())


def choose_eigenvector():
    """Unit eigenvector for the positive eigenvalue of C0, with 2 theta0 >= eta0."""
    w, V = c0_spectrum()
    positive = np.flatnonzero(w > 0)
    if len(positive) != 1:
        raise DegenerateEigenvector(f"expected exactly one positive eigenvalue, got {w}")
    lam = float(w[positive[0]])
    v = V[:, positive[0]]
    if 2.0 * v[1] < v[2]:
        v = -v
    if abs(v[1]) < 1e-12 and abs(2.0 * v[1] - v[2]) < 1e-12:
        raise DegenerateEigenvector("theta0 and 2 theta0 - eta0 both vanish")
    return lam, v


def f_factors(params: PerturbParams):
    """The three factors of F, expanded in sigma to avoid cancellation.

    Returns ``(4a^2 - a - 3b, b^2 - g, 2ab - b - g)``.
    """
    s, d, th, et = params.sigma, params.delta0, params.theta0, params.eta0
    a1 = s * (7.0 * d - 3.0 * th) + 4.0 * s**2 * d**2
    b2 = s * (2.0 * th - et) + s**2 * th**2
    c3 = s * (2.0 * d + th - et) + 2.0 * s**2 * d * th
    return a1, b2, c3


def f_poly(params: PerturbParams) -> float:
    """``F = (4a^2 - a - 3b)(b^2 - g) - (2ab - b - g)^2``."""
    a1, b2, c3 = f_factors(params)
    return a1 * b2 - c3**2


def f_poly_direct(params: PerturbParams) -> float:
    """F straight from alpha, beta, gamma (loses digits for small sigma)."""
    a, b, g = params.alpha, params.beta, params.gamma
    return (4 * a * a - a - 3 * b) * (b * b - g) - (2 * a * b - b - g) ** 2


def f_leading_coefficient(v) -> float:
    """Coefficient of sigma^2 in F, i.e. v^T C0 v / 2."""
    v = np.asarray(v, dtype=float)
    return 0.5 * float(v @ c0_matrix() @ v)


def richardson_leading(v, sigmas=(1e-3, 1e-4, 1e-5)) -> float:
    """Extrapolate F/sigma^2 to sigma -> 0 from a geometric sequence of sigmas.

    ``F/sigma^2 = c2 + c3 sigma + c4 sigma^2``; with ratio r between
    consecutive sigmas, ``(g(s/r) r - g(s)) / (r - 1)`` cancels the linear term.
    """
    sig = np.asarray(sigmas, dtype=float)
    g = np.array([f_poly(PerturbParams.from_vector(s, v)) / s**2 for s in sig])
    while len(g) > 1:
        r = sig[:-1] / sig[1:]
        g = (r * g[1:] - g[:-1]) / (r - 1.0)
        sig = sig[1:]
    return float(g[0])


def sigma_window(v, resolution: int = 64, sigma_min: float = 1e-8, sigma_max: float = 1.0) -> float:
    """Largest sampled sigma1 with F > 0 at every grid point in (0, sigma1].

    Scans a geometric grid of ``resolution`` points; returns the last grid
    point if F never turns nonpositive.
    """
    if resolution < 2:
        raise UltraHarnackError("resolution must be at least 2")
    grid = np.geomspace(sigma_min, sigma_max, int(resolution))
    last = None
    for s in grid:
        if f_poly(PerturbParams.from_vector(s, v)) <= 0:
            break
        last = float(s)
    if last is None:
        raise NoPositiveWindow(f"F <= 0 already at sigma = {grid[0]:g}")
    return last


def _check_t(t):
    if not t > 0:
        raise NonpositiveTime(f"t must be positive, got {t!r}")


def reference_matrix(problem: Problem, params: PerturbParams, t: float) -> np.ndarray:
    """R(t); with sigma = 0 this is -H(log f)(t)."""
    _check_t(t)
    n, k, N = problem.n, problem.k, problem.N
    R = np.zeros((N, N))
    idx = np.arange(k)
    R[idx, idx] = 2.0 * params.alpha / t
    R[np.arange(k, n), np.arange(k, n)] = (1.0 + params.sigma) / (2.0 * t)
    R[n + idx, n + idx] = 6.0 * params.gamma / t**3
    R[idx, n + idx] = R[n + idx, idx] = 3.0 * params.beta / t**2
    return R


def reference_matrix_dt(problem: Problem, params: PerturbParams, t: float) -> np.ndarray:
    """Time derivative of :func:`reference_matrix`."""
    _check_t(t)
    n, k, N = problem.n, problem.k, problem.N
    R = np.zeros((N, N))
    idx = np.arange(k)
    R[idx, idx] = -2.0 * params.alpha / t**2
    R[np.arange(k, n), np.arange(k, n)] = -(1.0 + params.sigma) / (2.0 * t**2)
    R[n + idx, n + idx] = -18.0 * params.gamma / t**4
    R[idx, n + idx] = R[n + idx, idx] = -6.0 * params.beta / t**3
    return R


def mtilde_build(H, problem: Problem, params: PerturbParams, t: float) -> np.ndarray:
    return np.asarray(H, dtype=float) + reference_matrix(problem, params, t)


def prescribed_rows(problem: Problem, V, t: float, params: PerturbParams) -> np.ndarray:
    """The values ``H V`` must take when ``Mt V = 0``, i.e. ``-R(t) V``."""
    _check_t(t)
    n, k = problem.n, problem.k
    V = np.asarray(V, dtype=float)
    a, b, g, s = params.alpha, params.beta, params.gamma, params.sigma
    r = np.empty_like(V)
    r[:k] = -(2.0 * a / t) * V[:k] - (3.0 * b / t**2) * V[n:]
    r[k:n] = -((1.0 + s) / (2.0 * t)) * V[k:n]
    r[n:] = -(3.0 * b / t**2) * V[:k] - (6.0 * g / t**3) * V[n:]
    return r


def n_tilde_matrix(H, problem: Problem, params: PerturbParams, t: float) -> np.ndarray:
    """Assemble the reaction matrix block by block (P1..P4, N2, N3 = N2^T, N4)."""
    _check_t(t)
    H = np.asarray(H, dtype=float)
    n, k, N = problem.n, problem.k, problem.N
    a, b, g, s = params.alpha, params.beta, params.gamma, params.sigma
    Q = 2.0 * H[:, :n] @ H[:, :n].T        # 2 sum_{i<=n} l_{a i} l_{b i}, all a, b
    lo, mid, hi = slice(0, k), slice(k, n), slice(n, N)

    P1 = Q[lo, lo] + H[hi, lo] + H[hi, lo].T - (2.0 * a / t**2) * np.eye(k)
    P2 = Q[lo, mid] + H[hi, mid]
    P4 = Q[mid, mid] - ((1.0 + s) / (2.0 * t**2)) * np.eye(n - k)
    N2 = Q[:n, hi].copy()
    N2[lo, :] += H[hi, hi] - (6.0 * b / t**3) * np.eye(k)
    N4 = Q[hi, hi] - (18.0 * g / t**4) * np.eye(k)

    N1 = np.block([[P1, P2], [P2.T, P4]])
    return np.block([[N1, N2], [N2.T, N4]])


def n_form_rowwise(H, problem: Problem, params: PerturbParams, t: float, V) -> float:
    """N~(V, V) written through the rows of H (before using M~ V = 0)."""
    _check_t(t)
    n, k = problem.n, problem.k
    H = np.asarray(H, dtype=float)
    V = np.asarray(V, dtype=float)
    a, b, g, s = params.alpha, params.beta, params.gamma, params.sigma
    HV = H @ V
    return float(
        2.0 * np.sum(HV[:n] ** 2)
        + 2.0 * np.sum(V[:k] * HV[n:])
        - (2.0 * a / t**2) * np.sum(V[:k] ** 2)
        - (12.0 * b / t**3) * np.sum(V[:k] * V[n:])
        - ((1.0 + s) / (2.0 * t**2)) * np.sum(V[k:n] ** 2)
        - (18.0 * g / t**4) * np.sum(V[n:] ** 2)
    )


def n_form_closed(problem: Problem, V, t: float, params: PerturbParams) -> float:
    """N~(V, V) at a null vector V of M~, in closed form."""
    _check_t(t)
    n, k = problem.n, problem.k
    V = np.asarray(V, dtype=float)
    a1, b2, c3 = f_factors(params)
    s = params.sigma
    return float(
        2.0 * (
            a1 / t**2 * np.sum(V[:k] ** 2)
            + 6.0 * c3 / t**3 * np.sum(V[:k] * V[n:])
            + 9.0 * b2 / t**4 * np.sum(V[n:] ** 2)
        )
        + (s**2 + s) / (2.0 * t**2) * np.sum(V[k:n] ** 2)
    )


def surrogate_hessian(problem: Problem, V, t: float, params: PerturbParams, S=None) -> np.ndarray:
    """A symmetric H with ``H V = prescribed_rows(V)``.

    ``H = r v^T + v r^T - (v.r) v v^T + P S P`` with ``v = V/|V|``,
    ``r = prescribed_rows(v)`` and ``P = I - v v^T``; any symmetric ``S``.
    """
    V = np.asarray(V, dtype=float)
    N = problem.N
    norm = np.linalg.norm(V)
    if norm == 0:
        raise UltraHarnackError("V must be nonzero")
    v = V / norm
    r = prescribed_rows(problem, v, t, params)
    P = np.eye(N) - np.outer(v, v)
    S = np.zeros((N, N)) if S is None else 0.5 * (np.asarray(S) + np.asarray(S).T)
    return np.outer(r, v) + np.outer(v, r) - (v @ r) * np.outer(v, v) + P @ S @ P


def discriminant_form(params: PerturbParams) -> np.ndarray:
    """2x2 matrix of q(a, b) = A a^2 + 6 C a b + 9 B b^2 in the scaled variables
    a = |v_lo| / t, b = |v_hi| / t^2 (the k-block part of the closed form)."""
    a1, b2, c3 = f_factors(params)
    return np.array([[a1, 3.0 * c3], [3.0 * c3, 9.0 * b2]])


def leading_minors(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return np.array([np.linalg.det(M[:j, :j]) for j in range(1, M.shape[0] + 1)])


def dominant_minor_terms(problem: Problem, t: float) -> np.ndarray:
    """Leading-order size of each leading principal minor of R(t) at sigma = 0.

    For the first n minors this is the product of diagonal entries; for the
    (n+i)-th it is ``(1/2t)^i (2/t)^(k-i) (1/2t)^(n-k) (6/t^3)^i``.
    """
    n, k = problem.n, problem.k
    out = []
    diag = [2.0 / t] * k + [0.5 / t] * (n - k)
    for j in range(1, n + 1):
        out.append(float(np.prod(diag[:j])))
    for i in range(1, k + 1):
        out.append((0.5 / t) ** i * (2.0 / t) ** (k - i) * (0.5 / t) ** (n - k) * (6.0 / t**3) ** i)
    return np.array(out)


@dataclass(frozen=True)
class Claim1Scan:
    threshold: float            # largest grid t below which positivity is certified
    certified: np.ndarray       # per grid time: lambda_min(R) > N * B
    sampled_ok: np.ndarray      # per grid time: all leading minors > 0 for sampled H
    minor_ratios: np.ndarray    # leading minors of R(t) / dominant terms, per grid time


def claim1_minor_scan(problem: Problem, params: PerturbParams, t_grid, bound: float,
                      samples: int = 64, seed: int = 0) -> Claim1Scan:
    """Small-t positivity of M~ = H + R(t) for every H with max |H_ij| <= bound.

    Certificate: ``|H|_2 <= N * bound``, so ``lambda_min(R(t)) > N * bound``
    makes M~ positive definite and all its leading minors positive.  A sampled
    check over random and extreme H is reported alongside.
    """
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    N = problem.N
    rng = np.random.default_rng(seed)
    Hs = [bound * np.ones((N, N)), -bound * np.ones((N, N)), bound * np.eye(N), -bound * np.eye(N)]
    for _ in range(samples):
        A = rng.uniform(-bound, bound, size=(N, N))
        Hs.append(np.clip(0.5 * (A + A.T), -bound, bound))

    certified, sampled_ok, ratios = [], [], []
    for t in t_grid:
        R = reference_matrix(problem, params, t)
        certified.append(bool(np.linalg.eigvalsh(R)[0] > N * bound))
        sampled_ok.append(all(np.all(leading_minors(R + H) > 0) for H in Hs))
        ratios.append(leading_minors(R) / dominant_minor_terms(problem, t))
    certified = np.array(certified)
    threshold = 0.0
    for t, ok in zip(t_grid, certified):
        if not ok:
            break
        threshold = float(t)
    return Claim1Scan(threshold, certified, np.array(sampled_ok), np.array(ratios))


def eq23_residual(sol, x, t: float, params: PerturbParams, h: float = 1e-3) -> np.ndarray:
    """Entrywise residual of the evolution equation of M~ at (x, t).

    ``M~_t - sum_{i<=n}(M~_ii + 2 l_i M~_i) - sum_{i<=k} x_i M~_{n+i} - N~``
    with all derivatives of the M~ field taken by central differences of
    step ``h``; l and H come from analytic jets of ``sol``.
    """
    problem = sol.problem
    n, k, N = problem.n, problem.k, problem.N
    x = np.asarray(x, dtype=float)

    def field(y, s):
        return mtilde_build(sol.jet(y, s).hess_log, problem, params, s)

    jet = sol.jet(x, t)
    M0 = field(x, t)
    Mt = (field(x, t + h) - field(x, t - h)) / (2.0 * h)
    rhs = n_tilde_matrix(jet.hess_log, problem, params, t)
    for i in range(N):
        e = np.zeros(N)
        e[i] = h
        Mp, Mm = field(x + e, t), field(x - e, t)
        Mi = (Mp - Mm) / (2.0 * h)
        if i < n:
            rhs = rhs + (Mp - 2.0 * M0 + Mm) / h**2 + 2.0 * jet.grad_log[i] * Mi
        else:
            rhs = rhs + x[i - n] * Mi
    return Mt - rhs


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def ledger_report(sigma_resolution: int = 64, trials: int = 1000, seed: int = 0,
                  eq23_points: int = 20) -> dict:
    """Run every ledger check and collect the numbers into one JSON-able dict."""
    from .mixture import MixtureSolution

    lam, v = choose_eigenvector()
    w, _ = c0_spectrum()
    sigma1 = sigma_window(v, sigma_resolution)
    ss = np.random.SeedSequence(seed)
    streams = [np.random.default_rng(c) for c in ss.spawn(trials)]

    max_err_block = 0.0
    max_err_closed = 0.0
    for rng in streams:
        n = int(rng.integers(1, 5))
        k = int(rng.integers(1, n + 1))
        problem = Problem(n, k)
        t = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
        params = PerturbParams.from_vector(rng.uniform(0, sigma1), v)
        V = rng.normal(size=problem.N)
        A = rng.normal(size=(problem.N, problem.N))
        Hr = 0.5 * (A + A.T)
        row = n_form_rowwise(Hr, problem, params, t, V)
        blk = float(V @ n_tilde_matrix(Hr, problem, params, t) @ V)
        max_err_block = max(max_err_block, _rel(row, blk))
        Hs = surrogate_hessian(problem, V, t, params, Hr)
        row = n_form_rowwise(Hs, problem, params, t, V)
        closed = n_form_closed(problem, V, t, params)
        max_err_closed = max(max_err_closed, _rel(row, closed))

    thresholds = []
    problem = Problem(1, 1)
    grid = np.geomspace(1e-3, 1.0, 61)
    for sigma in (0.0, 0.5 * sigma1):
        params = PerturbParams.from_vector(sigma, v)
        for B in (0.1, 1.0, 10.0):
            scan = claim1_minor_scan(problem, params, grid, B)
            thresholds.append({"sigma": sigma, "bound": B, "threshold": scan.threshold})

    rng = np.random.default_rng([seed, 23])
    params = PerturbParams.from_vector(0.5 * sigma1, v)
    eq23_max = 0.0
    for _ in range(eq23_points):
        f = MixtureSolution.single(problem)
        x = rng.uniform(-1.0, 1.0, size=problem.N)
        t = float(rng.uniform(1.0, 2.0))
        eq23_max = max(eq23_max, float(np.max(np.abs(eq23_residual(f, x, t, params)))))

    return {
        "c0": {"det": c0_determinant(), "eigs": [float(e) for e in w],
               "positive_eigenvalue": lam, "eigenvector": [float(c) for c in v]},
        "leading_coefficient": f_leading_coefficient(v),
        "richardson_leading": richardson_leading(v),
        "sigma1": sigma1,
        "identity_max_err": max(max_err_block, max_err_closed),
        "block_identity_max_err": max_err_block,
        "closed_identity_max_err": max_err_closed,
        "claim1_thresholds": thresholds,
        "eq23_residual_max": eq23_max,
    }
