"""Kolmogorov operators ``L = div(A D) + <x, B D> - d/dt`` with block structure.

``A = diag(A0, 0)`` with ``A0`` symmetric positive definite (p0 x p0) and ``B``
carries blocks ``B_1..B_r`` on its block superdiagonal, ``B_i`` of shape
``p_{i-1} x p_i`` and full column rank.  ``Lu = 0`` reads
``u_t = tr(A D^2 u) + <B^T x, Du>``, the backward equation of the linear SDE
``dX = B^T X ds + sqrt(2 A) dW``.  Its fundamental solution is therefore

    Gamma(x, t; xi, tau) = N(xi; E(s) x, K(s)),   s = t - tau,
    E(s) = expm(B^T s),   K' = B^T K + K B + 2A,   K(0) = 0,

and since ``tr B = 0`` it is also a probability density in ``x``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    BadProfile,
    InvalidInput,
    NotSPD,
    PoleNotInPast,
    RankDeficient,
    SingularCovariance,
)
from .kernel import KernelJet, Problem
from .mixture import combine_log_jets

ODE_TOL = 1e-12
MAX_CONDITION = 1e14


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    p: tuple
    A0: np.ndarray
    B_blocks: tuple
    A: np.ndarray = field(init=False, repr=False)
    B: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        p = tuple(int(v) for v in self.p)
        A0 = np.array(self.A0, dtype=float, ndmin=2)
        blocks = tuple(np.array(b, dtype=float, ndmin=2) for b in self.B_blocks)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "A0", A0)
        object.__setattr__(self, "B_blocks", blocks)
        N = sum(p)
        A = np.zeros((N, N))
        B = np.zeros((N, N))
        if len(p) and A0.shape == (p[0], p[0]):
            A[: p[0], : p[0]] = A0
        offsets = np.concatenate([[0], np.cumsum(p)]).astype(int)
        for i, Bi in enumerate(blocks, start=1):
            if i < len(p) and Bi.shape == (p[i - 1], p[i]):
                B[offsets[i - 1]: offsets[i], offsets[i]: offsets[i + 1]] = Bi
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def N(self) -> int:
        return sum(self.p)

    @property
    def r(self) -> int:
        return len(self.p) - 1

    def key(self) -> tuple:
        """Hashable identity used for caching covariances."""
        return (self.p, self.A0.tobytes(), tuple(b.tobytes() for b in self.B_blocks))

    def to_dict(self) -> dict:
        return {"p": list(self.p), "A0": self.A0.tolist(), "B": [b.tolist() for b in self.B_blocks]}


def validate(spec: OperatorSpec) -> None:
    """Raise on the first violated structural condition; return None when fine."""
    p = spec.p
    if len(p) < 2:
        raise BadProfile("need at least p0 and p1")
    if any(v < 1 for v in p) or any(a < b for a, b in zip(p, p[1:])):
        raise BadProfile(f"profile must be nonincreasing with p_r >= 1, got {p}")
    if len(spec.B_blocks) != len(p) - 1:
        raise BadProfile(f"expected {len(p) - 1} B blocks, got {len(spec.B_blocks)}")
    if spec.A0.shape != (p[0], p[0]):
        raise BadProfile(f"A0 must be {p[0]}x{p[0]}, got {spec.A0.shape}")
    for i, Bi in enumerate(spec.B_blocks, start=1):
        if Bi.shape != (p[i - 1], p[i]):
            raise BadProfile(f"B_{i} must be {p[i - 1]}x{p[i]}, got {Bi.shape}")
    if not (np.all(np.isfinite(spec.A0)) and all(np.all(np.isfinite(b)) for b in spec.B_blocks)):
        raise InvalidInput("non-finite operator entries")
    if not np.array_equal(spec.A0, spec.A0.T):
        raise NotSPD("A0 is not symmetric")
    try:
        np.linalg.cholesky(spec.A0)
    except np.linalg.LinAlgError:
        raise NotSPD("A0 is not positive definite") from None
    for i, Bi in enumerate(spec.B_blocks, start=1):
        sv = np.linalg.svd(Bi, compute_uv=False)
        if sv[0] == 0 or np.count_nonzero(sv > 1e-10 * sv[0]) < p[i]:
            raise RankDeficient(f"B_{i} has rank below {p[i]}")


def from_problem(problem: Problem) -> OperatorSpec:
    """The operator of the model equation: A0 = I_n, B_1 = [I_k; 0]."""
    n, k = problem.n, problem.k
    B1 = np.zeros((n, k))
    B1[:k, :k] = np.eye(k)
    return OperatorSpec((n, k), np.eye(n), (B1,))


def random_spec(rng: np.random.Generator, p) -> OperatorSpec:
    """Random admissible operator; B_i singular values drawn from [0.5, 2]."""
    p = tuple(int(v) for v in p)
    G = rng.normal(size=(p[0], p[0]))
    Q, _ = np.linalg.qr(G)
    A0 = Q @ np.diag(rng.uniform(0.5, 2.0, p[0])) @ Q.T
    A0 = 0.5 * (A0 + A0.T)
    blocks = []
    for a, b in zip(p, p[1:]):
        U, _ = np.linalg.qr(rng.normal(size=(a, a)))
        W, _ = np.linalg.qr(rng.normal(size=(b, b)))
        S = np.zeros((a, b))
        S[:b, :b] = np.diag(rng.uniform(0.5, 2.0, b))
        blocks.append(U @ S @ W.T)
    return OperatorSpec(p, A0, tuple(blocks))


_SPECS: dict = {}


@lru_cache(maxsize=4096)
def _flow(key: tuple, s: float):
    spec = _SPECS[key]
    N = spec.N
    Bt = spec.B.T
    A2 = 2.0 * spec.A

    def rhs(_, y):
        E = y[: N * N].reshape(N, N)
        K = y[N * N:].reshape(N, N)
        return np.concatenate([(Bt @ E).ravel(), (Bt @ K + K @ spec.B + A2).ravel()])

    y0 = np.concatenate([np.eye(N).ravel(), np.zeros(N * N)])
    sol = solve_ivp(rhs, (0.0, s), y0, method="DOP853", rtol=ODE_TOL, atol=ODE_TOL * 1e-3)
    if not sol.success:
        raise SingularCovariance(f"covariance integration failed: {sol.message}")
    y = sol.y[:, -1]
    E = y[: N * N].reshape(N, N)
    K = y[N * N:].reshape(N, N)
    K = 0.5 * (K + K.T)
    return E, K


def flow_and_covariance(spec: OperatorSpec, s: float):
    """``(E(s), K(s))`` for lag ``s > 0``; cached per operator and lag."""
    if not s > 0:
        raise PoleNotInPast("evaluation time must be strictly after the pole time")
    key = spec.key()
    _SPECS.setdefault(key, spec)
    E, K = _flow(key, float(s))
    if np.linalg.cond(K) > MAX_CONDITION:
        raise SingularCovariance(f"covariance condition number exceeds {MAX_CONDITION:g} at lag {s:g}")
    return E, K


def kernel_numeric(spec: OperatorSpec, x, t: float, xi=None, tau: float = 0.0) -> KernelJet:
    """Log-jet of the Gaussian fundamental solution of ``Lu = 0``."""
    N = spec.N
    x = np.asarray(x, dtype=float)
    xi = np.zeros(N) if xi is None else np.asarray(xi, dtype=float)
    E, K = flow_and_covariance(spec, t - tau)
    Kinv = np.linalg.inv(K)
    Kinv = 0.5 * (Kinv + Kinv.T)
    z = xi - E @ x
    _, logdet = np.linalg.slogdet(K)
    log_value = -0.5 * (N * math.log(2.0 * math.pi) + logdet + z @ Kinv @ z)
    grad = E.T @ Kinv @ z
    hess = -E.T @ Kinv @ E
    hess = 0.5 * (hess + hess.T)
    return KernelJet(float(log_value), grad, hess)


def reference_hessian(spec: OperatorSpec, t: float) -> np.ndarray:
    """Hessian of log of the kernel with pole at the origin; x-independent."""
    return kernel_numeric(spec, np.zeros(spec.N), t).hess


# --- Conjecture scan -------------------------------------------------------------

def random_poles(rng: np.random.Generator, N: int, max_poles: int = 6,
                 pole_box: float = 2.0, tau_range=(-1.0, 0.0), log_weight_spread: float = 3.0):
    m = int(rng.integers(1, max_poles + 1))
    return (
        rng.uniform(-pole_box, pole_box, size=(m, N)),
        rng.uniform(*tau_range, size=m),
        rng.uniform(-log_weight_spread, log_weight_spread, size=m),
    )


def mixture_log_jet(spec: OperatorSpec, x, t: float, xis, taus, log_weights):
    jets = [kernel_numeric(spec, x, t, xi, tau) for xi, tau in zip(xis, taus)]
    return combine_log_jets(
        np.array([j.log_value for j in jets]) + np.asarray(log_weights),
        np.array([j.grad for j in jets]),
        np.array([j.hess for j in jets]),
    )


def conjecture2_scan(spec: OperatorSpec, trials: int, seed: int, points_per_trial: int = 5,
                     max_poles: int = 6, box: float = 3.0, t_range=(0.2, 5.0),
                     tol: float = 1e-6) -> dict:
    """Numerical evidence for the matrix estimate of a general operator.

    Each trial draws a random positive mixture of kernels (poles at or before
    t = 0) and random points; ``M = H(log u) - H(log Gamma_0)(t)`` is formed
    with ``Gamma_0`` the kernel with pole at the origin.  Samples with
    ``lambda_min(M) < -tol (1 + |M|_2)`` are flagged as potential
    counterexamples, not as disproof.
    """
    validate(spec)
    records = []
    violations = []
    global_min = math.inf
    global_rel = math.inf
    for trial in range(trials):
        rng = np.random.default_rng([int(seed), trial])
        xis, taus, lws = random_poles(rng, spec.N, max_poles)
        worst = math.inf
        points = []
        for _ in range(points_per_trial):
            x = rng.uniform(-box, box, size=spec.N)
            t = float(math.exp(rng.uniform(math.log(t_range[0]), math.log(t_range[1]))))
            _, _, H, _ = mixture_log_jet(spec, x, t, xis, taus, lws)
            M = H - reference_hessian(spec, t)
            eig = np.linalg.eigvalsh(M)
            scale = 1.0 + float(np.max(np.abs(eig)))
            worst = min(worst, float(eig[0]))
            global_min = min(global_min, float(eig[0]))
            global_rel = min(global_rel, float(eig[0]) / scale)
            points.append({"x": x.tolist(), "t": t, "min_eig": float(eig[0])})
            if eig[0] < -tol * scale:
                violations.append({"trial": trial, "x": x.tolist(), "t": t,
                                   "min_eig": float(eig[0]), "seed": int(seed)})
        records.append({
            "trial": trial,
            "poles": {"xi": xis.tolist(), "tau": taus.tolist(), "log_weight": lws.tolist()},
            "worst_min_eig": worst,
            "points": points,
        })
    return {
        "kind": "evidence",
        "operator": spec.to_dict(),
        "samples": trials * points_per_trial,
        "tol": tol,
        "min_eig_overall": global_min,
        "min_eig_relative": global_rel,
        "violations": violations,
        "trials": records,
        "seed": int(seed),
    }


def spec_from_dict(data: dict) -> OperatorSpec:
    try:
        spec = OperatorSpec(tuple(data["p"]), data["A0"], tuple(data["B"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"bad operator description: {exc}") from None
    validate(spec)
    return spec


def load_spec(path) -> OperatorSpec:
    def reject(name):
        raise InvalidInput(f"non-finite number {name} in operator file")

    with open(path) as fh:
        try:
            data = json.load(fh, parse_constant=reject)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise InvalidInput(f"{path}: top level must be an object")
    return spec_from_dict(data)
