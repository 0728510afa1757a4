"""Harnack defect ``M = H(log u) - H(log f)`` and its consequences.

The matrix estimate says ``M`` is positive semidefinite for every positive
solution (with the usual boundedness hypotheses).  Taking partial and full
traces, or single diagonal entries, gives the scalar inequalities checked by
:func:`trace_defects`; integrating along an admissible path gives the
two-point bound of :func:`two_point_check`.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import BadTimes, NonFiniteMatrix, UltraHarnackError
from .kernel import Problem, hessian_log_f
from .mixture import MixtureSolution, SolutionJet, solution_jet
from .path import action_closed_form

DEFAULT_TOL = 1e-8
TWO_POINT_SLACK = 1e-10


@dataclass(frozen=True)
class PSDCertificate:
    verdict: bool
    min_eigenvalue: float
    witness: np.ndarray


@dataclass(frozen=True)
class HarnackReport:
    M: np.ndarray
    eigenvalues: np.ndarray
    min_eigenvalue: float
    psd: bool
    tol: float
    trace_defect_partial: float
    trace_defect_full: float
    diag_defects: np.ndarray

    @property
    def scale(self) -> float:
        return 1.0 + float(np.linalg.norm(self.M, 2))


@dataclass(frozen=True)
class TwoPointResult:
    log_bound: float
    log_actual: float
    holds: bool

    @property
    def bound(self) -> float:
        return math.exp(self.log_bound)

    @property
    def actual(self) -> float:
        return math.exp(self.log_actual)

    @property
    def ratio(self) -> float:
        """bound / actual, at most 1 when the inequality holds."""
        return math.exp(self.log_bound - self.log_actual)


def harnack_matrix(jet: SolutionJet, problem: Problem, t: float) -> np.ndarray:
    return jet.hess_log - hessian_log_f(problem, t)


def _sign_fix(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 0)
    if len(nz) and v[nz[0]] < 0:
        v = -v
    return v


def certify_psd(M, tol: float = DEFAULT_TOL) -> PSDCertificate:
    """Eigenvalue test ``lambda_min >= -tol (1 + ||M||_2)``.

    The witness is the unit eigenvector of the smallest eigenvalue, signed so
    that its first nonzero coordinate is positive.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise UltraHarnackError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonFiniteMatrix("matrix has non-finite entries")
    if tol < 0:
        raise UltraHarnackError("tolerance must be nonnegative")
    w, V = np.linalg.eigh(M)
    scale = 1.0 + (np.max(np.abs(w)) if len(w) else 0.0)
    witness = _sign_fix(V[:, 0])
    return PSDCertificate(bool(w[0] >= -tol * scale), float(w[0]), witness)


def principal_minors_psd(M, tol: float = DEFAULT_TOL) -> bool:
    """Cross-check via all principal minors (Sylvester), for N <= 6.

    Each ``j x j`` minor is allowed to dip to ``-tol * scale**j``.
    """
    M = np.asarray(M, dtype=float)
    N = M.shape[0]
    if N > 6:
        raise UltraHarnackError("principal-minor enumeration is limited to N <= 6")
    scale = 1.0 + np.linalg.norm(M, 2)
    for j in range(1, N + 1):
        for idx in combinations(range(N), j):
            if np.linalg.det(M[np.ix_(idx, idx)]) < -tol * scale**j:
                return False
    return True


def cholesky_shift_psd(M, tol: float = DEFAULT_TOL) -> bool:
    """Cross-check: Cholesky of ``M + tol (1 + ||M||_2) I`` succeeds."""
    M = np.asarray(M, dtype=float)
    shift = tol * (1.0 + np.linalg.norm(M, 2))
    try:
        np.linalg.cholesky(M + shift * np.eye(M.shape[0]))
    except np.linalg.LinAlgError:
        return False
    return True


def trace_defects(jet: SolutionJet, problem: Problem, t: float):
    """Scalar consequences of the matrix estimate.

    Returns ``(partial, full, diag)`` where::

        partial = sum_{i<=n} l_ii + (n + 3k) / (2t)
        full    = Laplacian(l) + (n + 3k) / (2t) + 6k / t^3
        diag[i] = l_{n+i, n+i} + 6 / t^3
    """
    M = harnack_matrix(jet, problem, t)
    n = problem.n
    d = np.diag(M)
    return float(np.sum(d[:n])), float(np.sum(d)), d[n:].copy()


def harnack_report(sol: MixtureSolution, x, t: float, tol: float = DEFAULT_TOL) -> HarnackReport:
    problem = sol.problem
    jet = solution_jet(sol, x, t)
    M = harnack_matrix(jet, problem, t)
    eig = np.linalg.eigvalsh(M)
    scale = 1.0 + float(np.max(np.abs(eig)))
    partial, full, diag = trace_defects(jet, problem, t)
    return HarnackReport(
        M=M,
        eigenvalues=eig,
        min_eigenvalue=float(eig[0]),
        psd=bool(eig[0] >= -tol * scale),
        tol=tol,
        trace_defect_partial=partial,
        trace_defect_full=full,
        diag_defects=diag,
    )


def two_point_check(sol: MixtureSolution, p, t1: float, q, t2: float) -> TwoPointResult:
    """Compare u(q, t2) against the integrated Harnack lower bound from (p, t1)."""
    if not t1 < t2:
        raise BadTimes(f"need t1 < t2, got {t1!r}, {t2!r}")
    if not (t1 > 0 and sol.contains_time(t1) and sol.contains_time(t2)):
        raise BadTimes(f"times {t1!r}, {t2!r} must lie in the solution domain with t1 > 0")
    problem = sol.problem
    log_up = sol.log_u(p, t1)
    log_uq = sol.log_u(q, t2)
    log_bound = (
        problem.homogeneity * math.log(t1 / t2)
        - 0.25 * action_closed_form(problem, p, t1, q, t2)
        + log_up
    )
    holds = log_uq >= log_bound + math.log1p(-TWO_POINT_SLACK)
    return TwoPointResult(log_bound, log_uq, bool(holds))


# --- random sampling -----------------------------------------------------------

def sample_stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for sample ``index`` of a run seeded by ``seed``."""
    return np.random.default_rng([int(seed), int(index)])


def random_mixture(
    rng: np.random.Generator,
    problem: Problem,
    max_poles: int = 20,
    pole_box: float = 3.0,
    tau_range=(-2.0, 0.0),
    log_weight_spread: float = 5.0,
    epsilon: float = 0.0,
) -> MixtureSolution:
    """Random positive mixture whose poles all lie at or before t = 0.

    Poles at ``tau > 0`` would make u vanish on ``(0, tau)``, outside the
    class of positive solutions on ``(0, T)``.
    """
    m = int(rng.integers(1, max_poles + 1))
    xis = rng.uniform(-pole_box, pole_box, size=(m, problem.N))
    taus = rng.uniform(*tau_range, size=m)
    lws = rng.uniform(-log_weight_spread, log_weight_spread, size=m)
    return MixtureSolution(problem, xis, taus, lws, epsilon)


def random_point(rng: np.random.Generator, sol: MixtureSolution, box: float = 5.0,
                 t_range=(0.05, 10.0), margin: float = 0.05):
    """x uniform in ``[-box, box]^N``, t log-uniform in ``t_range``.

    t is additionally kept at least ``margin`` after the latest pole.
    """
    lo, hi = t_range
    latest = float(sol.taus.max()) if sol.n_components else -math.inf
    lo = max(lo, latest + margin)
    if not lo < hi:
        raise UltraHarnackError("sampling time range is empty after the pole margin")
    t = float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
    x = rng.uniform(-box, box, size=sol.problem.N)
    return x, t


def mixture_hash(sol: MixtureSolution) -> str:
    blob = json.dumps(sol.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def harnack_sweep(
    sol: MixtureSolution,
    samples: int,
    seed: int,
    tol: float = DEFAULT_TOL,
    box: float = 5.0,
    t_range=(0.05, 10.0),
    margin: float = 0.05,
) -> dict:
    """Check the matrix estimate at ``samples`` random points of one mixture."""
    records = []
    for i in range(samples):
        rng = sample_stream(seed, i)
        x, t = random_point(rng, sol, box, t_range, margin)
        rep = harnack_report(sol, x, t, tol)
        records.append((i, x, t, rep))
    return _summarise(records, {"mixture_hash": mixture_hash(sol), "seed": int(seed)}, tol)


def random_sweep(
    samples: int,
    seed: int,
    tol: float = DEFAULT_TOL,
    max_n: int = 4,
    max_poles: int = 20,
    box: float = 5.0,
    t_range=(0.05, 10.0),
    problem: Problem = None,
) -> dict:
    """Sweep over random mixtures and points.

    The problem is drawn per sample (``n <= max_n``) unless ``problem`` fixes it.
    """
    records = []
    extra = []
    for i in range(samples):
        rng = sample_stream(seed, i)
        if problem is None:
            n = int(rng.integers(1, max_n + 1))
            k = int(rng.integers(1, n + 1))
        else:
            n, k = problem.n, problem.k
        sol = random_mixture(rng, Problem(n, k), max_poles=max_poles)
        x, t = random_point(rng, sol, box, t_range)
        records.append((i, x, t, harnack_report(sol, x, t, tol)))
        extra.append({"n": n, "k": k, "mixture_hash": mixture_hash(sol)})
    report = _summarise(records, {"seed": int(seed)}, tol)
    for v in report["violations"] + report["trace_violations"]:
        v.update(extra[v["index"]])
    return report


def _summarise(records, meta: dict, tol: float) -> dict:
    violations = []
    trace_violations = []
    min_eig = math.inf
    min_rel = math.inf
    partial_min = full_min = diag_min = math.inf
    for i, x, t, rep in records:
        min_eig = min(min_eig, rep.min_eigenvalue)
        min_rel = min(min_rel, rep.min_eigenvalue / rep.scale)
        partial_min = min(partial_min, rep.trace_defect_partial)
        full_min = min(full_min, rep.trace_defect_full)
        diag_min = min(diag_min, float(np.min(rep.diag_defects)))
        if not rep.psd:
            violations.append({
                "index": i,
                "x": [float(v) for v in x],
                "t": float(t),
                "min_eig": rep.min_eigenvalue,
                **meta,
            })
        # traces sum up to N eigenvalues, so their slack scales with N
        N = len(x)
        slack = tol * rep.scale
        worst = min(rep.trace_defect_partial / N, rep.trace_defect_full / N,
                    float(np.min(rep.diag_defects)))
        if worst < -slack:
            trace_violations.append({
                "index": i,
                "x": [float(v) for v in x],
                "t": float(t),
                "trace_partial": rep.trace_defect_partial,
                "trace_full": rep.trace_defect_full,
                "diag_min": float(np.min(rep.diag_defects)),
                **meta,
            })
    return {
        "samples": len(records),
        "tol": tol,
        "min_eig_overall": min_eig,
        "min_eig_relative": min_rel,
        "violations": violations,
        "trace_partial_min": partial_min,
        "trace_full_min": full_min,
        "diag_min": diag_min,
        "trace_violations": trace_violations,
        **meta,
    }
