"""Explicit finite-difference solver for the model equation on a truncated box.

Forward Euler in time, centred second differences in ``x_1..x_n`` and
first-order upwinding of the transport term ``x_i d/dx_{n+i}``.  Dirichlet
data on the box faces come from an exact solution, so the scheme can be
checked against that same solution in the interior.

The scheme is monotone (hence positivity preserving) when

    dt * (2n / h^2 + k L / h) <= 1,

which is the step bound enforced here (with a 0.9 safety factor by default).
Only N = n + k <= 3 is supported.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import CFLViolation, NonpositiveField, UltraHarnackError
from .kernel import Problem, hessian_log_f

MAX_DIM = 3


def stable_dt(problem: Problem, L: float, m: int, safety: float = 0.9) -> float:
    h = 2.0 * L / (m - 1)
    return safety / (2.0 * problem.n / h**2 + problem.k * L / h)


@dataclass(frozen=True)
class Grid:
    problem: Problem
    L: float
    m: int
    t0: float
    t1: float
    dt: float = None

    def __post_init__(self):
        if self.problem.N > MAX_DIM:
            raise UltraHarnackError(f"grids are limited to N <= {MAX_DIM}")
        if not self.L > 0:
            raise UltraHarnackError("box half-width must be positive")
        if self.m < 8:
            raise UltraHarnackError("need at least 8 points per axis")
        if not 0 < self.t0 <= self.t1:
            raise UltraHarnackError(f"need 0 < t0 <= t1, got {self.t0}, {self.t1}")
        limit = stable_dt(self.problem, self.L, self.m, safety=1.0)
        dt = stable_dt(self.problem, self.L, self.m) if self.dt is None else float(self.dt)
        if not 0 < dt <= limit:
            raise CFLViolation(f"dt={dt:g} exceeds the monotonicity limit {limit:g}")
        object.__setattr__(self, "dt", dt)

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.m - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.m)

    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape (m, ..., m, N)."""
        mesh = np.meshgrid(*([self.axis] * self.problem.N), indexing="ij")
        return np.stack(mesh, axis=-1)

    def interior_mask(self, fraction: float = 0.5) -> np.ndarray:
        """Nodes with every |x_i| <= fraction * L."""
        X = self.coordinates()
        return np.all(np.abs(X) <= fraction * self.L + 1e-12, axis=-1)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros((self.m,) * self.problem.N, dtype=bool)
        for ax in range(self.problem.N):
            idx = [slice(None)] * self.problem.N
            idx[ax] = 0
            mask[tuple(idx)] = True
            idx[ax] = -1
            mask[tuple(idx)] = True
        return mask


@dataclass
class Field:
    values: np.ndarray
    time: float


def _shift(u, axis, offset):
    """Values at neighbouring nodes along ``axis`` on the interior block."""
    N = u.ndim
    idx = [slice(1, -1)] * N
    idx[axis] = slice(1 + offset, u.shape[axis] - 1 + offset)
    return u[tuple(idx)]


def operator(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Discrete right-hand side on interior nodes (boundary entries are 0)."""
    problem = grid.problem
    n, k = problem.n, problem.k
    h = grid.h
    axis = grid.axis
    out = np.zeros_like(u)
    centre = _shift(u, 0, 0)
    rhs = np.zeros_like(centre)
    for i in range(n):
        rhs += (_shift(u, i, 1) - 2.0 * centre + _shift(u, i, -1)) / h**2
    for i in range(k):
        shape = [1] * u.ndim
        shape[i] = len(axis) - 2
        xi = axis[1:-1].reshape(shape)
        fwd = (_shift(u, n + i, 1) - centre) / h
        bwd = (centre - _shift(u, n + i, -1)) / h
        rhs += np.maximum(xi, 0.0) * fwd + np.minimum(xi, 0.0) * bwd
    out[(slice(1, -1),) * u.ndim] = rhs
    return out


def step(field: Field, grid: Grid, boundary, dt: float = None) -> Field:
    """One forward-Euler step; ``boundary(X, t)`` supplies exact face values."""
    dt = grid.dt if dt is None else dt
    limit = stable_dt(grid.problem, grid.L, grid.m, safety=1.0)
    if dt > limit * (1.0 + 1e-12):
        raise CFLViolation(f"dt={dt:g} exceeds the monotonicity limit {limit:g}")
    new = field.values + dt * operator(field.values, grid)
    t = field.time + dt
    mask = grid.boundary_mask()
    new[mask] = boundary(grid.coordinates()[mask], t)
    if np.any(new < 0) or not np.all(np.isfinite(new)):
        raise NonpositiveField(f"field lost positivity at t={t:g}")
    return Field(new, t)


@dataclass(frozen=True)
class SolveResult:
    field: Field
    steps: int
    errors: dict


def interior_errors(values: np.ndarray, exact: np.ndarray, grid: Grid, fraction: float = 0.5) -> dict:
    mask = grid.interior_mask(fraction)
    err = np.abs(values - exact)[mask]
    ref = np.abs(exact)[mask]
    cell = grid.h ** grid.problem.N
    l2 = math.sqrt(cell * float(np.sum(err**2)))
    l2_ref = math.sqrt(cell * float(np.sum(ref**2)))
    return {
        "linf": float(err.max()),
        "linf_rel": float(err.max() / ref.max()),
        "l2": l2,
        "l2_rel": l2 / l2_ref if l2_ref > 0 else math.inf,
    }


def solve(grid: Grid, initial, boundary, reference=None) -> SolveResult:
    """Step from t0 to t1; the last step is shortened to land on t1.

    ``initial(X)`` and ``boundary(X, t)`` / ``reference(X, t)`` take node
    coordinates of shape (..., N).  Errors are measured on ``|x_i| <= L/2``.
    """
    X = grid.coordinates()
    field = Field(np.asarray(initial(X), dtype=float), grid.t0)
    span = grid.t1 - grid.t0
    steps = int(math.ceil(span / grid.dt - 1e-12)) if span > 0 else 0
    dt = span / steps if steps else 0.0
    for j in range(steps):
        field = step(field, grid, boundary, dt)
        field.time = grid.t0 + (j + 1) * dt
    errors = {}
    if reference is not None:
        errors = interior_errors(field.values, reference(X, grid.t1), grid)
    return SolveResult(field, steps, errors)


def exact_evaluator(sol):
    """``u(X, t)`` for a mixture solution at node arrays ``X`` of shape (..., N)."""
    from .mixture import log_u_values

    def exact(X, t):
        return np.exp(log_u_values(sol, X, t))

    return exact


def convergence_study(sol, L: float, ms, t0: float, t1: float) -> dict:
    """Solve against an exact mixture on a refinement ladder; report errors and orders."""
    exact = exact_evaluator(sol)
    rows = []
    for m in ms:
        grid = Grid(sol.problem, L, int(m), t0, t1)
        res = solve(grid, lambda X: exact(X, t0), exact, exact)
        rows.append({"m": int(m), "h": grid.h, "steps": res.steps, **res.errors})
    orders = [
        math.log(a["linf_rel"] / b["linf_rel"]) / math.log(a["h"] / b["h"])
        for a, b in zip(rows, rows[1:])
    ]
    return {"runs": rows, "orders": orders}


def log_hessian_at(values: np.ndarray, grid: Grid, index, stride: int = 1) -> np.ndarray:
    """Central-difference Hessian of log(values) at node ``index``."""
    N = grid.problem.N
    lv = np.log(values)
    d = stride * grid.h
    idx = np.array(index)
    H = np.zeros((N, N))

    def at(offset):
        return lv[tuple(idx + offset)]

    for a in range(N):
        ea = np.zeros(N, dtype=int)
        ea[a] = stride
        H[a, a] = (at(ea) - 2.0 * at(0 * ea) + at(-ea)) / d**2
        for b in range(a + 1, N):
            eb = np.zeros(N, dtype=int)
            eb[b] = stride
            H[a, b] = H[b, a] = (at(ea + eb) - at(ea - eb) - at(eb - ea) + at(-ea - eb)) / (4.0 * d**2)
    return H


def harnack_spot_check(field: Field, grid: Grid, stride: int = 1):
    """``H(log u_numeric) - H(log f)`` at the box centre and its smallest eigenvalue."""
    centre = (grid.m // 2,) * grid.problem.N
    M = log_hessian_at(field.values, grid, centre, stride) - hessian_log_f(grid.problem, field.time)
    return M, float(np.linalg.eigvalsh(M)[0])


def write_slice_csv(field: Field, grid: Grid, path, axes=(0, None)) -> None:
    """Write a 2-D slice through the box centre as rows ``(x_a, x_b, u)``.

    ``axes`` defaults to the first diffusive and the first transported axis.
    """
    problem = grid.problem
    a, b = axes[0], problem.n if axes[1] is None else axes[1]
    centre = grid.m // 2
    idx = [centre] * problem.N
    idx[a] = slice(None)
    idx[b] = slice(None)
    plane = field.values[tuple(idx)]
    if a > b:
        plane = plane.T
    ax = grid.axis
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{a + 1}", f"x{b + 1}", "u"])
        for i, xa in enumerate(ax):
            for j, xb in enumerate(ax):
                w.writerow([f"{xa:.17g}", f"{xb:.17g}", f"{plane[i, j]:.17g}"])
