"""Command-line front end: ``ultraharnack <subcommand> [options]``.

Every subcommand writes one JSON report (stdout or ``--output``).  Exit
status is 0 when all checks pass, 1 when violations are found and 2 for
usage or input errors.  ``ULTRAHARNACK_TOL`` overrides the default
tolerance of the Harnack sweeps.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import fd_solver, general_op, harnack, path, proof_ledger
from .errors import NonpositiveField, UltraHarnackError
from .kernel import Problem, log_kernel_jet
from .mixture import MixtureSolution, load_mixture

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
PATH_REL_TOL = 1e-6


class UsageError(UltraHarnackError):
    pass


def default_tol() -> float:
    raw = os.environ.get("ULTRAHARNACK_TOL")
    if raw is None:
        return harnack.DEFAULT_TOL
    try:
        tol = float(raw)
    except ValueError:
        raise UsageError(f"ULTRAHARNACK_TOL={raw!r} is not a number") from None
    if not (math.isfinite(tol) and tol > 0):
        raise UsageError(f"ULTRAHARNACK_TOL must be positive, got {raw!r}")
    return tol


def _vector(text: str, name: str) -> np.ndarray:
    try:
        v = np.array([float(c) for c in text.split(",")])
    except ValueError:
        raise UsageError(f"--{name}: expected comma-separated numbers, got {text!r}") from None
    if not np.all(np.isfinite(v)):
        raise UsageError(f"--{name}: non-finite entry")
    return v


def _ints(text: str, name: str) -> list:
    try:
        return [int(c) for c in text.split(",")]
    except ValueError:
        raise UsageError(f"--{name}: expected comma-separated integers, got {text!r}") from None


def _positive(value, name):
    if not (math.isfinite(value) and value > 0):
        raise UsageError(f"--{name} must be positive, got {value!r}")
    return value


def _problem(args, sol=None) -> Problem:
    if sol is not None:
        if args.n is not None and args.n != sol.problem.n or args.k is not None and args.k != sol.problem.k:
            raise UsageError("--n/--k disagree with the mixture file")
        return sol.problem
    if args.n is None or args.k is None:
        raise UsageError("--n and --k are required without --mixture")
    return Problem(args.n, args.k)


def _point(v, problem, name):
    if v.shape != (problem.N,):
        raise UsageError(f"--{name} needs {problem.N} coordinates, got {len(v)}")
    return v


def _clean(obj):
    """JSON-ready copy: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else repr(obj)
    return obj


# --- subcommands ---------------------------------------------------------------

def cmd_kernel_eval(args):
    problem = _problem(args)
    xi = None if args.xi is None else _point(_vector(args.xi, "xi"), problem, "xi")
    rows = []
    for spec in args.x:
        x = _point(_vector(spec, "x"), problem, "x")
        jet = log_kernel_jet(problem, x, args.t, xi, args.tau)
        rows.append({"x": x, "log_value": jet.log_value, "grad": jet.grad, "hess": jet.hess})
    return {"n": problem.n, "k": problem.k, "t": args.t, "tau": args.tau, "jets": rows}, True


def _sweep(args):
    tol = _positive(args.tol if args.tol is not None else default_tol(), "tol")
    t_range = tuple(_vector(args.t_range, "t-range"))
    if len(t_range) != 2 or not 0 < t_range[0] < t_range[1]:
        raise UsageError("--t-range must be 'lo,hi' with 0 < lo < hi")
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    if args.mixture:
        sol = load_mixture(args.mixture)
        _problem(args, sol)
        return harnack.harnack_sweep(sol, args.samples, args.seed, tol, args.box, t_range)
    problem = Problem(args.n, args.k) if args.n is not None and args.k is not None else None
    return harnack.random_sweep(args.samples, args.seed, tol, max_n=args.max_n,
                                max_poles=args.max_poles, box=args.box, t_range=t_range,
                                problem=problem)


def cmd_check_harnack(args):
    report = _sweep(args)
    report.pop("trace_violations")
    return report, not report["violations"]


def cmd_trace_check(args):
    report = _sweep(args)
    out = {k: v for k, v in report.items() if k not in ("violations", "min_eig_overall", "min_eig_relative")}
    out["violations"] = out.pop("trace_violations")
    return out, not out["violations"]


def cmd_two_point(args):
    if args.mixture:
        sol = load_mixture(args.mixture)
        problem = _problem(args, sol)
    else:
        problem = _problem(args)
        sol = MixtureSolution.single(problem)
    if args.p is not None and args.q is not None:
        cases = [(_point(_vector(args.p, "p"), problem, "p"), _point(_vector(args.q, "q"), problem, "q"),
                  args.t1, args.t2)]
    elif args.p is None and args.q is None:
        cases = []
        for i in range(args.samples):
            rng = harnack.sample_stream(args.seed, i)
            t1 = float(np.exp(rng.uniform(np.log(0.05), np.log(5.0))))
            t2 = t1 * float(np.exp(rng.uniform(0.01, 2.0)))
            cases.append((rng.uniform(-3, 3, problem.N), rng.uniform(-3, 3, problem.N), t1, t2))
    else:
        raise UsageError("give both --p and --q, or neither for random cases")
    rows, violations = [], []
    for i, (p, q, t1, t2) in enumerate(cases):
        res = harnack.two_point_check(sol, p, t1, q, t2)
        row = {"p": p, "q": q, "t1": t1, "t2": t2, "log_bound": res.log_bound,
               "log_actual": res.log_actual, "ratio": res.ratio, "holds": res.holds}
        rows.append(row)
        if not res.holds:
            violations.append({"index": i, **row})
    return {"n": problem.n, "k": problem.k, "mixture_hash": harnack.mixture_hash(sol),
            "seed": args.seed, "cases": rows, "violations": violations}, not violations


def cmd_path(args):
    problem = _problem(args)
    p = _point(_vector(args.p, "p"), problem, "p")
    q = _point(_vector(args.q, "q"), problem, "q")
    plan = path.optimal_path(problem, p, args.t1, q, args.t2)
    numeric = path.minimize_action_numeric(problem, p, args.t1, q, args.t2, args.steps)
    gap = abs(numeric.action - plan.action)
    rel = gap / plan.action if plan.action > 0 else gap
    if args.csv:
        rows = plan.sample(args.count)
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i + 1}" for i in range(problem.N)])
            for r in rows:
                w.writerow([f"{v:.17g}" for v in r])
    report = {
        "n": problem.n, "k": problem.k, "p": p, "q": q, "t1": args.t1, "t2": args.t2,
        "action": plan.action,
        "quadrature_action": plan.quadrature_action(),
        "numeric_action": numeric.action,
        "steps": args.steps,
        "relative_gap": rel,
        "constraint_residual_max": float(np.max(np.abs(plan.constraint_residuals()), initial=0.0)),
        "csv": args.csv,
    }
    return report, rel <= PATH_REL_TOL


def cmd_ledger(args):
    if args.sigma_grid < 2 or args.trials < 1:
        raise UsageError("--sigma-grid must be >= 2 and --trials >= 1")
    rep = proof_ledger.ledger_report(args.sigma_grid, args.trials, args.seed, args.eq23_points)
    checks = {
        "det_is_two": rep["c0"]["det"] == 2,
        "one_positive_eigenvalue": sum(e > 0 for e in rep["c0"]["eigs"]) == 1,
        "richardson": abs(rep["richardson_leading"] - rep["leading_coefficient"]) <= 1e-6,
        "identities": rep["identity_max_err"] <= 1e-10,
        "eq23": rep["eq23_residual_max"] <= 1e-4,
    }
    rep["checks"] = checks
    return rep, all(checks.values())


def cmd_conjecture_scan(args):
    if args.operator:
        spec = general_op.load_spec(args.operator)
    elif args.profile:
        spec = general_op.random_spec(np.random.default_rng([args.seed, 0]), _ints(args.profile, "profile"))
    else:
        raise UsageError("give --operator FILE or --profile p0,p1,...")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    tol = _positive(args.tol, "tol")
    rep = general_op.conjecture2_scan(spec, args.trials, args.seed, args.points, tol=tol)
    return rep, not rep["violations"]


def cmd_fd_bench(args):
    if args.mixture:
        sol = load_mixture(args.mixture)
        _problem(args, sol)
    else:
        sol = MixtureSolution.single(_problem(args))
    ms = _ints(args.m, "m")
    try:
        study = fd_solver.convergence_study(sol, args.L, ms, args.t0, args.t1)
    except NonpositiveField as exc:
        return {"positivity": False, "error": str(exc)}, False
    ok_order = all(o >= args.min_order for o in study["orders"])
    monotone = all(a["linf"] >= b["linf"] for a, b in zip(study["runs"], study["runs"][1:]))
    if args.csv:
        grid = fd_solver.Grid(sol.problem, args.L, ms[-1], args.t0, args.t1)
        exact = fd_solver.exact_evaluator(sol)
        res = fd_solver.solve(grid, lambda X: exact(X, args.t0), exact)
        fd_solver.write_slice_csv(res.field, grid, args.csv)
    report = {"n": sol.problem.n, "k": sol.problem.k, "L": args.L, "t0": args.t0, "t1": args.t1,
              **study, "min_order": args.min_order, "positivity": True,
              "order_ok": ok_order, "monotone": monotone, "csv": args.csv}
    return report, ok_order and monotone


# --- parser ---------------------------------------------------------------------

def _add_problem(p, required=False):
    p.add_argument("--n", type=int, required=required)
    p.add_argument("--k", type=int, required=required)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ultraharnack", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="write the JSON report here instead of stdout")
    common.add_argument("--deterministic", action="store_true",
                        help="omit timestamps and timings so reruns are byte-identical")
    common.add_argument("--seed", type=int, default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel-eval", parents=[common], help="log-jets of the kernel at points")
    _add_problem(p, required=True)
    p.add_argument("--x", action="append", required=True, help="point 'x1,...,xN' (repeatable)")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--xi")
    p.add_argument("--tau", type=float, default=0.0)
    p.set_defaults(func=cmd_kernel_eval)

    for name, func, text in (("check-harnack", cmd_check_harnack, "matrix estimate sweep"),
                             ("trace-check", cmd_trace_check, "trace and diagonal consequences")):
        p = sub.add_parser(name, parents=[common], help=text)
        _add_problem(p)
        p.add_argument("--mixture", help="mixture JSON; random mixtures otherwise")
        p.add_argument("--samples", type=int, default=1000)
        p.add_argument("--tol", type=float)
        p.add_argument("--box", type=float, default=5.0)
        p.add_argument("--t-range", default="0.05,10")
        p.add_argument("--max-n", type=int, default=4)
        p.add_argument("--max-poles", type=int, default=20)
        p.set_defaults(func=func)

    p = sub.add_parser("two-point", parents=[common], help="integrated two-point bound")
    _add_problem(p)
    p.add_argument("--mixture")
    p.add_argument("--p")
    p.add_argument("--q")
    p.add_argument("--t1", type=float, default=1.0)
    p.add_argument("--t2", type=float, default=2.0)
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(func=cmd_two_point)

    p = sub.add_parser("path", parents=[common], help="optimal admissible path and action")
    _add_problem(p, required=True)
    p.add_argument("--p", required=True)
    p.add_argument("--q", required=True)
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--t2", type=float, required=True)
    p.add_argument("--steps", type=int, default=1024)
    p.add_argument("--csv", help="write sampled path rows (t, x...) here")
    p.add_argument("--count", type=int, default=101)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("ledger", parents=[common], help="algebraic checks behind the estimate")
    p.add_argument("--sigma-grid", type=int, default=64)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--eq23-points", type=int, default=20)
    p.set_defaults(func=cmd_ledger)

    p = sub.add_parser("conjecture-scan", parents=[common], help="general-operator evidence scan")
    p.add_argument("--operator", help="operator JSON")
    p.add_argument("--profile", help="dimension profile 'p0,p1,...' for a random operator")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--points", type=int, default=5)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_conjecture_scan)

    p = sub.add_parser("fd-bench", parents=[common], help="finite-difference convergence study")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--mixture")
    p.add_argument("--L", type=float, default=6.0)
    p.add_argument("--m", default="41,81,161")
    p.add_argument("--t0", type=float, default=0.5)
    p.add_argument("--t1", type=float, default=1.0)
    p.add_argument("--min-order", type=float, default=0.8)
    p.add_argument("--csv", help="write a centre slice of the finest field here")
    p.set_defaults(func=cmd_fd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        report, ok = args.func(args)
    except (UltraHarnackError, OSError, ValueError) as exc:
        print(f"ultraharnack {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = {"command": args.command, "status": "pass" if ok else "violations"}
    if not args.deterministic:
        out["generated_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
        out["elapsed_s"] = round(time.perf_counter() - start, 3)
    out.update(report)
    text = json.dumps(_clean(out), indent=2) + "\n"
    try:
        if args.output:
            with open(args.output, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"ultraharnack {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK if ok else EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
