import json
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from conftest import PROBLEMS, fd_gradient, fd_hessian
from ultraharnack.errors import EmptySolution, InvalidInput, NonpositiveTime, OutOfDomain
from ultraharnack.kernel import Problem, hessian_log_f, log_kernel_jet
from ultraharnack.mixture import (
    MixtureSolution,
    caloric_polynomial,
    caloric_polynomial_dt,
    load_mixture,
    log_u_values,
    mixture_from_dict,
    pde_residual_mixture,
    save_mixture,
    solution_jet,
)


def random_solution(problem, seed, m=5, epsilon=0.0):
    rng = np.random.default_rng(seed)
    return MixtureSolution(
        problem,
        rng.uniform(-2, 2, (m, problem.N)),
        rng.uniform(-1, 0, m),
        rng.uniform(-3, 3, m),
        epsilon,
    )


def test_single_pole_is_the_kernel():
    p = Problem(2, 1)
    f = MixtureSolution.single(p)
    for t in (0.1, 1.0, 7.0):
        jet = f.jet([0.3, -1.0, 0.5], t)
        np.testing.assert_array_equal(jet.hess_log, hessian_log_f(p, t))
        assert jet.log_u == log_kernel_jet(p, [0.3, -1.0, 0.5], t).log_value


def test_symmetric_pair_has_zero_first_gradient():
    p = Problem(1, 1)
    sol = MixtureSolution.from_weights(p, [[1.0, 0.0], [-1.0, 0.0]], [0.0, 0.0], [1.0, 1.0])
    # (x, y) -> (-x, -y) maps the pair to itself
    jet = sol.jet([0.0, 0.0], 0.7)
    assert abs(jet.grad_log[0]) < 1e-15
    assert abs(jet.grad_log[1]) < 1e-15


# below t ~ 0.5 the fourth derivatives of log u make the h = 1e-4 stencil itself
# inaccurate at the 1e-6 level
@given(st.sampled_from(PROBLEMS), st.integers(0, 2**32 - 1), st.floats(0.5, 5.0))
def test_log_jets_match_finite_differences(problem, seed, t):
    sol = random_solution(problem, seed)
    x = np.random.default_rng(seed + 7).uniform(-2, 2, problem.N)
    jet = sol.jet(x, t)

    def lu(y):
        return sol.log_u(y, t)

    g_err = np.linalg.norm(fd_gradient(lu, x) - jet.grad_log)
    assert g_err <= 1e-6 * (1 + np.linalg.norm(jet.grad_log))
    h_err = np.linalg.norm(fd_hessian(lu, x) - jet.hess_log, 2)
    assert h_err <= 1e-6 * (1 + np.linalg.norm(jet.hess_log, 2))


def test_u_derivatives_consistent(rng):
    p = Problem(2, 2)
    sol = random_solution(p, 3, epsilon=0.01)
    x = rng.normal(size=p.N)
    jet = sol.jet(x, 1.1)
    np.testing.assert_allclose(fd_gradient(lambda y: sol.u(y, 1.1), x), jet.grad_u, rtol=1e-6, atol=1e-12)
    np.testing.assert_allclose(fd_hessian(lambda y: sol.u(y, 1.1), x, h=1e-3), jet.hess_u, rtol=1e-4, atol=1e-9)
    assert jet.responsibilities.sum() == pytest.approx(1.0)


def test_extreme_log_weights():
    p = Problem(2, 1)
    base = random_solution(p, 11)
    x = np.array([0.1, 0.2, -0.3])
    ref = base.jet(x, 0.9)
    for shift in (600.0, -600.0):
        moved = MixtureSolution(p, base.xis, base.taus, base.log_weights + shift)
        jet = moved.jet(x, 0.9)
        assert jet.log_u == pytest.approx(ref.log_u + shift, rel=1e-14)
        np.testing.assert_allclose(jet.hess_log, ref.hess_log, rtol=1e-12, atol=1e-12)
    spread = MixtureSolution(p, base.xis[:2], base.taus[:2], [600.0, -600.0])
    assert np.all(np.isfinite(spread.jet(x, 0.9).hess_log))


def test_far_field_polynomial_branch():
    p = Problem(1, 1)
    sol = MixtureSolution(p, [[0.0, 0.0]], [0.0], [0.0], epsilon=1e-3)
    x = np.array([1e3, -2e3])
    jet = sol.jet(x, 1.0)
    P, dP, HP = caloric_polynomial(p, x, 1.0)
    assert jet.log_u == pytest.approx(math.log(1e-3 * P), rel=1e-14)
    np.testing.assert_allclose(jet.grad_log, dP / P, rtol=1e-12)
    np.testing.assert_allclose(jet.hess_log, HP / P - np.outer(dP, dP) / P**2, rtol=1e-10, atol=1e-18)


def test_vectorised_values_match(rng):
    p = Problem(2, 1)
    sol = random_solution(p, 5, epsilon=0.2)
    X = rng.normal(size=(3, 4, p.N))
    vals = log_u_values(sol, X, 1.7)
    for idx in np.ndindex(3, 4):
        assert vals[idx] == pytest.approx(sol.log_u(X[idx], 1.7), rel=1e-13)


@pytest.mark.parametrize("problem", PROBLEMS)
@pytest.mark.parametrize("kind", ["f", "epsilon", "ten"])
def test_pde_residual(problem, kind, rng):
    if kind == "f":
        sol = MixtureSolution.single(problem)
    elif kind == "epsilon":
        sol = random_solution(problem, 1, m=3, epsilon=0.5)
    else:
        sol = random_solution(problem, 2, m=10)
    for _ in range(10):
        x = rng.uniform(-2, 2, problem.N)
        t = float(rng.uniform(0.2, 5))
        h = 1e-5 * t
        lt = (sol.log_u(x, t + h) - sol.log_u(x, t - h)) / (2 * h)
        assert abs(pde_residual_mixture(sol, x, t)) <= 1e-6 * (1 + abs(lt))


def _symbolic_polynomial(n, k):
    x = sp.symbols(f"x1:{n + k + 1}", real=True)
    t = sp.symbols("t", positive=True)
    P = (
        t**2 * sum(x[i] ** 2 for i in range(k))
        + sum(v**2 for v in x)
        + 2 * t * (sum(x[i] * x[n + i] for i in range(k)) + n)
        + sp.Rational(2 * k, 3) * t**3
    )
    return x, t, P


@pytest.mark.parametrize("n,k", [(1, 1), (2, 1), (3, 2), (4, 4)])
def test_caloric_polynomial_symbolic(n, k):
    x, t, P = _symbolic_polynomial(n, k)
    res = sp.diff(P, t) - sum(sp.diff(P, x[i], 2) for i in range(n)) - sum(x[i] * sp.diff(P, x[n + i]) for i in range(k))
    assert sp.expand(res) == 0
    problem = Problem(n, k)
    grad = [sp.lambdify((x, t), sp.diff(P, v)) for v in x]
    value = sp.lambdify((x, t), P)
    rng = np.random.default_rng(n * 10 + k)
    for _ in range(20):
        pt = rng.uniform(-3, 3, problem.N)
        s = float(rng.uniform(0.01, 4))
        val, g, H = caloric_polynomial(problem, pt, s)
        assert val == pytest.approx(value(pt, s), rel=1e-13)
        np.testing.assert_allclose(g, [fn(pt, s) for fn in grad], rtol=1e-13, atol=1e-13)
        Hs = sp.hessian(P, x).subs(t, s)
        np.testing.assert_allclose(H, np.array(Hs, dtype=float), rtol=1e-13)


@given(st.sampled_from(PROBLEMS), st.integers(0, 2**32 - 1), st.floats(1e-6, 100.0))
def test_caloric_polynomial_positive(problem, seed, t):
    x = np.random.default_rng(seed).uniform(-50, 50, problem.N)
    assert caloric_polynomial(problem, x, t)[0] > 0


def test_caloric_polynomial_rejects_nonpositive_time():
    with pytest.raises(NonpositiveTime):
        caloric_polynomial(Problem(1, 1), [0, 0], 0.0)


def test_caloric_dt_matches_difference(rng):
    p = Problem(3, 2)
    x = rng.normal(size=p.N)
    h = 1e-6
    fd = (caloric_polynomial(p, x, 1.0 + h)[0] - caloric_polynomial(p, x, 1.0 - h)[0]) / (2 * h)
    assert caloric_polynomial_dt(p, x, 1.0) == pytest.approx(fd, rel=1e-8)


def test_domain_checks():
    p = Problem(1, 1)
    sol = MixtureSolution.single(p, tau=-0.5)
    assert sol.t_domain[0] == -0.5
    assert sol.contains_time(-0.2)
    with pytest.raises(OutOfDomain):
        sol.jet([0, 0], -0.5)
    eps = MixtureSolution(p, [[0, 0]], [-0.5], [0.0], epsilon=1.0)
    assert eps.t_domain[0] == 0.0
    with pytest.raises(OutOfDomain):
        eps.jet([0, 0], -0.1)
    bounded = MixtureSolution(p, [[0, 0]], [0.0], [0.0], t_domain=(0.5, 2.0))
    with pytest.raises(OutOfDomain):
        bounded.jet([0, 0], 2.5)


def test_empty_solution():
    with pytest.raises(EmptySolution):
        MixtureSolution(Problem(1, 1), np.zeros((0, 2)), [], [])
    only_poly = MixtureSolution(Problem(1, 1), np.zeros((0, 2)), [], [], epsilon=2.0)
    assert only_poly.u([0, 0], 1.0) == pytest.approx(2.0 * caloric_polynomial(Problem(1, 1), [0, 0], 1.0)[0])


@pytest.mark.parametrize("bad", [
    dict(weights=[1.0, -1.0]),
    dict(weights=[1.0, float("nan")]),
    dict(weights=[0.0, 1.0]),
])
def test_bad_weights(bad):
    with pytest.raises(InvalidInput):
        MixtureSolution.from_weights(Problem(1, 1), [[0, 0], [1, 1]], [0, 0], **bad)


def test_pole_after_domain_rejected():
    with pytest.raises(InvalidInput):
        MixtureSolution(Problem(1, 1), [[0, 0]], [1.0], [0.0], t_domain=(0.5, 2.0))


def test_immutable():
    sol = random_solution(Problem(1, 1), 0)
    with pytest.raises(ValueError):
        sol.xis[0, 0] = 1.0


def test_scaled_solution_shares_log_derivatives():
    sol = random_solution(Problem(2, 1), 9, epsilon=0.3)
    twice = sol.scaled(2.0)
    a, b = sol.jet([0.1, 0.2, 0.3], 1.0), twice.jet([0.1, 0.2, 0.3], 1.0)
    assert b.log_u == pytest.approx(a.log_u + math.log(2.0))
    np.testing.assert_allclose(b.hess_log, a.hess_log, rtol=1e-12)


def test_json_roundtrip(tmp_path):
    sol = random_solution(Problem(3, 2), 4, epsilon=0.25)
    path = tmp_path / "m.json"
    save_mixture(sol, path)
    back = load_mixture(path)
    np.testing.assert_array_equal(back.xis, sol.xis)
    np.testing.assert_array_equal(back.log_weights, sol.log_weights)
    assert back.epsilon == sol.epsilon
    assert back.log_u([0.1] * 5, 1.0) == sol.log_u([0.1] * 5, 1.0)


def test_json_weight_form():
    sol = mixture_from_dict({"n": 1, "k": 1, "poles": [{"xi": [0, 0], "weight": 2.0}]})
    assert sol.log_weights[0] == pytest.approx(math.log(2.0))
    assert sol.taus[0] == 0.0


@pytest.mark.parametrize("text", [
    '{"n": 1, "k": 2, "poles": [{"xi": [0, 0, 0]}]}',
    '{"n": 1, "k": 1, "poles": [{"xi": [0, 0], "weight": -1}]}',
    '{"n": 1, "k": 1, "poles": [{"xi": [0]}]}',
    '{"n": 1, "k": 1, "poles": [{"xi": [NaN, 0]}]}',
    '{"n": 1, "k": 1, "poles": [{"xi": [0, 0], "tau": Infinity}]}',
    '{"n": 1, "k": 1, "poles": []}',
    '{"n": 1, "k": 1, "poles": "x"}',
    '[1, 2]',
    '{"n": 1',
])
def test_json_rejects_bad_files(tmp_path, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    with pytest.raises((InvalidInput, EmptySolution)):
        load_mixture(path)


def test_to_dict_is_json_serialisable():
    sol = random_solution(Problem(1, 1), 0)
    assert json.loads(json.dumps(sol.to_dict()))["n"] == 1


def test_solution_jet_function_matches_method():
    sol = random_solution(Problem(2, 2), 8)
    a = solution_jet(sol, [0, 0, 0, 0], 2.0)
    b = sol.jet([0, 0, 0, 0], 2.0)
    np.testing.assert_array_equal(a.hess_log, b.hess_log)
