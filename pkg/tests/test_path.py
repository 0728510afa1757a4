import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from conftest import PROBLEMS
from ultraharnack.errors import BadTimes, OutOfDomain, UltraHarnackError
from ultraharnack.harnack import random_mixture, sample_stream, two_point_check
from ultraharnack.kernel import Problem
from ultraharnack.mixture import MixtureSolution
from ultraharnack.path import (
    action_closed_form,
    gauss_integrate,
    integrate_harnack_along_path,
    minimize_action_numeric,
    optimal_path,
)


def endpoints(problem, seed):
    rng = np.random.default_rng(seed)
    t1 = float(rng.uniform(0.0, 2.0))
    t2 = t1 + float(rng.uniform(0.2, 3.0))
    return rng.uniform(-2, 2, problem.N), t1, rng.uniform(-2, 2, problem.N), t2


def test_action_four_case():
    p = Problem(1, 1)
    assert action_closed_form(p, [0, 0], 0.0, [1, 0], 1.0) == 4.0
    plan = optimal_path(p, [0, 0], 0.0, [1, 0], 1.0)
    assert plan.quadrature_action() == pytest.approx(4.0, rel=1e-14)
    numeric = minimize_action_numeric(p, [0, 0], 0.0, [1, 0], 1.0, steps=1024)
    assert numeric.action == pytest.approx(4.0, rel=1e-6)
    # x(t) = 3t^2 - 2t: the dip makes int x = 0 so y returns to 0
    t = np.linspace(0, 1, 7)
    np.testing.assert_allclose(plan.diffusive(t)[:, 0], 3 * t**2 - 2 * t, atol=1e-15)


def test_pure_diffusion_components_are_straight():
    p = Problem(3, 1)
    plan = optimal_path(p, [0, 1, 2, 0], 0.0, [1, -1, 0, 0], 2.0)
    t = np.linspace(0, 2, 5)
    np.testing.assert_allclose(plan.diffusive(t)[:, 1], 1 - t)
    np.testing.assert_allclose(plan.diffusive(t)[:, 2], 2 - t)


@pytest.mark.parametrize("problem", PROBLEMS)
@pytest.mark.parametrize("seed", range(5))
def test_plan_hits_endpoints_and_constraints(problem, seed):
    p, t1, q, t2 = endpoints(problem, seed)
    plan = optimal_path(problem, p, t1, q, t2)
    np.testing.assert_allclose(plan([t1])[0], p, atol=1e-12)
    np.testing.assert_allclose(plan([t2])[0], q, atol=1e-10)
    assert np.abs(plan.constraint_residuals()).max(initial=0) <= 1e-12 * (1 + np.abs(q).max())
    assert plan.quadrature_action() == pytest.approx(plan.action, rel=1e-12)


def test_transported_solves_constraint_ode():
    problem = Problem(2, 2)
    p, t1, q, t2 = endpoints(problem, 4)
    plan = optimal_path(problem, p, t1, q, t2)
    ode = solve_ivp(lambda t, y: -plan.diffusive(t)[0, :2], (t1, t2), p[2:], rtol=1e-12, atol=1e-12,
                    dense_output=True)
    t = np.linspace(t1, t2, 9)
    np.testing.assert_allclose(ode.sol(t).T, plan.transported(t), atol=1e-9)


@pytest.mark.parametrize("problem", PROBLEMS)
def test_closed_form_matches_kkt(problem):
    for seed in range(10):
        p, t1, q, t2 = endpoints(problem, 100 + seed)
        exact = action_closed_form(problem, p, t1, q, t2)
        numeric = minimize_action_numeric(problem, p, t1, q, t2, steps=1024)
        assert numeric.action == pytest.approx(exact, rel=1e-6)
        np.testing.assert_allclose(numeric.states[-1], q, atol=1e-9)


def test_kkt_error_quarters_when_steps_double():
    problem = Problem(2, 1)
    p, t1, q, t2 = endpoints(problem, 42)
    exact = action_closed_form(problem, p, t1, q, t2)
    errs = [abs(minimize_action_numeric(problem, p, t1, q, t2, s).action - exact) for s in (128, 256, 512)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.01)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.01)


def test_kkt_is_a_minimum():
    problem = Problem(1, 1)
    p, t1, q, t2 = np.zeros(2), 0.0, np.array([1.0, 0.5]), 1.0
    base = minimize_action_numeric(problem, p, t1, q, t2, steps=64)
    h = (t2 - t1) / 64
    rng = np.random.default_rng(0)
    for _ in range(5):
        # perturbations that keep endpoints and the trapezoid integral fixed
        d = rng.normal(size=63)
        d -= d.mean()
        x = base.states[:, 0].copy()
        x[1:-1] += 1e-2 * d
        assert np.sum(np.diff(x) ** 2) / h > base.action


def test_zero_endpoints():
    problem = Problem(2, 1)
    numeric = minimize_action_numeric(problem, np.zeros(3), 0.0, np.zeros(3), 1.0)
    assert numeric.action <= 1e-20
    assert action_closed_form(problem, np.zeros(3), 0.0, np.zeros(3), 1.0) == 0.0


@given(st.sampled_from(PROBLEMS), st.integers(0, 2**32 - 1))
def test_action_scaling(problem, seed):
    # (x, t) -> (lambda x_diff, lambda^3 x_trans, lambda^2 t) leaves the action invariant
    p, t1, q, t2 = endpoints(problem, seed)
    lam = 1.7
    scale = np.r_[np.full(problem.n, lam), np.full(problem.k, lam**3)]
    a = action_closed_form(problem, p, t1, q, t2)
    b = action_closed_form(problem, p * scale, lam**2 * t1, q * scale, lam**2 * t2)
    assert b == pytest.approx(a, rel=1e-10, abs=1e-12)


def test_gauss_integrate_polynomials():
    assert gauss_integrate(lambda t: t**4, 0.0, 2.0) == pytest.approx(32 / 5, rel=1e-15)
    np.testing.assert_allclose(gauss_integrate(lambda t: np.column_stack([t, t**2]), 0, 1), [0.5, 1 / 3])


def test_integrated_inequality_equality_case():
    f = MixtureSolution.single(Problem(2, 1))
    plan = optimal_path(f.problem, np.zeros(3), 1.0, np.zeros(3), 3.0)
    lhs, rhs = integrate_harnack_along_path(f, plan)
    assert lhs == pytest.approx(rhs, abs=1e-12)


@pytest.mark.parametrize("problem", PROBLEMS)
def test_integrated_inequality_random(problem):
    for i in range(20):
        rng = sample_stream(17, i)
        sol = random_mixture(rng, problem)
        p, t1, q, t2 = endpoints(problem, 1000 + i)
        t1 += 0.05
        t2 += 0.05
        plan = optimal_path(problem, p, t1, q, t2)
        lhs, rhs = integrate_harnack_along_path(sol, plan)
        assert lhs >= rhs - 1e-8
        res = two_point_check(sol, p, t1, q, t2)
        # exp(lhs - rhs) = actual / bound, compared in logs to avoid overflow
        assert lhs - rhs == pytest.approx(res.log_actual - res.log_bound, rel=1e-10, abs=1e-10)


def test_path_outside_domain():
    sol = MixtureSolution.single(Problem(1, 1), tau=0.5)
    plan = optimal_path(sol.problem, [0, 0], 0.2, [0, 0], 1.0)
    with pytest.raises(OutOfDomain):
        integrate_harnack_along_path(sol, plan)


@pytest.mark.parametrize("t1,t2", [(1.0, 1.0), (1.0, 0.5)])
def test_bad_times(t1, t2):
    with pytest.raises(BadTimes):
        optimal_path(Problem(1, 1), [0, 0], t1, [0, 0], t2)
    with pytest.raises(BadTimes):
        action_closed_form(Problem(1, 1), [0, 0], t1, [0, 0], t2)


def test_too_few_steps():
    with pytest.raises(UltraHarnackError):
        minimize_action_numeric(Problem(1, 1), [0, 0], 0, [1, 0], 1, steps=8)


def test_sample_rows():
    plan = optimal_path(Problem(1, 1), [0, 0], 0.0, [1, 0], 1.0)
    rows = plan.sample(11)
    assert rows.shape == (11, 3)
    np.testing.assert_allclose(rows[:, 0], np.linspace(0, 1, 11))
