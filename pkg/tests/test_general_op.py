import json
import math

import numpy as np
import pytest

from conftest import PROBLEMS, fd_hessian
from ultraharnack.errors import BadProfile, InvalidInput, NotSPD, PoleNotInPast, RankDeficient
from ultraharnack.general_op import (
    OperatorSpec,
    conjecture2_scan,
    flow_and_covariance,
    from_problem,
    kernel_numeric,
    load_spec,
    random_spec,
    reference_hessian,
    spec_from_dict,
    validate,
)
from ultraharnack.harnack import harnack_report
from ultraharnack.kernel import Problem, hessian_log_f, log_kernel_jet
from ultraharnack.mixture import MixtureSolution


@pytest.mark.parametrize("problem", PROBLEMS)
def test_embedding_matches_closed_form(problem, rng):
    spec = from_problem(problem)
    validate(spec)
    for _ in range(5):
        x, xi = rng.uniform(-2, 2, (2, problem.N))
        t = float(rng.uniform(0.1, 5))
        tau = float(rng.uniform(-1, 0))
        a = kernel_numeric(spec, x, t, xi, tau)
        b = log_kernel_jet(problem, x, t, xi, tau)
        assert a.log_value == pytest.approx(b.log_value, rel=1e-8, abs=1e-8)
        np.testing.assert_allclose(a.grad, b.grad, rtol=1e-8, atol=1e-8)
        np.testing.assert_allclose(a.hess, b.hess, rtol=1e-8, atol=1e-8)
    np.testing.assert_allclose(reference_hessian(spec, 0.7), hessian_log_f(problem, 0.7), rtol=1e-8)


@pytest.mark.parametrize("p", [(2, 1), (2, 2, 1), (3, 2, 1), (1, 1, 1)])
def test_kernel_solves_general_equation(p):
    spec = random_spec(np.random.default_rng(sum(p)), p)
    N = spec.N
    x = np.linspace(-0.5, 0.5, N)
    xi = np.linspace(0.3, -0.3, N)
    t, h = 1.2, 1e-4

    def u(y, s):
        return math.exp(kernel_numeric(spec, y, s, xi).log_value)

    ut = (u(x, t + h) - u(x, t - h)) / (2 * h)
    D = np.array([(u(x + h * e, t) - u(x - h * e, t)) / (2 * h) for e in np.eye(N)])
    D2 = fd_hessian(lambda y: u(y, t), x, h=1e-3)
    rhs = np.sum(spec.A * D2) + (spec.B.T @ x) @ D
    assert ut == pytest.approx(rhs, rel=1e-5, abs=1e-8)


def test_unit_mass():
    spec = random_spec(np.random.default_rng(0), (2, 1))
    jet = kernel_numeric(spec, np.zeros(3), 0.9)
    mode = np.linalg.solve(-jet.hess, jet.grad)
    peak = kernel_numeric(spec, mode, 0.9).log_value
    logmass = peak + 1.5 * math.log(2 * math.pi) - 0.5 * np.linalg.slogdet(-jet.hess)[1]
    assert logmass == pytest.approx(0.0, abs=1e-9)


def test_covariance_closed_form_one_one():
    E, K = flow_and_covariance(from_problem(Problem(1, 1)), 2.0)
    # forward process dX = dW sqrt 2, dY = X ds: var X = 2s, cov = s^2, var Y = 2 s^3 / 3
    np.testing.assert_allclose(K, [[4.0, 4.0], [4.0, 16.0 / 3.0]], rtol=1e-10)
    np.testing.assert_allclose(E, [[1.0, 0.0], [2.0, 1.0]], atol=1e-12)


def test_random_spec_is_valid(rng):
    for p in [(2, 1), (3, 3), (3, 2, 2, 1)]:
        spec = random_spec(rng, p)
        validate(spec)
        assert spec.N == sum(p) and spec.r == len(p) - 1


@pytest.mark.parametrize("data,error", [
    ({"p": [1, 2], "A0": [[1]], "B": [[[1, 1]]]}, BadProfile),
    ({"p": [2], "A0": [[1, 0], [0, 1]], "B": []}, BadProfile),
    ({"p": [2, 1], "A0": [[1, 0], [0, -1]], "B": [[[1], [0]]]}, NotSPD),
    ({"p": [2, 1], "A0": [[1, 0.5], [0.4, 1]], "B": [[[1], [0]]]}, NotSPD),
    ({"p": [2, 2], "A0": [[1, 0], [0, 1]], "B": [[[1, 1], [1, 1]]]}, RankDeficient),
    ({"p": [2, 1], "A0": [[1, 0], [0, 1]], "B": [[[1, 0]]]}, BadProfile),
    ({"p": [2, 1], "A0": [[1, 0], [0, 1]]}, InvalidInput),
])
def test_validation_errors(data, error):
    with pytest.raises(error):
        spec_from_dict(data)


def test_load_spec_roundtrip(tmp_path):
    spec = random_spec(np.random.default_rng(1), (2, 1))
    path = tmp_path / "op.json"
    path.write_text(json.dumps(spec.to_dict()))
    back = load_spec(path)
    np.testing.assert_array_equal(back.A, spec.A)
    np.testing.assert_array_equal(back.B, spec.B)


def test_load_spec_rejects_nan(tmp_path):
    path = tmp_path / "op.json"
    path.write_text('{"p": [1, 1], "A0": [[NaN]], "B": [[[1]]]}')
    with pytest.raises(InvalidInput):
        load_spec(path)


def test_pole_in_future():
    with pytest.raises(PoleNotInPast):
        kernel_numeric(from_problem(Problem(1, 1)), [0, 0], 0.5, tau=1.0)


def test_scan_embeds_consistently():
    problem = Problem(2, 1)
    rep = conjecture2_scan(from_problem(problem), trials=10, seed=4, points_per_trial=3)
    assert rep["kind"] == "evidence" and not rep["violations"]
    for trial in rep["trials"]:
        poles = trial["poles"]
        sol = MixtureSolution(problem, poles["xi"], poles["tau"], poles["log_weight"])
        for pt in trial["points"]:
            ref = harnack_report(sol, pt["x"], pt["t"])
            assert pt["min_eig"] == pytest.approx(ref.min_eigenvalue, abs=1e-6 * ref.scale)


@pytest.mark.parametrize("p", [(2, 1), (2, 2), (2, 1, 1)])
def test_scan_on_random_operators(p):
    spec = random_spec(np.random.default_rng(7), p)
    rep = conjecture2_scan(spec, trials=8, seed=1, points_per_trial=3)
    assert rep["samples"] == 24
    assert rep == conjecture2_scan(spec, trials=8, seed=1, points_per_trial=3)


def test_spec_equality_is_identity():
    spec = from_problem(Problem(1, 1))
    assert isinstance(spec, OperatorSpec)
    assert spec.key() == from_problem(Problem(1, 1)).key()
