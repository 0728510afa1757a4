import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ultraharnack.kernel import Problem

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

PROBLEMS = [Problem(1, 1), Problem(2, 1), Problem(2, 2), Problem(3, 2), Problem(3, 1), Problem(4, 4)]


def fd_gradient(fn, x, h=1e-4):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def fd_hessian(fn, x, h=1e-4):
    x = np.asarray(x, dtype=float)
    N = len(x)
    H = np.empty((N, N))
    for i in range(N):
        for j in range(N):
            ei = np.zeros(N)
            ej = np.zeros(N)
            ei[i] = h
            ej[j] = h
            H[i, j] = (fn(x + ei + ej) - fn(x + ei - ej) - fn(x - ei + ej) + fn(x - ei - ej)) / (4 * h * h)
    return H


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
