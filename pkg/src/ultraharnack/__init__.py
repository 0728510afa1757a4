"""Verification toolkit for the matrix Harnack estimate of the Kolmogorov equation

    u_t = sum_{i<=n} u_{x_i x_i} + sum_{i<=k} x_i u_{x_{n+i}}.
"""
from .errors import UltraHarnackError
from .harnack import (
    HarnackReport,
    certify_psd,
    harnack_matrix,
    harnack_report,
    random_sweep,
    trace_defects,
    two_point_check,
)
from .kernel import KernelJet, Problem, hessian_log_f, kernel, log_kernel, log_kernel_jet
from .mixture import MixtureSolution, load_mixture, save_mixture, solution_jet
from .path import action_closed_form, minimize_action_numeric, optimal_path

__all__ = [
    "HarnackReport",
    "KernelJet",
    "MixtureSolution",
    "Problem",
    "UltraHarnackError",
    "action_closed_form",
    "certify_psd",
    "harnack_matrix",
    "harnack_report",
    "hessian_log_f",
    "kernel",
    "load_mixture",
    "log_kernel",
    "log_kernel_jet",
    "minimize_action_numeric",
    "optimal_path",
    "random_sweep",
    "save_mixture",
    "solution_jet",
    "trace_defects",
    "two_point_check",
]

__version__ = "0.1.0"
