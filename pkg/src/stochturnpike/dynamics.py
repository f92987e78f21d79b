"""Drift field of the interacting-agent system and its Jacobian.

For positions ``x`` (one scalar per agent) and control ``u`` the drift is

    F_k(x, u) = (1/N) sum_l p(x_k, x_l) (x_l - x_k) + u_k

which equals the matrix form ``(P x - x * s) / N + u`` with
``P[k, l] = p(x_k, x_l)`` and ``s = P 1``.  Diagonal entries of ``P`` are kept;
their contribution vanishes identically.
"""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .kernels import Kernel

__all__ = [
    "drift",
    "jacobian",
    "control_time_derivative",
    "laplacian_operator",
    "ConsensusModel",
    "LinearModel",
    "FunctionModel",
]

LINEARIZATIONS = ("jacobian", "laplacian")


def _check_state(x, u=None):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"state must be a vector, got shape {x.shape}")
    if u is None:
        return x, None
    u = np.asarray(u, dtype=float)
    if u.shape != x.shape:
        raise ValueError(f"control length {u.shape} does not match state {x.shape}")
    return x, u


def interaction(x: np.ndarray, kernel: Kernel) -> np.ndarray:
    """The uncontrolled part ``(1/N) sum_l p(x_k, x_l)(x_l - x_k)``."""
    # summing p * (x_l - x_k) directly is exact at consensus, unlike P x - x * s
    P = kernel.matrix(x)
    return (P * (x[None, :] - x[:, None])).sum(axis=1) / x.size


def drift(x, u, kernel: Kernel) -> np.ndarray:
    x, u = _check_state(x, u)
    out = interaction(x, kernel)
    return out if u is None else out + u


def jacobian(x, kernel: Kernel) -> np.ndarray:
    """Dense N x N Jacobian of ``drift`` with respect to ``x``."""
    x, _ = _check_state(x)
    n = x.size
    P = kernel.matrix(x)
    Dx, Dy = kernel.partials(x)
    diff = x[None, :] - x[:, None]  # diff[k, l] = x_l - x_k
    J = (Dy * diff + P) / n
    diag_terms = Dx * diff - P
    np.fill_diagonal(diag_terms, 0.0)
    np.fill_diagonal(J, diag_terms.sum(axis=1) / n)
    return J


def control_time_derivative(plan, n: int) -> np.ndarray:
    """Time derivative of the control at step ``n`` (the ``v_n`` vector).

    Piecewise-constant plans have no derivative and give zeros; plans carrying
    a ``derivative(t)`` callable are evaluated at ``t_n``.
    """
    deriv = getattr(plan, "derivative", None)
    if deriv is None:
        return np.zeros(plan.n_agents)
    return np.asarray(deriv(plan.t0 + n * plan.tau), dtype=float)


def laplacian_operator(x, kernel: Kernel) -> np.ndarray:
    """``(P(x) - diag(s(x))) / N``: the drift is exactly this matrix times ``x``.

    Not the Jacobian (kernel derivatives are dropped), but always a weighted
    graph Laplacian, so its exponential is a contraction for positive kernels.
    """
    x, _ = _check_state(x)
    P = kernel.matrix(x)
    L = P.copy()
    L[np.diag_indices_from(L)] -= P.sum(axis=1)
    return L / x.size


class ConsensusModel:
    """Drift/linearization pair for the kernel-coupled agent system.

    ``linearization="jacobian"`` (default) is the exact Jacobian used by the
    Rosenbrock schemes; ``"laplacian"`` swaps in :func:`laplacian_operator`.
    """

    def __init__(self, kernel: Kernel, linearization: str = "jacobian"):
        if linearization not in LINEARIZATIONS:
            raise ValueError(f"unknown linearization {linearization!r}")
        self.kernel = kernel
        self.linearization = linearization

    def drift(self, x, u=None, t=None):
        return drift(x, u, self.kernel)

    def jacobian(self, x, t=None):
        if self.linearization == "laplacian":
            return laplacian_operator(x, self.kernel)
        return jacobian(x, self.kernel)


class LinearModel:
    """``x' = A x + u``; used for exactness and stability tests."""

    def __init__(self, A):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))

    def drift(self, x, u=None, t=None):
        out = self.A @ np.asarray(x, dtype=float)
        return out if u is None else out + u

    def jacobian(self, x, t=None):
        return self.A


class FunctionModel:
    """Wraps plain callables ``f(x, t)`` and ``jac(x, t)`` (control is added)."""

    def __init__(self, f: Callable, jac: Callable, dfdt: Optional[Callable] = None):
        self.f = f
        self.jac = jac
        self.dfdt = dfdt

    def drift(self, x, u=None, t=None):
        out = np.asarray(self.f(x, t), dtype=float)
        return out if u is None else out + u

    def jacobian(self, x, t=None):
        return np.atleast_2d(np.asarray(self.jac(x, t), dtype=float))
