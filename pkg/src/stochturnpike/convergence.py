"""Step-refinement studies for the integrators.

Deterministic orders are estimated by Richardson's ratio over steps
``tau, tau/2, tau/4``.  Strong orders are measured on the scalar
Ornstein-Uhlenbeck process ``dx = -lam x dt + sigma dW`` against its exact
pathwise solution: on a fine grid the pair (``dW``, ``int e^{-lam(h-s)} dW(s)``)
is Gaussian with known covariance, so the reference is exact, and coarse
increments are sums of fine ones.
"""
from __future__ import annotations

import math

import numpy as np

from .dynamics import ConsensusModel, FunctionModel
from .integrators import StepInput, get_stepper
from .kernels import SymmetricCS

__all__ = [
    "integrate",
    "richardson_order",
    "smooth_test_problem",
    "ou_reference_paths",
    "strong_errors",
    "strong_order",
]


def integrate(method: str, model, x0, T: float, m: int, dW=None, sigma: float = 0.0):
    """Endpoint of ``m`` uniform steps of ``method``; ``dW`` is ``(m, N)`` or None."""
    step = get_stepper(method)
    tau = T / m
    x = np.asarray(x0, dtype=float)
    for n in range(m):
        s = StepInput(x=x, tau=tau, dW=None if dW is None else dW[n], sigma=sigma, t=n * tau)
        x = step(s, model)
    return x


def smooth_test_problem():
    """Five agents with a mild CS kernel: nonlinear, smooth, non-stiff."""
    model = ConsensusModel(SymmetricCS(epsilon=1.0, alpha=0.5))
    x0 = np.array([-1.0, -0.3, 0.1, 0.6, 1.0])
    return model, x0, 1.0


def richardson_order(method: str, model=None, x0=None, T=None, m: int = 16) -> float:
    if model is None:
        model, x0, T = smooth_test_problem()
    x1 = integrate(method, model, x0, T, m)
    x2 = integrate(method, model, x0, T, 2 * m)
    x4 = integrate(method, model, x0, T, 4 * m)
    return math.log2(np.linalg.norm(x1 - x2) / np.linalg.norm(x2 - x4))


def ou_reference_paths(n_paths: int, n_fine: int, T: float = 1.0, lam: float = 1.0,
                       sigma: float = 1.0, x0: float = 1.0, seed: int = 0):
    """Fine Brownian increments ``(n_paths, n_fine)`` and exact ``x(T)``."""
    rng = np.random.default_rng(seed)
    h = T / n_fine
    a = math.exp(-lam * h)
    var_w = h
    var_i = -math.expm1(-2 * lam * h) / (2 * lam)
    cov = -math.expm1(-lam * h) / lam
    L = np.linalg.cholesky(np.array([[var_w, cov], [cov, var_i]]))
    z = rng.standard_normal((n_paths, n_fine, 2)) @ L.T
    dW, dI = z[..., 0], z[..., 1]
    x = np.full(n_paths, float(x0))
    for j in range(n_fine):
        x = a * x + sigma * dI[:, j]
    return dW, x


def strong_errors(method: str, levels=(4, 8, 16, 32, 64), n_paths: int = 2000,
                  lam: float = 1.0, sigma: float = 1.0, x0: float = 1.0,
                  T: float = 1.0, seed: int = 0):
    """Mean absolute endpoint error for each coarse step count in ``levels``."""
    n_fine = max(levels) * 4
    dW_fine, exact = ou_reference_paths(n_paths, n_fine, T, lam, sigma, x0, seed)
    model = FunctionModel(lambda x, t: -lam * x, lambda x, t: np.array([[-lam]]))
    errs = []
    for m in levels:
        if n_fine % m:
            raise ValueError(f"level {m} does not divide the fine grid {n_fine}")
        dW = dW_fine.reshape(n_paths, m, n_fine // m).sum(axis=2)
        err = 0.0
        for p in range(n_paths):
            xT = integrate(method, model, [x0], T, m, dW=dW[p][:, None], sigma=sigma)
            err += abs(xT[0] - exact[p])
        errs.append(err / n_paths)
    return np.array(levels), np.array(errs)


def strong_order(method: str, **kwargs) -> float:
    """Least-squares slope of log(error) against log(step size)."""
    levels, errs = strong_errors(method, **kwargs)
    taus = 1.0 / levels
    return float(np.polyfit(np.log(taus), np.log(errs), 1)[0])
