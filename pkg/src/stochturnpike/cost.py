"""Discrete cost functional and empirical checks of the turnpike inequalities.

Expectations are ensemble averages over sampled paths.  The static pair is
``(target * 1, 0)``, the dissipation function is ``alpha(y) = gamma y^2 / (2N)``
and the storage function is zero.  Checkers return signed margins
(right-hand side minus left-hand side); the caller decides on tolerances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CostParams",
    "TheoremConstants",
    "running_cost",
    "total_cost",
    "alpha",
    "dissipativity_margin",
    "theorem_constants",
    "cheap_control_margin",
    "turnpike_theorem_check",
]


@dataclass(frozen=True)
class CostParams:
    gamma: float = 1.0
    target: float = 0.0
    n_agents: int = 100

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.n_agents < 1:
            raise ValueError("n_agents must be positive")


@dataclass(frozen=True)
class TheoremConstants:
    beta_p: float
    C0: float
    C1: float


def _as_paths(states) -> np.ndarray:
    """Coerce a single state or a stack of per-path states to ``(n_paths, N)``."""
    X = np.asarray(states, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("expected a non-empty ensemble of states")
    return X


def running_cost(states, control, p: CostParams) -> float:
    """``E[(1/N) sum_k |x_k - target|^2 + gamma |u_k|^2]`` over the ensemble."""
    X = _as_paths(states)
    u = np.asarray(control, dtype=float)
    N = X.shape[1]
    state_part = np.mean(np.sum((X - p.target) ** 2, axis=1)) / N
    ctrl = u if u.ndim == 2 else u[None, :]
    control_part = np.mean(np.sum(ctrl**2, axis=1)) / N
    return float(state_part + p.gamma * control_part)


def total_cost(paths, controls, tau: float, p: CostParams) -> float:
    """Left-rectangle rule ``tau * sum_{n<m} c(x^n, u^n)``.

    ``paths`` has shape ``(n_paths, m + 1, N)``; ``controls`` is ``(m, N)`` when
    every path sees the same control, or ``(n_paths, m, N)``.
    """
    paths = np.asarray(paths, dtype=float)
    if paths.ndim == 2:
        paths = paths[None]
    controls = np.asarray(controls, dtype=float)
    m = paths.shape[1] - 1
    if controls.shape[-2] != m or controls.shape[-1] != paths.shape[2]:
        raise ValueError(
            f"controls shape {controls.shape} does not match {m} steps of {paths.shape[2]} agents")
    total = 0.0
    for n in range(m):
        u = controls[n] if controls.ndim == 2 else controls[:, n]
        total += running_cost(paths[:, n], u, p)
    return tau * total


def alpha(y, p: CostParams):
    return p.gamma / (2.0 * p.n_agents) * np.asarray(y, dtype=float) ** 2


def dissipativity_margin(states, control, tilde_x, tilde_u, p: CostParams) -> float:
    """``E[c(x, u) - alpha(|x - x~| + |u - u~|)]``; non-negative for gamma in (0, 1]."""
    X = _as_paths(states)
    U = np.asarray(control, dtype=float)
    U = np.broadcast_to(U if U.ndim == 2 else U[None, :], X.shape)
    dx = np.linalg.norm(X - np.asarray(tilde_x, dtype=float), axis=1)
    du = np.linalg.norm(U - np.asarray(tilde_u, dtype=float), axis=1)
    N = X.shape[1]
    c = np.sum((X - p.target) ** 2, axis=1) / N + p.gamma * np.sum(U**2, axis=1) / N
    return float(np.mean(c - alpha(dx + du, p)))


def theorem_constants(beta, M_p, gamma, tau, m, lam) -> TheoremConstants:
    if not (beta > 0 and tau > 0 and m > 0 and M_p >= 0):
        raise ValueError("beta, tau and m must be positive and M_p non-negative")
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    if not (0.0 < lam < 1.0):
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    s = math.floor((1.0 - lam) * m)
    if s == 0:
        raise ValueError(f"floor((1 - lambda) m) = 0 for lambda={lam}, m={m}")
    beta_p = 2.0 * ((beta + M_p) ** 2 + M_p**2)
    C0 = 2.0 * tau * (1.0 + gamma * beta_p) / (gamma * -math.expm1(-2.0 * beta * tau))
    C1 = C0**2 / (tau * s)
    return TheoremConstants(beta_p=beta_p, C0=C0, C1=C1)


def cheap_control_margin(cost: float, mean_state0, consts: TheoremConstants,
                         p: CostParams) -> float:
    """``C0 alpha(|x^0 - x~|) - cost``: the cheap-controllability bound."""
    d = np.linalg.norm(np.asarray(mean_state0, dtype=float) - p.target)
    return float(consts.C0 * alpha(d, p) - cost)


def turnpike_theorem_check(paths, controls, consts: TheoremConstants, lam: float,
                           tau: float, p: CostParams) -> float:
    """Margin of the interior-decay bound on a sampled trajectory ensemble.

    Right-hand side ``C1 E[alpha(|x^0 - x~|)]`` minus the tail sum
    ``tau sum_{n >= floor((1-lam) m)} E[alpha(|x^n - x~| + |u^n|)]``.
    """
    paths = np.asarray(paths, dtype=float)
    if paths.ndim == 2:
        paths = paths[None]
    controls = np.asarray(controls, dtype=float)
    m = paths.shape[1] - 1
    s = math.floor((1.0 - lam) * m)
    if s == 0:
        raise ValueError(f"floor((1 - lambda) m) = 0 for lambda={lam}, m={m}")
    lhs = 0.0
    for n in range(s, m):
        u = controls[n] if controls.ndim == 2 else controls[:, n]
        dx = np.linalg.norm(paths[:, n] - p.target, axis=1)
        du = np.linalg.norm(np.broadcast_to(u, paths[:, n].shape), axis=1)
        lhs += tau * float(np.mean(alpha(dx + du, p)))
    rhs = consts.C1 * float(np.mean(alpha(np.linalg.norm(paths[:, 0] - p.target, axis=1), p)))
    return rhs - lhs
