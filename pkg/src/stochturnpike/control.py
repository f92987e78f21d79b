"""Cheap stabilizing feedback, exact mean propagation and turnpike timing.

The cheap control cancels the interaction term of the drift and adds the
proportional feedback ``beta (target - x)``.  The controlled mean then obeys the
linear ODE ``x' = beta (target - x)``, which the exponential Rosenbrock-Euler
step integrates exactly, so the Lyapunov value ``|x - target|^2`` shrinks by
``exp(-2 beta tau)`` per step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dynamics import interaction
from .kernels import Kernel
from .matfun import phi1

__all__ = [
    "TurnpikeParams",
    "ControlPlan",
    "cheap_control",
    "mean_step_exact",
    "mean_step_euler",
    "lyapunov",
    "turnpike_time",
    "snap_to_grid",
    "HorizonError",
]


class HorizonError(ValueError):
    """Raised when the turnpike time lies beyond the final time."""


@dataclass(frozen=True)
class TurnpikeParams:
    beta: float = 12.0
    delta: float = 2e-4
    target: float = 0.7
    mode: str = "mean-ode"

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.mode not in ("mean-ode", "ensemble"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class ControlPlan:
    """Cheap controls for steps ``n < n_bar``, zero control afterwards."""

    n_bar: int
    n_agents: int
    tau: float
    t0: float = 0.0
    t_bar: float = 0.0
    cheap_controls: np.ndarray = None
    derivative: Optional[Callable[[float], np.ndarray]] = None
    static_control: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.cheap_controls is None:
            self.cheap_controls = np.zeros((self.n_bar, self.n_agents))
        self.cheap_controls = np.asarray(self.cheap_controls, dtype=float)
        if self.cheap_controls.shape != (self.n_bar, self.n_agents):
            raise ValueError("cheap_controls must have shape (n_bar, n_agents)")
        self.static_control = np.zeros(self.n_agents)

    @classmethod
    def uncontrolled(cls, n_agents: int, tau: float, t0: float = 0.0):
        return cls(n_bar=0, n_agents=n_agents, tau=tau, t0=t0)

    def control(self, n: int) -> np.ndarray:
        if n < self.n_bar:
            return self.cheap_controls[n]
        return self.static_control

    def controls(self, m: int) -> np.ndarray:
        """Stacked ``(m, N)`` array of the controls applied at steps 0..m-1."""
        out = np.zeros((m, self.n_agents))
        k = min(m, self.n_bar)
        out[:k] = self.cheap_controls[:k]
        return out


def cheap_control(mean_state, kernel: Kernel, beta: float, target: float) -> np.ndarray:
    """``beta (target - x_k) - (1/N) sum_l p(x_k, x_l)(x_l - x_k)`` on the mean state."""
    x = np.asarray(mean_state, dtype=float)
    return beta * (target - x) - interaction(x, kernel)


def mean_step_exact(mean_state, params: TurnpikeParams, tau: float) -> np.ndarray:
    """Exponential Rosenbrock-Euler step of ``x' = beta (target - x)`` (exact)."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    x = np.asarray(mean_state, dtype=float)
    b = params.beta
    return x + tau * phi1(-b * tau) * b * (params.target - x)


def mean_step_euler(mean_state, params: TurnpikeParams, tau: float) -> np.ndarray:
    """Explicit Euler step of the same linear mean dynamics."""
    x = np.asarray(mean_state, dtype=float)
    return x + tau * params.beta * (params.target - x)


def lyapunov(mean_state, target: float) -> float:
    d = np.asarray(mean_state, dtype=float) - target
    return float(d @ d)


def turnpike_time(params: TurnpikeParams, mean_state0) -> float:
    """Smallest time after which the exact mean flow has ``L <= delta``."""
    L0 = lyapunov(mean_state0, params.target)
    if L0 <= params.delta:
        return 0.0
    return math.log(params.delta / L0) / (-2.0 * params.beta)


def snap_to_grid(t_bar: float, tau: float, horizon: Optional[float] = None) -> int:
    """Smallest ``n`` with ``n tau >= t_bar`` (rounding up keeps ``L <= delta``).

    ``horizon`` is the length ``T - t0`` of the time interval, if known.
    """
    if t_bar < 0:
        raise ValueError(f"t_bar must be non-negative, got {t_bar}")
    if horizon is not None and t_bar > horizon * (1 + 1e-12):
        raise HorizonError(
            f"turnpike time {t_bar:.6g} exceeds the horizon {horizon:.6g}; "
            f"final time must be at least t0 + {t_bar:.6g}")
    ratio = t_bar / tau
    n = math.ceil(ratio)
    # absorb rounding noise such as 0.54 / 0.02 = 27.000000000000004
    if n - ratio > 1 - 1e-9:
        n -= 1
    return int(n)
