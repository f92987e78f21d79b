"""One-step time integrators.

Every stepper is a deterministic function of a :class:`StepInput` and a model
exposing ``drift(x, u, t)`` and ``jacobian(x, t)``; Brownian increments are
passed in, never sampled here.  The additive noise has diffusion ``sigma * I``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kernels import Kernel
from .dynamics import ConsensusModel
from .matfun import phi_action

__all__ = [
    "StepInput",
    "step_euler_maruyama",
    "step_explicit_euler",
    "step_heun",
    "step_exp_rosenbrock_euler",
    "step_serb",
    "step_serb_nonautonomous",
    "METHODS",
    "get_stepper",
]


@dataclass
class StepInput:
    x: np.ndarray
    tau: float
    u: Optional[np.ndarray] = None
    dW: Optional[np.ndarray] = None
    sigma: float = 0.0
    v: Optional[np.ndarray] = None
    t: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        n = self.x.shape
        if not self.tau > 0:
            raise ValueError(f"step size must be positive, got {self.tau}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        for name in ("u", "dW", "v"):
            val = getattr(self, name)
            if val is None:
                setattr(self, name, np.zeros(n))
            else:
                val = np.asarray(val, dtype=float)
                if val.shape != n:
                    raise ValueError(f"{name} has shape {val.shape}, expected {n}")
                setattr(self, name, val)


def _model(m):
    return ConsensusModel(m) if isinstance(m, Kernel) else m


def step_euler_maruyama(s: StepInput, model) -> np.ndarray:
    model = _model(model)
    return s.x + s.tau * model.drift(s.x, s.u, s.t) + s.sigma * s.dW


def step_explicit_euler(s: StepInput, model) -> np.ndarray:
    model = _model(model)
    return s.x + s.tau * model.drift(s.x, s.u, s.t)


def step_heun(s: StepInput, model) -> np.ndarray:
    """Explicit trapezoidal rule; deterministic, ``sigma`` is ignored."""
    model = _model(model)
    f0 = model.drift(s.x, s.u, s.t)
    stage = s.x + s.tau * f0
    f1 = model.drift(stage, s.u, s.t + s.tau)
    return s.x + 0.5 * s.tau * (f0 + f1)


def step_exp_rosenbrock_euler(s: StepInput, model) -> np.ndarray:
    """``x + tau phi_1(tau J) F(x)`` with ``J`` the Jacobian at ``x``."""
    model = _model(model)
    J = model.jacobian(s.x, s.t)
    F = model.drift(s.x, s.u, s.t)
    return s.x + phi_action(s.tau * J, s.tau * F)


def _serb(s: StepInput, model, with_v: bool) -> np.ndarray:
    model = _model(model)
    J = model.jacobian(s.x, s.t)
    F = model.drift(s.x, s.u, s.t)
    # H(x) = sigma I, applied after J as in H(x)(J dW).
    rhs = F + s.sigma * (J @ s.dW)
    b2 = s.tau**2 * s.v if with_v else None
    return s.x + phi_action(s.tau * J, s.tau * rhs, b2) + s.sigma * s.dW


def step_serb(s: StepInput, model) -> np.ndarray:
    """Stochastic exponential Rosenbrock-Euler step.

    ``x + tau phi_1(tau J)(F(x) + sigma J dW) + sigma dW``.  With ``sigma = 0``
    this is the deterministic exponential Rosenbrock-Euler step.
    """
    if s.sigma == 0.0:
        return step_exp_rosenbrock_euler(s, model)
    return _serb(s, model, with_v=False)


def step_serb_nonautonomous(s: StepInput, model) -> np.ndarray:
    """:func:`step_serb` plus the ``tau^2 phi_2(tau J) v`` correction."""
    if not np.any(s.v):
        return step_serb(s, model)
    return _serb(s, model, with_v=True)


METHODS = {
    "em": step_euler_maruyama,
    "ee": step_explicit_euler,
    "rk2": step_heun,
    "erb": step_exp_rosenbrock_euler,
    "serb": step_serb,
}


def get_stepper(name: str):
    try:
        return METHODS[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {sorted(METHODS)}") from None
