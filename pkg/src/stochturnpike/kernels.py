"""Interaction kernels p(x, y) for the consensus model.

All kernels are vectorized over ``x`` and ``y`` and take the 0-based index of
the influencing agent (``col``) so that column-weighted kernels fit the same
interface.  Symmetric kernels simply ignore it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Kernel",
    "SymmetricCS",
    "NonSymmetricCS",
    "CustomKernel",
    "ConstantKernel",
    "kernel_from_dict",
]


class UnsupportedKernelError(ValueError):
    pass


class Kernel:
    """Base class; subclasses are frozen dataclasses."""

    symmetric = False
    translation_invariant = False

    def eval(self, x, y, col=None):
        raise NotImplementedError

    def d_dx(self, x, y, col=None):
        raise NotImplementedError

    def d_dy(self, x, y, col=None):
        raise NotImplementedError

    def bound(self) -> float:
        raise NotImplementedError

    def matrix(self, x: np.ndarray) -> np.ndarray:
        """Interaction matrix ``P[k, l] = p(x_k, x_l)``."""
        x = np.asarray(x, dtype=float)
        cols = np.arange(x.size)
        return self.eval(x[:, None], x[None, :], cols[None, :])

    def partials(self, x: np.ndarray):
        """Matrices of dp/dx and dp/dy evaluated at ``(x_k, x_l)``."""
        x = np.asarray(x, dtype=float)
        cols = np.arange(x.size)[None, :]
        return (self.d_dx(x[:, None], x[None, :], cols),
                self.d_dy(x[:, None], x[None, :], cols))

    def to_dict(self) -> dict:
        raise UnsupportedKernelError(f"{type(self).__name__} cannot be serialized")


def _cs_value(x, y, eps, alpha):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return 1.0 / (eps * (alpha * alpha + d * d))


def _cs_dx(x, y, eps, alpha):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    den = alpha * alpha + d * d
    return -2.0 * d / (eps * den * den)


@dataclass(frozen=True)
class SymmetricCS(Kernel):
    """Cucker-Smale type kernel ``1 / (eps (alpha^2 + |x - y|^2))``."""

    epsilon: float = 5e-2
    alpha: float = 0.1

    symmetric = True
    translation_invariant = True

    def __post_init__(self):
        if not (self.epsilon > 0 and self.alpha > 0):
            raise ValueError("epsilon and alpha must be positive")

    def eval(self, x, y, col=None):
        return _cs_value(x, y, self.epsilon, self.alpha)

    def d_dx(self, x, y, col=None):
        return _cs_dx(x, y, self.epsilon, self.alpha)

    def d_dy(self, x, y, col=None):
        return -_cs_dx(x, y, self.epsilon, self.alpha)

    def bound(self) -> float:
        return 1.0 / (self.epsilon * self.alpha**2)

    def to_dict(self) -> dict:
        return {"type": "sym", "epsilon": self.epsilon, "alpha": self.alpha}


@dataclass(frozen=True)
class NonSymmetricCS(Kernel):
    """Column-weighted CS kernel ``1 / (eps_l (alpha^2 + |x - y|^2))``.

    ``eps_l`` grows linearly from ``epsilon_min`` (first agent) to
    ``epsilon_max`` (last agent); ``l`` indexes the influencing agent.
    """

    epsilon_min: float = 1e-2
    epsilon_max: float = 1e-1
    n_agents: int = 100
    alpha: float = 0.1

    translation_invariant = True

    def __post_init__(self):
        if not (self.epsilon_min > 0 and self.epsilon_max > 0 and self.alpha > 0):
            raise ValueError("epsilon_min, epsilon_max and alpha must be positive")
        if self.epsilon_min > self.epsilon_max:
            raise ValueError("epsilon_min must not exceed epsilon_max")
        if self.n_agents < 2:
            raise ValueError("n_agents must be at least 2")

    def weights(self, col) -> np.ndarray:
        col = np.asarray(col)
        if np.any(col < 0) or np.any(col >= self.n_agents):
            raise IndexError(f"agent index out of range 0..{self.n_agents - 1}")
        span = self.epsilon_max - self.epsilon_min
        return self.epsilon_min + span * col / (self.n_agents - 1)

    def eval(self, x, y, col=None):
        return _cs_value(x, y, self.weights(col), self.alpha)

    def d_dx(self, x, y, col=None):
        return _cs_dx(x, y, self.weights(col), self.alpha)

    def d_dy(self, x, y, col=None):
        return -_cs_dx(x, y, self.weights(col), self.alpha)

    def bound(self) -> float:
        return 1.0 / (self.epsilon_min * self.alpha**2)

    def to_dict(self) -> dict:
        return {
            "type": "nonsym",
            "epsilon_min": self.epsilon_min,
            "epsilon_max": self.epsilon_max,
            "n_agents": self.n_agents,
            "alpha": self.alpha,
        }


@dataclass(frozen=True)
class CustomKernel(Kernel):
    """User-supplied kernel.  Callables must broadcast like numpy ufuncs."""

    func: Callable
    dfdx: Callable
    dfdy: Callable
    declared_bound: Optional[float] = None
    symmetric: bool = field(default=False)
    translation_invariant: bool = field(default=False)

    def eval(self, x, y, col=None):
        return np.broadcast_to(self.func(x, y, col), np.broadcast(x, y).shape)

    def d_dx(self, x, y, col=None):
        return np.broadcast_to(self.dfdx(x, y, col), np.broadcast(x, y).shape)

    def d_dy(self, x, y, col=None):
        return np.broadcast_to(self.dfdy(x, y, col), np.broadcast(x, y).shape)

    def bound(self) -> float:
        if self.declared_bound is None:
            raise UnsupportedKernelError("custom kernel has no declared bound")
        return float(self.declared_bound)


def ConstantKernel(value: float = 1.0) -> CustomKernel:
    """p(x, y) = value; handy for linear consensus tests."""
    return CustomKernel(
        func=lambda x, y, col=None: np.full(np.broadcast(x, y).shape, float(value)),
        dfdx=lambda x, y, col=None: np.zeros(np.broadcast(x, y).shape),
        dfdy=lambda x, y, col=None: np.zeros(np.broadcast(x, y).shape),
        declared_bound=abs(value),
        symmetric=True,
        translation_invariant=True,
    )


def kernel_from_dict(d: dict) -> Kernel:
    kind = d.get("type", "sym")
    if kind == "sym":
        return SymmetricCS(epsilon=float(d.get("epsilon", 5e-2)),
                           alpha=float(d.get("alpha", 0.1)))
    if kind == "nonsym":
        return NonSymmetricCS(epsilon_min=float(d.get("epsilon_min", 1e-2)),
                              epsilon_max=float(d.get("epsilon_max", 1e-1)),
                              n_agents=int(d.get("n_agents", 100)),
                              alpha=float(d.get("alpha", 0.1)))
    raise ValueError(f"unknown kernel type {kind!r}")
