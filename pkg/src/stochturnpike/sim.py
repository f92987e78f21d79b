"""Experiment orchestration: sampling, trajectory generation and output files.

Random streams are derived from ``numpy.random.SeedSequence(seed, spawn_key=...)``
so each Brownian path owns an isolated substream: path ``p`` is the same no
matter how many paths are requested, and two runs that differ only in the
integrator consume identical increments.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .control import (
    ControlPlan,
    TurnpikeParams,
    cheap_control,
    lyapunov,
    mean_step_euler,
    mean_step_exact,
    snap_to_grid,
    turnpike_time,
)
from .dynamics import LINEARIZATIONS, ConsensusModel
from .integrators import StepInput, get_stepper
from .kernels import Kernel, NonSymmetricCS, SymmetricCS, kernel_from_dict

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "Ensemble",
    "SimulationError",
    "sample_initial_states",
    "sample_increments",
    "run_uncontrolled",
    "run_turnpike",
    "run",
    "ensemble_mean",
    "consensus_diameter",
    "run_summary",
    "write_run",
]

# spawn-key tags for the independent random streams
_INITIAL_STREAM = 0
_INCREMENT_STREAM = 1
_PER_PATH_INITIAL_STREAM = 2

# methods whose steps do not use the Brownian increments
_NOISELESS = {"ee", "rk2", "erb"}
# mean-dynamics integrator used in the cheap phase, per time-marching family
_MEAN_STEPPERS = {
    "em": mean_step_euler,
    "ee": mean_step_euler,
    "rk2": lambda x, p, tau: x + tau * p.beta * (p.target - x) * (1.0 - 0.5 * tau * p.beta),
    "erb": mean_step_exact,
    "serb": mean_step_exact,
}


class SimulationError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    n_agents: int = 100
    t0: float = 0.0
    T: float = 1.0
    m: int = 25
    sigma: float = 0.01
    n_bm: int = 20
    gamma: float = 1.0
    kernel: Kernel = field(default_factory=SymmetricCS)
    method: str = "serb"
    control: Optional[TurnpikeParams] = None
    seed: int = 20250101
    resample_initial: bool = False
    linearization: str = "jacobian"
    output_path: str = "out"

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.n_bm < 1:
            raise ValueError("n_bm must be at least 1")
        if self.n_agents < 2:
            raise ValueError("n_agents must be at least 2")
        if not self.T > self.t0:
            raise ValueError("T must exceed t0")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        get_stepper(self.method)
        if self.linearization not in LINEARIZATIONS:
            raise ValueError(f"linearization must be one of {LINEARIZATIONS}")
        if isinstance(self.kernel, NonSymmetricCS) and self.kernel.n_agents != self.n_agents:
            raise ValueError(
                f"non-symmetric kernel built for {self.kernel.n_agents} agents, "
                f"config has {self.n_agents}")

    @property
    def tau(self) -> float:
        return (self.T - self.t0) / self.m

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.tau * np.arange(self.m + 1)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["kernel"] = self.kernel.to_dict()
        d["control"] = None if self.control is None else {
            "beta": self.control.beta, "delta": self.control.delta,
            "target": self.control.target, "mode": self.control.mode}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if isinstance(d.get("kernel"), dict):
            kd = dict(d["kernel"])
            if kd.get("type") == "nonsym":
                kd.setdefault("n_agents", d.get("n_agents", 100))
            d["kernel"] = kernel_from_dict(kd)
        if isinstance(d.get("control"), dict):
            d["control"] = TurnpikeParams(**d["control"])
        return cls(**d)

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


@dataclass
class Ensemble:
    """Sampled trajectories of one run.

    ``paths`` is ``(n_bm, m + 1, N)``, ``increments`` is ``(n_bm, m, N)`` and
    ``controls`` is ``(m, N)`` (the same deterministic control acts on every path).
    """

    paths: np.ndarray
    increments: np.ndarray
    controls: np.ndarray
    times: np.ndarray
    plan: ControlPlan

    @property
    def mean(self) -> np.ndarray:
        return ensemble_mean(self)


def _generator(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def sample_initial_states(cfg: ExperimentConfig, path: Optional[int] = None) -> np.ndarray:
    """Uniform(-1, 1) positions; shared by all paths unless ``path`` is given."""
    if path is None:
        rng = _generator(cfg.seed, _INITIAL_STREAM)
    else:
        rng = _generator(cfg.seed, _PER_PATH_INITIAL_STREAM, path)
    return rng.uniform(-1.0, 1.0, size=cfg.n_agents)


def sample_increments(cfg: ExperimentConfig) -> np.ndarray:
    """``(n_bm, m, N)`` Normal(0, tau) increments, one substream per path."""
    scale = math.sqrt(cfg.tau)
    out = np.empty((cfg.n_bm, cfg.m, cfg.n_agents))
    for p in range(cfg.n_bm):
        out[p] = scale * _generator(cfg.seed, _INCREMENT_STREAM, p).standard_normal(
            (cfg.m, cfg.n_agents))
    return out


def _initial_paths(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.resample_initial:
        return np.stack([sample_initial_states(cfg, p) for p in range(cfg.n_bm)])
    return np.broadcast_to(sample_initial_states(cfg), (cfg.n_bm, cfg.n_agents)).copy()


def _advance(paths, increments, cfg, start, stop, control_of):
    """Step every path from index ``start`` to ``stop`` in place."""
    stepper = get_stepper(cfg.method)
    model = ConsensusModel(cfg.kernel, cfg.linearization)
    shared = ((cfg.sigma == 0.0 or cfg.method in _NOISELESS)
              and bool(np.all(paths[:, start] == paths[0, start])))
    n_paths = 1 if shared else paths.shape[0]
    for n in range(start, stop):
        u = control_of(n, paths[:, n])
        t = cfg.t0 + n * cfg.tau
        for p in range(n_paths):
            s = StepInput(x=paths[p, n], tau=cfg.tau, u=u, dW=increments[p, n],
                          sigma=cfg.sigma, t=t)
            try:
                nxt = stepper(s, model)
            except (np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
                raise SimulationError(f"{cfg.method} failed at step {n}, path {p}: {exc}") from exc
            if not np.all(np.isfinite(nxt)):
                raise SimulationError(f"{cfg.method} produced non-finite values at step {n}, path {p}")
            paths[p, n + 1] = nxt
        if shared:
            paths[1:, n + 1] = paths[0, n + 1]


def run_uncontrolled(cfg: ExperimentConfig) -> Ensemble:
    increments = sample_increments(cfg)
    paths = np.empty((cfg.n_bm, cfg.m + 1, cfg.n_agents))
    paths[:, 0] = _initial_paths(cfg)
    zero = np.zeros(cfg.n_agents)
    _advance(paths, increments, cfg, 0, cfg.m, lambda n, xs: zero)
    plan = ControlPlan.uncontrolled(cfg.n_agents, cfg.tau, cfg.t0)
    return Ensemble(paths, increments, plan.controls(cfg.m), cfg.times, plan)


def run_turnpike(cfg: ExperimentConfig) -> Ensemble:
    """Cheap control on ``[t0, t_bar]``, zero (static) control on ``[t_bar, T]``."""
    params = cfg.control
    if params is None:
        raise ValueError("run_turnpike needs a turnpike control configuration")
    increments = sample_increments(cfg)
    paths = np.empty((cfg.n_bm, cfg.m + 1, cfg.n_agents))
    paths[:, 0] = _initial_paths(cfg)
    mean0 = paths[:, 0].mean(axis=0)
    t_bar = turnpike_time(params, mean0)
    n_bar = min(snap_to_grid(t_bar, cfg.tau, horizon=cfg.T - cfg.t0), cfg.m)
    log.info("turnpike time %.6g -> switch at step %d", t_bar, n_bar)

    cheap = np.zeros((n_bar, cfg.n_agents))
    if params.mode == "mean-ode":
        mean_step = _MEAN_STEPPERS[cfg.method]
        xhat = mean0
        for n in range(n_bar):
            cheap[n] = cheap_control(xhat, cfg.kernel, params.beta, params.target)
            xhat = mean_step(xhat, params, cfg.tau)
            paths[:, n + 1] = xhat
    else:
        def control_of(n, xs):
            cheap[n] = cheap_control(xs.mean(axis=0), cfg.kernel, params.beta, params.target)
            return cheap[n]
        _advance(paths, increments, cfg, 0, n_bar, control_of)

    zero = np.zeros(cfg.n_agents)
    _advance(paths, increments, cfg, n_bar, cfg.m, lambda n, xs: zero)
    plan = ControlPlan(n_bar=n_bar, n_agents=cfg.n_agents, tau=cfg.tau, t0=cfg.t0,
                       t_bar=t_bar, cheap_controls=cheap)
    return Ensemble(paths, increments, plan.controls(cfg.m), cfg.times, plan)


def run(cfg: ExperimentConfig) -> Ensemble:
    return run_uncontrolled(cfg) if cfg.control is None else run_turnpike(cfg)


def ensemble_mean(e) -> np.ndarray:
    """Per-step, per-agent mean over paths, summed in path order."""
    paths = e.paths if isinstance(e, Ensemble) else np.asarray(e, dtype=float)
    if paths.shape[0] == 0:
        raise ValueError("empty ensemble")
    acc = np.zeros(paths.shape[1:])
    for p in range(paths.shape[0]):
        acc += paths[p]
    return acc / paths.shape[0]


def consensus_diameter(states) -> np.ndarray:
    """max - min over agents (last axis)."""
    states = np.asarray(states, dtype=float)
    return states.max(axis=-1) - states.min(axis=-1)


def run_summary(e: Ensemble, cfg: ExperimentConfig, lam: float = 0.5) -> dict:
    """Costs and inequality margins for a finished run."""
    from .cost import (CostParams, cheap_control_margin, theorem_constants, total_cost,
                       turnpike_theorem_check)

    mean = ensemble_mean(e)
    out = {
        "diameter_t0": float(consensus_diameter(mean[0])),
        "diameter_T": float(consensus_diameter(mean[-1])),
    }
    if cfg.control is None:
        return out
    params = cfg.control
    p = CostParams(gamma=cfg.gamma, target=params.target, n_agents=cfg.n_agents)
    cost = total_cost(e.paths, e.controls, cfg.tau, p)
    consts = theorem_constants(params.beta, cfg.kernel.bound(), cfg.gamma, cfg.tau, cfg.m, lam)
    out.update({
        "t_bar": e.plan.t_bar,
        "n_bar": e.plan.n_bar,
        "lyapunov_at_switch": lyapunov(mean[e.plan.n_bar], params.target),
        "max_deviation_T": float(np.max(np.abs(mean[-1] - params.target))),
        "total_cost": cost,
        "C0": consts.C0,
        "C1": consts.C1,
        "cheap_margin": cheap_control_margin(cost, mean[0], consts, p),
        "turnpike_margin": turnpike_theorem_check(e.paths, e.controls, consts, lam, cfg.tau, p),
    })
    return out


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


_PLOT_TEMPLATE = '''"""Plot the ensemble-mean trajectories of run {name!r}."""
import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
with open(here / "{mean_file}", newline="") as fh:
    rows = list(csv.reader(fh))[1:]
t = [float(r[0]) for r in rows]
agents = list(zip(*[[float(v) for v in r[1:]] for r in rows]))

fig, ax = plt.subplots(figsize=(6, 3.5))
for traj in agents:
    ax.plot(t, traj, lw=0.7)
{switch}ax.set_xlabel("t")
ax.set_ylabel("mean position")
ax.set_title("{title}")
fig.tight_layout()
fig.savefig(here / "{name}.png", dpi=150)
'''


def write_run(e: Ensemble, cfg: ExperimentConfig, summary: Optional[dict] = None,
              out_dir=None, name: str = "run") -> dict:
    """Write config echo, mean/path CSVs, the report and a plot script.

    Returns a mapping from artifact kind to file path.
    """
    out = Path(out_dir if out_dir is not None else cfg.output_path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "config": out / f"{name}_config.yaml",
            "mean": out / f"{name}_mean.csv",
            "paths": out / f"{name}_paths.csv",
            "report": out / f"{name}_report.csv",
            "plot": out / f"{name}_plot.py",
        }
        files["config"].write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))

        agents = [f"x{k + 1}" for k in range(cfg.n_agents)]
        mean = ensemble_mean(e)
        with open(files["mean"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", *agents])
            for t, row in zip(e.times, mean):
                w.writerow([_fmt(t), *map(_fmt, row)])
        with open(files["paths"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["path", "t", *agents])
            for p in range(e.paths.shape[0]):
                for t, row in zip(e.times, e.paths[p]):
                    w.writerow([p, _fmt(t), *map(_fmt, row)])
        with open(files["report"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["quantity", "value"])
            for k, v in (summary or {}).items():
                w.writerow([k, _fmt(v) if isinstance(v, float) else v])

        switch = ""
        if e.plan.n_bar > 0:
            switch = f'ax.axvline({_fmt(e.times[e.plan.n_bar])}, color="k", ls="--", lw=1)\n'
        files["plot"].write_text(_PLOT_TEMPLATE.format(
            name=name, mean_file=files["mean"].name, switch=switch,
            title=f"{name}: {cfg.method}, m={cfg.m}"))
    except OSError as exc:
        raise OSError(f"could not write run output to {out}: {exc}") from exc
    return {k: str(v) for k, v in files.items()}
