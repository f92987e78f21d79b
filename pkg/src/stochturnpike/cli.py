"""Command-line front end.

Subcommands: ``uncontrolled``, ``turnpike``, ``convergence``, ``figures`` and
``check``.  Values come from the built-in defaults, then ``--config`` (YAML),
then explicit flags.  Exit codes: 0 success, 1 runtime or check failure,
2 usage error.  The last line printed on success is a ``key=value`` summary.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import convergence, cost, matfun, sim
from .control import TurnpikeParams
from .kernels import NonSymmetricCS, SymmetricCS

log = logging.getLogger("stochturnpike")

METHOD_CHOICES = ["em", "ee", "rk2", "erb", "serb"]

# flag dest -> ExperimentConfig key
_CONFIG_FLAGS = {
    "agents": "n_agents",
    "t0": "t0",
    "T": "T",
    "steps": "m",
    "sigma": "sigma",
    "paths": "n_bm",
    "gamma": "gamma",
    "method": "method",
    "seed": "seed",
    "out": "output_path",
    "linearization": "linearization",
}


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, help="master seed of all random streams")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="YAML file with ExperimentConfig keys")


def _system_flags(p: argparse.ArgumentParser):
    p.add_argument("--agents", type=int)
    p.add_argument("--t0", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--paths", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--method", choices=METHOD_CHOICES)
    p.add_argument("--kernel", choices=["sym", "nonsym"])
    p.add_argument("--eps", type=float)
    p.add_argument("--eps-min", type=float)
    p.add_argument("--eps-max", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--linearization", choices=["jacobian", "laplacian"])


def _control_flags(p: argparse.ArgumentParser):
    p.add_argument("--beta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--target", type=float)
    p.add_argument("--mode", choices=["mean-ode", "ensemble"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochturnpike", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("uncontrolled", help="run the dynamics with zero control")
    _common(p)
    _system_flags(p)

    p = sub.add_parser("turnpike", help="cheap control up to the turnpike time, then zero control")
    _common(p)
    _system_flags(p)
    _control_flags(p)

    p = sub.add_parser("convergence", help="observed orders of the integrators")
    _common(p)
    p.add_argument("--samples", type=int, default=1000, help="Monte Carlo paths for strong orders")

    p = sub.add_parser("figures", help="regenerate every figure panel")
    _common(p)
    p.add_argument("--only", help="panel name or group (test1, test1a, ..., test2)")
    p.add_argument("--paths", type=int)
    p.add_argument("--linearization", choices=["jacobian", "laplacian"])

    p = sub.add_parser("check", help="empirical checks of the turnpike inequalities")
    _common(p)
    p.add_argument("--gamma", type=float)
    p.add_argument("--samples", type=int, default=10_000)
    return parser


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a mapping")
    return data


def _kernel_settings(args, base: dict) -> dict:
    """Merge kernel flags over the config-file kernel, rejecting conflicts."""
    kd = dict(base.get("kernel") or {"type": "sym"})
    kind = getattr(args, "kernel", None)
    eps = getattr(args, "eps", None)
    eps_min = getattr(args, "eps_min", None)
    eps_max = getattr(args, "eps_max", None)
    if kind == "sym" and (eps_min is not None or eps_max is not None):
        other = "--eps-min" if eps_min is not None else "--eps-max"
        raise UsageError(f"conflicting flags: --kernel sym and {other}")
    if kind == "nonsym" and eps is not None:
        raise UsageError("conflicting flags: --kernel nonsym and --eps")
    if eps is not None and (eps_min is not None or eps_max is not None):
        other = "--eps-min" if eps_min is not None else "--eps-max"
        raise UsageError(f"conflicting flags: --eps and {other}")
    if kind is None and (eps_min is not None or eps_max is not None):
        kind = "nonsym"
    if kind is None and eps is not None:
        kind = "sym"
    if kind is not None and kind != kd.get("type", "sym"):
        kd = {"type": kind, "alpha": kd.get("alpha", 0.1)}
    if eps is not None:
        kd["epsilon"] = eps
    if eps_min is not None:
        kd["epsilon_min"] = eps_min
    if eps_max is not None:
        kd["epsilon_max"] = eps_max
    if getattr(args, "alpha", None) is not None:
        kd["alpha"] = args.alpha
    return kd


def config_from_args(args, controlled: bool) -> sim.ExperimentConfig:
    data = _load_config_file(args.config)
    for flag, key in _CONFIG_FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            data[key] = val
    kd = _kernel_settings(args, data)
    if kd.get("type") == "nonsym":
        kd["n_agents"] = data.get("n_agents", 100)
    data["kernel"] = kd
    if controlled:
        ctrl = dict(data.get("control") or {})
        for flag in ("beta", "delta", "target", "mode"):
            val = getattr(args, flag, None)
            if val is not None:
                ctrl[flag] = val
        data["control"] = ctrl
    else:
        data["control"] = None
    if "gamma" in data and not (0.0 < float(data["gamma"]) <= 1.0):
        raise UsageError(f"gamma must lie in (0, 1], got {data['gamma']}")
    try:
        return sim.ExperimentConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _summary_line(d: dict) -> str:
    def fmt(v):
        return f"{v:.6g}" if isinstance(v, float) else str(v)
    return " ".join(f"{k}={fmt(v)}" for k, v in d.items())


def cmd_uncontrolled(args) -> int:
    cfg = config_from_args(args, controlled=False)
    ens = sim.run_uncontrolled(cfg)
    summary = sim.run_summary(ens, cfg)
    files = sim.write_run(ens, cfg, summary, name=f"uncontrolled-{cfg.method}-m{cfg.m}")
    print(f"wrote {files['mean']}")
    print(_summary_line({"method": cfg.method, "m": cfg.m, **summary}))
    return 0


def cmd_turnpike(args) -> int:
    cfg = config_from_args(args, controlled=True)
    ens = sim.run_turnpike(cfg)
    summary = sim.run_summary(ens, cfg)
    files = sim.write_run(ens, cfg, summary,
                          name=f"turnpike-{cfg.method}-target{cfg.control.target:g}")
    print(f"turnpike time t_bar = {summary['t_bar']:.4f} (step {summary['n_bar']})")
    print(f"max |mean - target| at T = {summary['max_deviation_T']:.3e}")
    print(f"total cost = {summary['total_cost']:.6g}")
    print(f"cheap-control margin = {summary['cheap_margin']:.6g}")
    print(f"turnpike-theorem margin (lambda=0.5) = {summary['turnpike_margin']:.6g}")
    print(f"wrote {files['mean']}")
    print(_summary_line({"method": cfg.method, **summary}))
    return 0


def cmd_convergence(args) -> int:
    seed = args.seed if args.seed is not None else 0
    results = {}
    for method in ("ee", "rk2", "erb"):
        results[f"order_{method}"] = convergence.richardson_order(method)
        print(f"{method:5s} deterministic order (Richardson) = {results[f'order_{method}']:.3f}")
    for method in ("em", "serb"):
        results[f"strong_{method}"] = convergence.strong_order(method, n_paths=args.samples, seed=seed)
        print(f"{method:5s} strong order on OU = {results[f'strong_{method}']:.3f}")
    print(_summary_line(results))
    return 0


def figure_panels(seed=None, n_bm=None, linearization=None) -> dict:
    """Panel name -> ExperimentConfig for every reproduced figure."""
    base = sim.ExperimentConfig()
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if n_bm is not None:
        overrides["n_bm"] = n_bm
    if linearization is not None:
        overrides["linearization"] = linearization
    base = base.replace(**overrides)
    stiff = SymmetricCS(epsilon=5e-2, alpha=0.1)
    tp = lambda target: TurnpikeParams(beta=12.0, delta=2e-4, target=target)
    return {
        "test1a-em": base.replace(method="em", m=25, kernel=stiff),
        "test1a-serb": base.replace(method="serb", m=25, kernel=stiff),
        "test1b-em150": base.replace(method="em", m=150, kernel=stiff),
        "test1b-em1500": base.replace(method="em", m=1500, kernel=stiff),
        "test1c-em": base.replace(method="em", m=50, kernel=SymmetricCS(epsilon=1.0)),
        "test1c-serb": base.replace(method="serb", m=50, kernel=SymmetricCS(epsilon=1.0)),
        "test1d-ee": base.replace(method="ee", m=25, sigma=0.0, kernel=stiff),
        "test1d-rk2": base.replace(method="rk2", m=25, sigma=0.0, kernel=stiff),
        "test1d-erb": base.replace(method="erb", m=25, sigma=0.0, kernel=stiff),
        "test1e-ee1500": base.replace(method="ee", m=1500, sigma=0.0, kernel=stiff),
        "test1e-rk21500": base.replace(method="rk2", m=1500, sigma=0.0, kernel=stiff),
        "test2-em07": base.replace(method="em", m=50, kernel=stiff, control=tp(0.7)),
        "test2-serb07": base.replace(method="serb", m=50, kernel=stiff, control=tp(0.7)),
        "test2-serb-neg": base.replace(method="serb", m=50, kernel=stiff, control=tp(-1.7)),
        "test2-nonsym": base.replace(method="serb", m=50, control=tp(2.3),
                                     kernel=NonSymmetricCS(1e-2, 1e-1, base.n_agents, 0.1)),
        "test2-serb-neg16": base.replace(method="serb", m=50, kernel=stiff, control=tp(-1.6)),
    }


FIGURE_GROUPS = {
    "test1": ["test1a-em", "test1a-serb", "test1b-em150", "test1b-em1500"],
    "test1a": ["test1a-em", "test1a-serb"],
    "test1b": ["test1b-em150", "test1b-em1500"],
    "test1c": ["test1c-em", "test1c-serb"],
    "test1d": ["test1d-ee", "test1d-rk2", "test1d-erb"],
    "test1e": ["test1e-ee1500", "test1e-rk21500"],
    "test2": ["test2-em07", "test2-serb07", "test2-serb-neg", "test2-nonsym"],
}


def select_panels(only, panels: dict) -> list:
    if only is None:
        return list(panels)
    if only in FIGURE_GROUPS:
        return FIGURE_GROUPS[only]
    if only in panels:
        return [only]
    raise UsageError(f"unknown panel or group {only!r}; groups: {sorted(FIGURE_GROUPS)}")


def cmd_figures(args) -> int:
    file_cfg = _load_config_file(args.config)
    seed = args.seed if args.seed is not None else file_cfg.get("seed")
    panels = figure_panels(seed=seed, n_bm=args.paths, linearization=args.linearization)
    names = select_panels(args.only, panels)
    out = Path(args.out or file_cfg.get("output_path", "figures"))
    failed = []
    for name in names:
        cfg = panels[name].replace(output_path=str(out))
        try:
            ens = sim.run(cfg)
            summary = sim.run_summary(ens, cfg)
            sim.write_run(ens, cfg, summary, out_dir=out, name=name)
            print(f"{name}: ok ({_summary_line(summary)})")
        except Exception as exc:  # report per panel, keep going
            failed.append(name)
            print(f"{name}: FAILED ({exc})")
    if failed:
        print(f"failed panels: {', '.join(failed)}", file=sys.stderr)
        return 1
    print(_summary_line({"panels": len(names), "failed": 0, "out": str(out)}))
    return 0


def _report(name: str, margin: float, tol: float) -> bool:
    ok = margin >= -tol
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: min margin = {margin:.6g}")
    return ok


def cmd_check(args) -> int:
    if args.gamma is not None and not (0.0 < args.gamma <= 1.0):
        raise UsageError(f"gamma must lie in (0, 1], got {args.gamma}")
    file_cfg = _load_config_file(args.config)
    seed = args.seed if args.seed is not None else int(file_cfg.get("seed", 0))
    rng = np.random.default_rng(seed)
    ok = True

    worst = np.inf
    for _ in range(20):
        n = int(rng.integers(2, 41))
        A = rng.standard_normal((n, n))
        A *= rng.uniform(0.1, 50.0) / np.linalg.norm(A, 1)
        E, P1, P2 = matfun.phi_functions(A)
        I = np.eye(n)
        r1 = 1e-10 * (1 + np.linalg.norm(E, 1)) - np.linalg.norm(A @ P1 - (E - I), 1)
        r2 = 1e-10 * (1 + np.linalg.norm(P1, 1)) - np.linalg.norm(A @ P2 - (P1 - I), 1)
        worst = min(worst, r1, r2)
    ok &= _report("phi identities (20 random matrices)", worst, 0.0)

    worst = np.inf
    for _ in range(args.samples):
        n = int(rng.choice([2, 10, 100]))
        gamma = args.gamma if args.gamma is not None else float(1.0 - rng.uniform(0.0, 1.0))
        target = float(rng.uniform(-3, 3))
        p = cost.CostParams(gamma=gamma, target=target, n_agents=n)
        x = rng.normal(target, rng.uniform(0.01, 5.0), n)
        u = rng.normal(0.0, rng.uniform(0.01, 5.0), n)
        m = cost.dissipativity_margin(x, u, np.full(n, target), np.zeros(n), p)
        worst = min(worst, m)
    ok &= _report(f"dissipativity ({args.samples} samples)", worst, 1e-12)

    base = sim.ExperimentConfig(method="serb", m=50, seed=seed,
                                gamma=args.gamma if args.gamma is not None else 1.0,
                                control=TurnpikeParams(beta=12.0, delta=2e-4, target=0.7))
    ens = sim.run_turnpike(base)
    summary = sim.run_summary(ens, base, lam=0.5)
    ok &= _report("cheap-control bound (target 0.7)", summary["cheap_margin"], 1e-9)
    ok &= _report("turnpike theorem (target 0.7, lambda 0.5)", summary["turnpike_margin"], 0.0)
    if not ok:
        return 1
    print(_summary_line({"checks": 4, "failed": 0}))
    return 0


COMMANDS = {
    "uncontrolled": cmd_uncontrolled,
    "turnpike": cmd_turnpike,
    "convergence": cmd_convergence,
    "figures": cmd_figures,
    "check": cmd_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
