"""Controlled stochastic consensus dynamics with exponential integrators and turnpike control."""
from .control import (ControlPlan, TurnpikeParams, cheap_control, lyapunov, mean_step_exact,
                      snap_to_grid, turnpike_time)
from .kernels import ConstantKernel, CustomKernel, NonSymmetricCS, SymmetricCS
from .matfun import expm, phi1, phi2, phi_action, phi_functions
from .sim import (Ensemble, ExperimentConfig, ensemble_mean, run, run_summary, run_turnpike,
                  run_uncontrolled, write_run)

__version__ = "0.1.0"
