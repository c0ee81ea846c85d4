"""Joint guidance and LQR control of mobile actuators for 2D diffusion-advection.

A spectral Galerkin model of the PDE (:mod:`.spectral`) is driven by
Gaussian actuators (:mod:`.actuation`) that move under linear dynamics
(:mod:`.fleet`). For a given actuator path the optimal control comes from a
finite-horizon Riccati equation (:mod:`.riccati`); the path itself is
optimized by projected gradient descent with adjoint gradients
(:mod:`.sweep`). :mod:`.bench` runs the strategy comparison and the
dimension study, :mod:`.cli` exports results.
"""

from .bench import Strategy, build_scenario, convergence_study, run_strategy, solve, strategy_table
from .config import ScenarioConfig, load_config
from .spectral import assemble_A, build_basis, project_field
from .sweep import OptimizerConfig, optimize

__version__ = "0.1.0"

__all__ = [
    "OptimizerConfig",
    "ScenarioConfig",
    "Strategy",
    "assemble_A",
    "build_basis",
    "build_scenario",
    "convergence_study",
    "load_config",
    "optimize",
    "project_field",
    "run_strategy",
    "solve",
    "strategy_table",
]
