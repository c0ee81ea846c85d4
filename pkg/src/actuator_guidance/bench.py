"""Strategy comparison and Galerkin-dimension convergence experiments."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .actuation import DisturbanceModel, circular_disturbance, project_input
from .config import ScenarioConfig, with_overrides
from .fleet import FleetDynamics, GuidanceBounds, GuidanceProfile, TrajectoryProfile, propagate
from .riccati import LQRWeights, LinearFeedback, OpenLoop, SimResult, simulate_loop, synthesize_feedback
from .spectral import BasisSet, assemble_A, build_basis, evaluate_field, project_field
from .sweep import (
    CostBreakdown,
    GuidanceProblem,
    MobilityCost,
    OptimizeResult,
    OptimizerConfig,
    optimize,
)
from .timegrid import TimeGrid

log = logging.getLogger(__name__)


class Strategy(enum.Enum):
    OPT_FEEDBACK = "opt. feedback"
    OPT_OPEN_LOOP = "opt. open-loop"
    SEMI_NAIVE = "semi-naive"
    NAIVE = "naive"
    NO_CONTROL = "no control"


TABLE_ORDER = (
    Strategy.OPT_FEEDBACK,
    Strategy.OPT_OPEN_LOOP,
    Strategy.SEMI_NAIVE,
    Strategy.NAIVE,
    Strategy.NO_CONTROL,
)


def initial_condition(name: str):
    if name == "bubble":
        return lambda x, y: 320.0 * (x - x**2) * (y - y**2)
    if name == "constant":
        return lambda x, y: np.ones_like(x)
    raise ValueError(f"unknown initial condition {name!r}")


@dataclass
class Scenario:
    """A configured experiment: Galerkin system, fleet, weights and disturbance."""

    cfg: ScenarioConfig
    problem: GuidanceProblem
    disturbance: DisturbanceModel | None
    _forcing: np.ndarray | None = field(default=None, repr=False)

    @property
    def basis(self) -> BasisSet:
        return self.problem.basis

    @property
    def grid(self) -> TimeGrid:
        return self.problem.grid

    def forcing(self) -> np.ndarray | None:
        """Disturbance forcing on the half grid (None when disabled)."""
        if self.disturbance is None:
            return None
        if self._forcing is None:
            self._forcing = self.disturbance.forcing(self.grid.half_nodes, self.basis)
        return self._forcing

    def bounds(self) -> GuidanceBounds:
        c = self.cfg
        return GuidanceBounds(c.guidance_lower, c.guidance_upper, c.p_max, c.a_max)

    def zero_guidance(self) -> GuidanceProfile:
        return GuidanceProfile.zeros(self.grid, self.problem.fleet, self.bounds())

    def optimizer_config(self) -> OptimizerConfig:
        o = self.cfg.optimizer
        return OptimizerConfig(
            max_iters=o.max_iters, grad_rtol=o.grad_rtol, initial_step=o.initial_step,
            shrink=o.shrink, armijo_c=o.armijo_c, barzilai_borwein=o.barzilai_borwein,
            ftol=o.ftol, ftol_window=o.ftol_window,
        )


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    basis = build_basis(cfg.bc, cfg.n_modes, cfg.quad_order)
    A = assemble_A(basis, cfg.diffusivity, cfg.velocity)
    Z0 = project_field(initial_condition(cfg.initial_condition), basis)
    fleet = FleetDynamics.single_integrators(cfg.actuator_positions)
    n, m = basis.dim, fleet.m_a
    weights = LQRWeights(
        cfg.state_weight * np.eye(n), cfg.terminal_weight * np.eye(n), cfg.control_weight * np.eye(m)
    )
    problem = GuidanceProblem(
        basis=basis,
        A=A,
        Z0=Z0,
        fleet=fleet,
        sigmas=np.full(m, cfg.sigma),
        weights=weights,
        mobility=MobilityCost.quadratic(cfg.mobility.weight),
        grid=TimeGrid(cfg.t_final, cfg.grid_steps),
    )
    d = cfg.disturbance
    dist = circular_disturbance(d.amplitude, d.sigma) if d.enabled else None
    return Scenario(cfg, problem, dist)


def initial_guess(scenario: Scenario) -> GuidanceProfile:
    # the straight-line path avoids the poorer basin that the zero start often ends in
    if scenario.cfg.optimizer.initial_guess == "zero":
        return scenario.zero_guidance()
    return naive_guidance(scenario)


def solve(scenario: Scenario, p_init: GuidanceProfile | None = None) -> OptimizeResult:
    p0 = p_init if p_init is not None else initial_guess(scenario)
    return optimize(scenario.problem, p0, scenario.optimizer_config())


def naive_guidance(scenario: Scenario) -> GuidanceProfile:
    """Constant speed from each start point to its mirror ``1 - xi0`` over the horizon."""
    fleet = scenario.problem.fleet
    speed = (1.0 - 2.0 * fleet.xi0) / scenario.grid.t_final
    p = scenario.zero_guidance()
    return p.with_values(np.tile(speed, (scenario.grid.steps + 1, 1)))


def local_feedback(scenario: Scenario, traj: TrajectoryProfile) -> LinearFeedback:
    """``u_i = -gain * z(position_i)`` sampled from the closed-loop Galerkin field."""
    fleet = scenario.problem.fleet
    pos = fleet.positions(traj.half_states())
    pos = np.clip(pos, 0.0, 1.0)
    phi = scenario.basis.evaluate(pos[..., 0], pos[..., 1])  # (2K+1, m_a, N^2)
    return LinearFeedback(scenario.cfg.local_gain * phi)


def run_strategy(
    strategy: Strategy,
    scenario: Scenario,
    opt: OptimizeResult | None = None,
    disturbance: bool = True,
) -> tuple[CostBreakdown, SimResult]:
    """Simulate one control/guidance pair; costs are not yet normalized."""
    prob = scenario.problem
    forcing = scenario.forcing() if disturbance else None
    mobility = prob.mobility

    if strategy is Strategy.NO_CONTROL:
        traj = propagate(prob.fleet, scenario.zero_guidance())
        B = prob.input_half(traj)
        sim = simulate_loop(prob.A, B, prob.Z0, prob.grid, prob.weights, None, forcing)
        return CostBreakdown(sim.cost, 0.0), sim

    if strategy is Strategy.NAIVE:
        p = naive_guidance(scenario)
        traj = propagate(prob.fleet, p)
        B = prob.input_half(traj)
        sim = simulate_loop(prob.A, B, prob.Z0, prob.grid, prob.weights,
                            local_feedback(scenario, traj), forcing)
        return CostBreakdown(sim.cost, mobility.total(prob.grid, traj.states, p.values)), sim

    if opt is None:
        raise ValueError(f"{strategy.value} needs an optimization result")
    traj = opt.traj
    B = opt.state.forward.B_half
    J_m = opt.costs.J_m
    if strategy is Strategy.OPT_FEEDBACK:
        control = synthesize_feedback(opt.riccati, prob.weights)
    elif strategy is Strategy.OPT_OPEN_LOOP:
        control = OpenLoop(opt.u)
    else:
        control = local_feedback(scenario, traj)
    sim = simulate_loop(prob.A, B, prob.Z0, prob.grid, prob.weights, control, forcing)
    return CostBreakdown(sim.cost, J_m), sim


@dataclass
class StrategyTable:
    rows: dict[Strategy, CostBreakdown]
    sims: dict[Strategy, SimResult]
    opt: OptimizeResult

    @property
    def totals(self) -> list[float]:
        return [self.rows[s].normalized_percent for s in TABLE_ORDER]

    @property
    def ordering_ok(self) -> bool:
        t = self.totals
        return all(a < b for a, b in zip(t, t[1:]))

    def ordering_violations(self) -> list[str]:
        t = self.totals
        return [
            f"{TABLE_ORDER[i].value} ({t[i]:.2f}%) >= {TABLE_ORDER[i + 1].value} ({t[i + 1]:.2f}%)"
            for i in range(len(t) - 1)
            if not t[i] < t[i + 1]
        ]


def strategy_table(
    scenario: Scenario, opt: OptimizeResult | None = None, disturbance: bool = True
) -> StrategyTable:
    """All five strategies, normalized by the no-control total."""
    if opt is None:
        opt = solve(scenario)
    raw = {s: run_strategy(s, scenario, opt, disturbance) for s in TABLE_ORDER}
    ref = raw[Strategy.NO_CONTROL][0].total
    rows = {s: c.normalized(ref) for s, (c, _) in raw.items()}
    table = StrategyTable(rows, {s: sim for s, (_, sim) in raw.items()}, opt)
    for v in table.ordering_violations():
        log.warning("strategy ordering violated: %s", v)
    return table


@dataclass
class ConvergenceReport:
    modes: list[int]
    costs: list[float]
    status: list[str]

    @property
    def reference(self) -> float:
        return self.costs[int(np.argmax(self.modes))]

    @property
    def normalized(self) -> list[float]:
        return [100.0 * c / self.reference for c in self.costs]

    def max_decrease(self) -> float:
        """Largest relative drop between consecutive dimensions (0 if monotone)."""
        c = np.asarray(self.costs)
        order = np.argsort(self.modes)
        c = c[order]
        drops = (c[:-1] - c[1:]) / c[1:]
        return float(max(drops.max(initial=0.0), 0.0))


def convergence_study(cfg: ScenarioConfig, modes=None, warm_start: bool = False) -> ConvergenceReport:
    """Optimal reduced cost for each Galerkin dimension in ``modes``.

    With ``warm_start`` each dimension starts from the previous optimal
    guidance instead of the configured initial guess.
    """
    modes = sorted(modes if modes is not None else cfg.convergence_modes)
    costs, status = [], []
    p_prev = None
    for N in modes:
        sc = build_scenario(with_overrides(cfg, n_modes=N))
        res = solve(sc, p_prev if warm_start else None)
        log.info("N=%d  J=%.10g  status=%s  iters=%d", N, res.objective, res.status, res.state.iteration)
        costs.append(res.objective)
        status.append(res.status)
        p_prev = res.p
    return ConvergenceReport(list(modes), costs, status)


def norm_history(sim: SimResult) -> np.ndarray:
    """L2 norm of the PDE state at each node (coefficient norm by orthonormality)."""
    return sim.norms


def field_snapshots(scenario: Scenario, sim: SimResult, times=None, raster: int | None = None):
    """Grid-sampled field at the requested times: ``{t: (raster, raster) array}``."""
    times = scenario.cfg.snapshot_times if times is None else times
    raster = scenario.cfg.raster if raster is None else raster
    xs = np.linspace(0.0, 1.0, raster)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    out = {}
    for t in times:
        k = int(round(t / scenario.grid.h))
        out[float(t)] = evaluate_field(sim.Z[k], scenario.basis, X, Y)
    return xs, out
