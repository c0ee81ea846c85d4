"""Joint actuator guidance and PDE control by forward-backward sweeps.

For a fixed guidance the inner LQR problem is solved exactly by the Riccati
equation, so the outer problem is over the guidance alone:

    minimize  <Z0, Pi(0) Z0> + J_m(xi, p)   over admissible p.

Its gradient comes from the costates of the Hamiltonian

    H = <Z, Q Z> + u'Ru + h(xi, t) + g(p, t)
        + lam' (A Z + B(M xi) u) + mu' (alpha xi + beta p),

integrated backward along the closed-loop optimal state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .actuation import input_location_gradient, project_input
from .fleet import (
    FleetDynamics,
    GuidanceProfile,
    TrajectoryProfile,
    project_guidance,
    propagate,
    validate_guidance,
)
from .riccati import (
    LQRWeights,
    OpenLoop,
    RiccatiSolution,
    SimResult,
    simulate_loop,
    solve_riccati,
    synthesize_feedback,
)
from .spectral import BasisSet
from .timegrid import TimeGrid

log = logging.getLogger(__name__)


def _zero_state_cost(xi, t):
    return np.zeros(np.shape(xi)[:-1])


def _zero_state_grad(xi, t):
    return np.zeros_like(xi)


def _zero_terminal(xi):
    return 0.0


def _zero_terminal_grad(xi):
    return np.zeros_like(xi)


@dataclass(frozen=True)
class MobilityCost:
    """Running and terminal actuator costs, all vectorized over leading axes.

    ``g(p, t)`` must be convex in ``p`` and bounded below by ``d1 |p|^2``.
    """

    g: Callable
    grad_g: Callable
    d1: float
    h: Callable = _zero_state_cost
    grad_h: Callable = _zero_state_grad
    h_f: Callable = _zero_terminal
    grad_h_f: Callable = _zero_terminal_grad

    @classmethod
    def quadratic(cls, weight: float = 0.1) -> "MobilityCost":
        """``g(p) = weight * p'p`` with no state costs."""
        if weight <= 0:
            raise ValueError("guidance weight must be positive")
        return cls(
            g=lambda p, t: weight * np.sum(np.square(p), axis=-1),
            grad_g=lambda p, t: 2.0 * weight * np.asarray(p),
            d1=weight,
        )

    def total(self, grid: TimeGrid, xi: np.ndarray, p: np.ndarray) -> float:
        t = grid.nodes
        running = self.h(xi, t) + self.g(p, t)
        return grid.integrate(running) + float(self.h_f(xi[-1]))


@dataclass(frozen=True)
class CostBreakdown:
    J_N: float
    J_m: float
    normalized_percent: float | None = None

    @property
    def total(self) -> float:
        return self.J_N + self.J_m

    def normalized(self, reference_total: float) -> "CostBreakdown":
        return CostBreakdown(self.J_N, self.J_m, 100.0 * self.total / reference_total)


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 500
    grad_rtol: float = 1e-4
    initial_step: float = 1.0
    shrink: float = 0.5
    armijo_c: float = 1e-4
    max_backtracks: int = 25
    barzilai_borwein: bool = True
    # stop when the objective drops by less than ftol * (1 + |J|) over ftol_window iterations
    ftol: float = 1e-5
    ftol_window: int = 5

    def __post_init__(self):
        if self.max_iters < 0 or self.max_backtracks < 1 or self.ftol_window < 1:
            raise ValueError("iteration limits must be positive")
        if self.ftol < 0:
            raise ValueError("ftol must be nonnegative")
        if not (self.grad_rtol > 0 and self.initial_step > 0 and self.armijo_c > 0):
            raise ValueError("optimizer tolerances and steps must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")


@dataclass(frozen=True)
class GuidanceProblem:
    """Everything that stays fixed while the guidance is optimized."""

    basis: BasisSet
    A: np.ndarray
    Z0: np.ndarray
    fleet: FleetDynamics
    sigmas: np.ndarray
    weights: LQRWeights
    mobility: MobilityCost
    grid: TimeGrid

    def input_half(self, traj: TrajectoryProfile) -> np.ndarray:
        pos = self.fleet.positions(traj.half_states())
        return project_input(pos, self.sigmas, self.basis)

    def input_gradient_half(self, traj: TrajectoryProfile) -> np.ndarray:
        pos = self.fleet.positions(traj.half_states())
        return input_location_gradient(pos, self.sigmas, self.basis)


@dataclass
class ForwardPass:
    """Outer-objective evaluation at one guidance."""

    p: GuidanceProfile
    traj: TrajectoryProfile
    B_half: np.ndarray
    riccati: RiccatiSolution
    J_N: float
    J_m: float
    sim: SimResult | None = None

    @property
    def objective(self) -> float:
        return self.J_N + self.J_m


def forward_pass(problem: GuidanceProblem, p: GuidanceProfile, simulate: bool = True) -> ForwardPass:
    traj = propagate(problem.fleet, p)
    B_half = problem.input_half(traj)
    sol = solve_riccati(problem.A, B_half, problem.weights, problem.grid, keep_history=False)
    fp = ForwardPass(
        p, traj, B_half, sol,
        J_N=sol.value(problem.Z0),
        J_m=problem.mobility.total(problem.grid, traj.states, p.values),
    )
    if simulate:
        complete_forward(problem, fp)
    return fp


def complete_forward(problem: GuidanceProblem, fp: ForwardPass) -> SimResult:
    """Closed-loop optimal state along the pass's trajectory (disturbance-free)."""
    if fp.sim is None:
        fb = synthesize_feedback(fp.riccati, problem.weights)
        fp.sim = simulate_loop(problem.A, fp.B_half, problem.Z0, problem.grid, problem.weights, fb)
    return fp.sim


def objective(problem: GuidanceProblem, p: GuidanceProfile) -> float:
    """Reduced objective ``<Z0, Pi(0) Z0> + J_m`` at guidance ``p``."""
    return forward_pass(problem, p, simulate=False).objective


def fixed_control_objective(problem: GuidanceProblem, p: GuidanceProfile, u: np.ndarray) -> float:
    """Joint objective ``J(Z, u) + J_m`` with the open-loop control ``u`` held fixed."""
    traj = propagate(problem.fleet, p)
    B_half = problem.input_half(traj)
    sim = simulate_loop(problem.A, B_half, problem.Z0, problem.grid, problem.weights, OpenLoop(u))
    return sim.cost + problem.mobility.total(problem.grid, traj.states, p.values)


def hamiltonian(problem: GuidanceProblem, Z, xi, u, p, lam, mu, t, B=None) -> float:
    """Pointwise Hamiltonian; ``B`` defaults to the input matrix at ``xi``."""
    fleet = problem.fleet
    if B is None:
        B = project_input(fleet.positions(np.asarray(xi, float)), problem.sigmas, problem.basis)
    mob = problem.mobility
    return float(
        Z @ problem.weights.Q @ Z
        + u @ problem.weights.R @ u
        + mob.h(xi, t)
        + mob.g(p, t)
        + lam @ (problem.A @ Z + B @ u)
        + mu @ (fleet.alpha @ xi + fleet.beta @ p)
    )


@dataclass
class Costates:
    lam: np.ndarray  # (K+1, N^2)
    mu: np.ndarray  # (K+1, n)


def backward_costates(problem: GuidanceProblem, fp: ForwardPass) -> Costates:
    """Backward RK4 for the costates of the Hamiltonian.

        lam' = -2 Q Z - A' lam,                         lam(t_f) = 2 Q_f Z(t_f)
        mu'  = -grad_h - M' s(lam, u) - alpha' mu,      mu(t_f)  = grad h_f(xi(t_f))

    with ``s_i = u_i * (d b_i / d position_i)' lam`` for actuator ``i``.
    """
    sim = complete_forward(problem, fp)
    grid = problem.grid
    K, h = grid.steps, grid.h
    fleet = problem.fleet
    Zh = sim.Z_half()
    uh = sim.u_half
    xih = fp.traj.half_states()
    dB = problem.input_gradient_half(fp.traj)  # (2K+1, m_a, 2, N^2)
    th = grid.half_nodes
    A, Q = problem.A, problem.weights.Q
    Mt = fleet.M.T
    alpha_t = fleet.alpha.T
    grad_h = problem.mobility.grad_h

    def rhs(j, lam, mu):
        dlam = -2.0 * (Q @ Zh[j]) - A.T @ lam
        s = (dB[j] @ lam) * uh[j][:, None]
        dmu = -grad_h(xih[j], th[j]) - Mt @ s.ravel() - alpha_t @ mu
        return dlam, dmu

    lam = np.empty((K + 1, A.shape[0]))
    mu = np.empty((K + 1, fleet.n))
    lam[K] = 2.0 * (problem.weights.Qf @ sim.Z[K])
    mu[K] = problem.mobility.grad_h_f(fp.traj.states[K])
    for k in range(K - 1, -1, -1):
        j = 2 * k + 2
        l1, m1 = rhs(j, lam[k + 1], mu[k + 1])
        l2, m2 = rhs(j - 1, lam[k + 1] - 0.5 * h * l1, mu[k + 1] - 0.5 * h * m1)
        l3, m3 = rhs(j - 1, lam[k + 1] - 0.5 * h * l2, mu[k + 1] - 0.5 * h * m2)
        l4, m4 = rhs(j - 2, lam[k + 1] - h * l3, mu[k + 1] - h * m3)
        lam[k] = lam[k + 1] - (h / 6.0) * (l1 + 2 * l2 + 2 * l3 + l4)
        mu[k] = mu[k + 1] - (h / 6.0) * (m1 + 2 * m2 + 2 * m3 + m4)
    return Costates(lam, mu)


def guidance_gradient(problem: GuidanceProblem, p: GuidanceProfile, costates: Costates) -> np.ndarray:
    """``dH/dp = grad_g(p) + beta' mu`` at every node, shape ``(K+1, m)``."""
    return problem.mobility.grad_g(p.values, problem.grid.nodes) + costates.mu @ problem.fleet.beta


def l2_inner(grid: TimeGrid, a: np.ndarray, b: np.ndarray) -> float:
    return float(grid.trapezoid_weights() @ np.sum(a * b, axis=-1))


@dataclass
class SweepState:
    p: GuidanceProfile
    forward: ForwardPass
    costates: Costates
    gradient: np.ndarray
    iteration: int = 0
    cost_history: list[float] = field(default_factory=list)
    step_history: list[float] = field(default_factory=list)

    @property
    def traj(self) -> TrajectoryProfile:
        return self.forward.traj

    @property
    def Z(self) -> np.ndarray:
        return self.forward.sim.Z


@dataclass
class OptimizeResult:
    p: GuidanceProfile
    traj: TrajectoryProfile
    u: np.ndarray  # optimal open-loop control at the nodes
    costs: CostBreakdown
    state: SweepState
    status: str  # "converged", "stagnated", "max_iters" or "stalled"
    message: str = ""
    projected_gradient_norm: float = float("nan")

    @property
    def objective(self) -> float:
        return self.costs.total

    @property
    def riccati(self) -> RiccatiSolution:
        return self.state.forward.riccati


def _sweep_state(problem, fp, it, history, steps) -> SweepState:
    cs = backward_costates(problem, fp)
    grad = guidance_gradient(problem, fp.p, cs)
    return SweepState(fp.p, fp, cs, grad, it, history, steps)


def optimize(
    problem: GuidanceProblem,
    p_init: GuidanceProfile | None = None,
    cfg: OptimizerConfig | None = None,
    callback: Callable[[SweepState], None] | None = None,
) -> OptimizeResult:
    """Projected gradient descent on the guidance with Armijo backtracking.

    Trial steps start from the Barzilai-Borwein length of the previous
    iteration (``cfg.initial_step`` on the first). Iteration stops when the
    projected-gradient L2 norm falls below ``grad_rtol * (1 + |J|)``
    (status ``converged``) or when the objective has stagnated over the last
    ``ftol_window`` iterations (status ``stagnated``). The adjoint gradient is
    exact only up to time-discretization error, so near the optimum the
    stagnation test usually fires first.
    """
    cfg = cfg or OptimizerConfig()
    grid = problem.grid
    if p_init is None:
        p_init = GuidanceProfile.zeros(grid, problem.fleet)
    p = project_guidance(p_init)

    fp = forward_pass(problem, p)
    state = _sweep_state(problem, fp, 0, [fp.objective], [])
    step = cfg.initial_step
    status, message = "max_iters", ""
    pg_norm = float("nan")

    for it in range(1, cfg.max_iters + 2):
        J = state.forward.objective
        G = state.gradient
        pg = p.values - project_guidance(p, p.values - G).values
        pg_norm = np.sqrt(max(l2_inner(grid, pg, pg), 0.0))
        if callback is not None:
            callback(state)
        if pg_norm <= cfg.grad_rtol * (1.0 + abs(J)):
            status = "converged"
            break
        hist = state.cost_history
        if cfg.ftol > 0 and len(hist) > cfg.ftol_window:
            if hist[-1 - cfg.ftol_window] - hist[-1] <= cfg.ftol * (1.0 + abs(J)):
                status = "stagnated"
                break
        if it > cfg.max_iters:
            break

        accepted = None
        trial = step
        for _ in range(cfg.max_backtracks):
            cand = project_guidance(p, p.values - trial * G)
            decrease = l2_inner(grid, G, cand.values - p.values)
            cfp = forward_pass(problem, cand, simulate=False)
            if cfp.objective <= J + cfg.armijo_c * decrease and decrease < 0:
                accepted = cfp
                break
            trial *= cfg.shrink
        if accepted is None:
            status = "stalled"
            message = (
                f"no Armijo decrease at iteration {it}: J={J:.10g}, "
                f"projected gradient norm={pg_norm:.3e}, last trial step={trial:.3e}"
            )
            log.warning(message)
            break

        new_state = _sweep_state(
            problem, accepted, it, state.cost_history + [accepted.objective],
            state.step_history + [trial],
        )
        if cfg.barzilai_borwein:
            dp = accepted.p.values - p.values
            dg = new_state.gradient - G
            curv = l2_inner(grid, dp, dg)
            step = l2_inner(grid, dp, dp) / curv if curv > 0 else trial
            step = float(np.clip(step, 1e-8, 1e8))
        else:
            step = cfg.initial_step
        log.debug("iter %d  J=%.10g  step=%.3e  |pg|=%.3e", it, accepted.objective, trial, pg_norm)
        p = accepted.p
        state = new_state

    fp = state.forward
    return OptimizeResult(
        p=p,
        traj=fp.traj,
        u=fp.sim.u.copy(),
        costs=CostBreakdown(fp.J_N, fp.J_m),
        state=state,
        status=status,
        message=message,
        projected_gradient_norm=float(pg_norm),
    )


def feasible(p: GuidanceProfile) -> bool:
    return not validate_guidance(p)
