"""Mobile actuator team: linear vehicle dynamics and admissible guidance."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import block_diag

from .timegrid import TimeGrid, hermite_half


@dataclass(frozen=True)
class FleetDynamics:
    """Concatenated dynamics ``xi' = alpha xi + beta p`` of ``m_a`` actuators.

    The first two state components of every actuator block are its planar
    position; ``M`` picks them out in actuator order.
    """

    alpha: np.ndarray
    beta: np.ndarray
    xi0: np.ndarray
    state_sizes: tuple[int, ...]
    input_sizes: tuple[int, ...]

    @classmethod
    def from_blocks(cls, alphas, betas, xi0s) -> "FleetDynamics":
        alphas = [np.atleast_2d(np.asarray(a, float)) for a in alphas]
        betas = [np.atleast_2d(np.asarray(b, float)) for b in betas]
        xi0s = [np.asarray(x, float).ravel() for x in xi0s]
        if not (len(alphas) == len(betas) == len(xi0s)):
            raise ValueError("alpha, beta and xi0 need one block per actuator")
        for i, (a, b, x) in enumerate(zip(alphas, betas, xi0s)):
            n = a.shape[0]
            if a.shape != (n, n) or b.shape[0] != n or x.shape != (n,) or n < 2:
                raise ValueError(f"inconsistent block shapes for actuator {i}")
            if not _controllable(a, b):
                raise ValueError(f"actuator {i} dynamics are not controllable")
        return cls(
            alpha=block_diag(*alphas),
            beta=block_diag(*betas),
            xi0=np.concatenate(xi0s),
            state_sizes=tuple(a.shape[0] for a in alphas),
            input_sizes=tuple(b.shape[1] for b in betas),
        )

    @classmethod
    def single_integrators(cls, positions) -> "FleetDynamics":
        positions = np.asarray(positions, float)
        k = len(positions)
        return cls.from_blocks([np.zeros((2, 2))] * k, [np.eye(2)] * k, positions)

    @property
    def m_a(self) -> int:
        return len(self.state_sizes)

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @property
    def m(self) -> int:
        return self.beta.shape[1]

    @property
    def M(self) -> np.ndarray:
        sel = np.zeros((2 * self.m_a, self.n))
        offsets = np.concatenate([[0], np.cumsum(self.state_sizes)[:-1]])
        for i, off in enumerate(offsets):
            sel[2 * i, off] = 1.0
            sel[2 * i + 1, off + 1] = 1.0
        return sel

    def positions(self, states: np.ndarray) -> np.ndarray:
        """Actuator positions ``(..., m_a, 2)`` from states ``(..., n)``."""
        return (states @ self.M.T).reshape(states.shape[:-1] + (self.m_a, 2))

    def rate(self, xi: np.ndarray, p: np.ndarray) -> np.ndarray:
        return xi @ self.alpha.T + p @ self.beta.T


def _controllable(a: np.ndarray, b: np.ndarray) -> bool:
    n = a.shape[0]
    blocks = [b]
    for _ in range(n - 1):
        blocks.append(a @ blocks[-1])
    return np.linalg.matrix_rank(np.hstack(blocks)) == n


@dataclass(frozen=True)
class GuidanceBounds:
    """Admissible guidance: componentwise box, per-actuator magnitude and rate limits."""

    lower: float | np.ndarray = -100.0
    upper: float | np.ndarray = 100.0
    p_max: float = 100.0
    a_max: float = 100.0


@dataclass(frozen=True)
class GuidanceProfile:
    grid: TimeGrid
    values: np.ndarray  # (K+1, m)
    input_sizes: tuple[int, ...]
    bounds: GuidanceBounds = field(default_factory=GuidanceBounds)

    def __post_init__(self):
        if self.values.shape != (self.grid.steps + 1, sum(self.input_sizes)):
            raise ValueError(
                f"guidance values have shape {self.values.shape}, expected "
                f"{(self.grid.steps + 1, sum(self.input_sizes))}"
            )

    @classmethod
    def zeros(cls, grid: TimeGrid, fleet: FleetDynamics, bounds=None) -> "GuidanceProfile":
        return cls(grid, np.zeros((grid.steps + 1, fleet.m)), fleet.input_sizes,
                   bounds or GuidanceBounds())

    def with_values(self, values: np.ndarray) -> "GuidanceProfile":
        return replace(self, values=np.asarray(values, dtype=float))

    def group_norms(self, values: np.ndarray | None = None) -> np.ndarray:
        """Per-actuator 2-norms, shape ``(K+1, m_a)``."""
        v = self.values if values is None else values
        splits = np.cumsum(self.input_sizes)[:-1]
        return np.column_stack([np.linalg.norm(b, axis=-1) for b in np.split(v, splits, axis=-1)])


@dataclass(frozen=True)
class TrajectoryProfile:
    grid: TimeGrid
    states: np.ndarray  # (K+1, n)
    rates: np.ndarray  # (K+1, n), time derivative at the nodes

    def half_states(self) -> np.ndarray:
        return hermite_half(self.states, self.rates, self.grid.h)


def propagate(fleet: FleetDynamics, p: GuidanceProfile, xi0=None) -> TrajectoryProfile:
    """RK4 solution of the actuator dynamics on the guidance grid.

    The guidance is linearly interpolated to step midpoints.
    """
    h = p.grid.h
    P = p.values
    xi = np.empty((P.shape[0], fleet.n))
    xi[0] = fleet.xi0 if xi0 is None else xi0
    f = fleet.rate
    for k in range(P.shape[0] - 1):
        pm = 0.5 * (P[k] + P[k + 1])
        k1 = f(xi[k], P[k])
        k2 = f(xi[k] + 0.5 * h * k1, pm)
        k3 = f(xi[k] + 0.5 * h * k2, pm)
        k4 = f(xi[k] + h * k3, P[k + 1])
        xi[k + 1] = xi[k] + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return TrajectoryProfile(p.grid, xi, f(xi, P))


@dataclass(frozen=True)
class Violation:
    kind: str  # "box", "magnitude" or "rate"
    index: int
    component: int
    value: float
    bound: float


def validate_guidance(p: GuidanceProfile, tol: float = 1e-9) -> list[Violation]:
    """All box, magnitude and rate violations of ``p``; empty iff admissible."""
    b = p.bounds
    V = p.values
    out: list[Violation] = []
    lo = np.broadcast_to(b.lower, V.shape[1:])
    hi = np.broadcast_to(b.upper, V.shape[1:])
    for k, c in zip(*np.nonzero((V < lo - tol) | (V > hi + tol))):
        bound = lo[c] if V[k, c] < lo[c] else hi[c]
        out.append(Violation("box", int(k), int(c), float(V[k, c]), float(bound)))
    norms = p.group_norms()
    for k, i in zip(*np.nonzero(norms > b.p_max + tol)):
        out.append(Violation("magnitude", int(k), int(i), float(norms[k, i]), b.p_max))
    step = b.a_max * p.grid.h
    jumps = p.group_norms(np.diff(V, axis=0))
    for k, i in zip(*np.nonzero(jumps > step + tol)):
        out.append(Violation("rate", int(k) + 1, int(i), float(jumps[k, i]), step))
    return out


def project_guidance(p: GuidanceProfile, values: np.ndarray | None = None) -> GuidanceProfile:
    """Map raw guidance values onto the admissible set.

    Clips to the box, scales each actuator's input into the ``p_max`` ball,
    then rate-limits in one forward pass. Input that is feasible up to rounding
    is returned unchanged, which makes the map idempotent.
    """
    b = p.bounds
    V = np.array(p.values if values is None else values, dtype=float)
    slack = 1e-12 * max(1.0, b.p_max)
    if not validate_guidance(p.with_values(V), tol=slack):
        return p.with_values(V)
    V = np.clip(V, b.lower, b.upper)
    splits = np.cumsum(p.input_sizes)[:-1]
    blocks = np.split(np.arange(V.shape[1]), splits)
    for idx in blocks:
        nrm = np.linalg.norm(V[:, idx], axis=1, keepdims=True)
        V[:, idx] *= np.minimum(1.0, b.p_max / np.maximum(nrm, 1e-300))
    step = b.a_max * p.grid.h
    for k in range(1, V.shape[0]):
        for idx in blocks:
            d = V[k, idx] - V[k - 1, idx]
            nd = np.linalg.norm(d)
            if nd > step:
                V[k, idx] = V[k - 1, idx] + d * (step / nd)
    return p.with_values(V)
