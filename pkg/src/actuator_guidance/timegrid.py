"""Uniform time grids.

RK4 samples every time-varying input at step ends and midpoints, so most
arrays in this package live on the *half grid* ``t_j = j * h / 2``,
``j = 0..2K``; node ``k`` of the step grid is half-grid index ``2k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    t_final: float = 1.0
    steps: int = 1000

    def __post_init__(self):
        if self.steps < 1 or not self.t_final > 0:
            raise ValueError("time grid needs t_final > 0 and steps >= 1")

    @property
    def h(self) -> float:
        return self.t_final / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.steps + 1)

    @property
    def half_nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, 2 * self.steps + 1)

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.steps + 1, self.h)
        w[[0, -1]] *= 0.5
        return w

    def integrate(self, samples: np.ndarray) -> float:
        """Trapezoid rule over nodal samples (first axis is time)."""
        return float(np.tensordot(self.trapezoid_weights(), samples, axes=(0, 0)))


def interleave(nodes: np.ndarray, mids: np.ndarray) -> np.ndarray:
    """Merge step-node values and midpoint values into half-grid order."""
    out = np.empty((nodes.shape[0] + mids.shape[0],) + nodes.shape[1:], dtype=nodes.dtype)
    out[0::2] = nodes
    out[1::2] = mids
    return out


def linear_half(nodes: np.ndarray) -> np.ndarray:
    return interleave(nodes, 0.5 * (nodes[:-1] + nodes[1:]))


def hermite_half(nodes: np.ndarray, rates: np.ndarray, h: float) -> np.ndarray:
    """Cubic Hermite midpoints from nodal values and time derivatives."""
    mids = 0.5 * (nodes[:-1] + nodes[1:]) + (h / 8.0) * (rates[:-1] - rates[1:])
    return interleave(nodes, mids)
