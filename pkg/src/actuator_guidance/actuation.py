"""Truncated Gaussian actuation kernels and their Galerkin projections.

Each actuator dispenses ``u_i * b(x - x_i)`` with

    b(s) = exp(-|s|^2 / sigma^2) / (2 pi sigma^2)   if max(|s_x|, |s_y|) <= sigma,

and zero elsewhere. Both kernel and basis factor over the two axes, so
projections reduce to 1D integrals over the clipped support interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spectral import BasisSet

DEFAULT_BOX_POINTS = 12


@dataclass(frozen=True)
class GaussianKernel:
    sigma: float
    center: tuple[float, float]

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"kernel width must be positive, got {self.sigma}")

    @property
    def peak(self) -> float:
        return 1.0 / (2.0 * np.pi * self.sigma**2)


def kernel_eval(k: GaussianKernel, x, y) -> np.ndarray:
    """Truncated kernel value at (x, y); exactly zero outside the sigma-box."""
    dx = np.asarray(x, dtype=float) - k.center[0]
    dy = np.asarray(y, dtype=float) - k.center[1]
    inside = (np.abs(dx) <= k.sigma) & (np.abs(dy) <= k.sigma)
    val = k.peak * np.exp(-(dx**2 + dy**2) / k.sigma**2)
    return np.where(inside, val, 0.0)


def _box_integrals(basis: BasisSet, c, sigma, npts: int, with_derivative: bool):
    """1D integrals over ``[c - sigma, c + sigma] & [0, 1]`` against each basis factor.

    Returns ``I`` (and ``dI/dc`` when requested), shape ``c.shape + (N,)``.
    ``I[..., i] = int exp(-(x-c)^2/sigma^2) psi_i(x) dx``.
    """
    c = np.asarray(c, dtype=float)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), c.shape)
    lo = np.maximum(c - sigma, 0.0)
    hi = np.minimum(c + sigma, 1.0)
    empty = hi <= lo
    hi = np.where(empty, lo, hi)

    t, w = np.polynomial.legendre.leggauss(npts)
    half = 0.5 * (hi - lo)
    x = 0.5 * (hi + lo)[..., None] + half[..., None] * t
    wx = half[..., None] * w
    f = np.exp(-((x - c[..., None]) ** 2) / sigma[..., None] ** 2) * wx
    I = np.einsum("...q,...qi->...i", f, basis.eval_1d(x))
    if not with_derivative:
        return I

    dI = np.einsum("...q,...qi->...i", f, basis.eval_1d(x, 1))
    # moving clip points contribute where the support leaves [0, 1]
    gauss = lambda s: np.exp(-(s**2) / sigma**2)
    clip_lo = (c - sigma < 0.0) & ~empty
    clip_hi = (c + sigma > 1.0) & ~empty
    psi0 = basis.eval_1d(0.0)
    psi1 = basis.eval_1d(1.0)
    dI = dI + np.where(clip_lo, gauss(-c), 0.0)[..., None] * psi0
    dI = dI - np.where(clip_hi, gauss(1.0 - c), 0.0)[..., None] * psi1
    return I, dI


def project_input(positions, sigmas, basis: BasisSet, npts: int = DEFAULT_BOX_POINTS) -> np.ndarray:
    """Galerkin input matrix ``B_N`` for actuators at ``positions``.

    ``positions`` has shape ``(..., m, 2)``; the result has shape ``(..., N**2, m)``
    with column ``i`` the projection of actuator ``i``'s kernel.
    """
    pos = np.asarray(positions, dtype=float)
    sig = np.broadcast_to(np.asarray(sigmas, dtype=float), pos.shape[:-1])
    Ix = _box_integrals(basis, pos[..., 0], sig, npts, False)
    Iy = _box_integrals(basis, pos[..., 1], sig, npts, False)
    peak = 1.0 / (2.0 * np.pi * sig**2)
    cols = (peak[..., None, None] * Ix[..., :, None] * Iy[..., None, :])
    cols = cols.reshape(pos.shape[:-1] + (basis.dim,))
    return np.swapaxes(cols, -1, -2)


def input_location_gradient(
    positions, sigmas, basis: BasisSet, npts: int = DEFAULT_BOX_POINTS
) -> np.ndarray:
    """Derivatives of each input column w.r.t. its actuator's center.

    Returns shape ``(..., m, 2, N**2)``: ``[..., i, 0]`` is ``d b_i / d x_i``
    and ``[..., i, 1]`` is ``d b_i / d y_i``. The support box travels with
    the center, so only clipping against the domain edge adds endpoint terms.
    """
    pos = np.asarray(positions, dtype=float)
    sig = np.broadcast_to(np.asarray(sigmas, dtype=float), pos.shape[:-1])
    Ix, dIx = _box_integrals(basis, pos[..., 0], sig, npts, True)
    Iy, dIy = _box_integrals(basis, pos[..., 1], sig, npts, True)
    peak = (1.0 / (2.0 * np.pi * sig**2))[..., None, None]
    shape = pos.shape[:-1] + (basis.dim,)
    gx = (peak * dIx[..., :, None] * Iy[..., None, :]).reshape(shape)
    gy = (peak * Ix[..., :, None] * dIy[..., None, :]).reshape(shape)
    return np.stack([gx, gy], axis=-2)


@dataclass(frozen=True)
class DisturbanceModel:
    """Mobile source ``amplitude * b(x - x_d(t))`` added to the PDE right-hand side."""

    amplitude: float
    trajectory: Callable[[np.ndarray], np.ndarray]
    sigma: float = 0.05

    def positions(self, t) -> np.ndarray:
        return np.asarray(self.trajectory(np.asarray(t, dtype=float)), dtype=float)

    def forcing(self, t, basis: BasisSet) -> np.ndarray:
        """Projected forcing at times ``t``, shape ``t.shape + (N**2,)``."""
        pos = self.positions(t)[..., None, :]
        return self.amplitude * project_input(pos, self.sigma, basis)[..., 0]


def circular_trajectory(t):
    t = np.asarray(t, dtype=float)
    return np.stack(
        [0.5 + 0.3 * np.sin(2 * np.pi * t), 0.5 + 0.3 * np.cos(2 * np.pi * t)], axis=-1
    )


def circular_disturbance(amplitude: float = 0.5, sigma: float = 0.05) -> DisturbanceModel:
    return DisturbanceModel(amplitude, circular_trajectory, sigma)
