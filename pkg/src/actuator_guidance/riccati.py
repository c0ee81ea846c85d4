"""Finite-horizon LQR for the Galerkin system along a fixed actuator trajectory.

Time-varying quantities (input matrix, disturbance forcing, feedback gains)
are sampled on the half grid of a :class:`~actuator_guidance.timegrid.TimeGrid`
so that every RK4 stage reads a stored sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timegrid import TimeGrid, hermite_half, linear_half


class RiccatiEscape(ArithmeticError):
    """The backward Riccati integration left the configured norm ceiling."""


@dataclass(frozen=True)
class LQRWeights:
    Q: np.ndarray
    Qf: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        for name in ("Q", "Qf", "R"):
            M = np.asarray(getattr(self, name), dtype=float)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise ValueError(f"{name} must be a square matrix")
            if np.abs(M - M.T).max(initial=0.0) > 1e-12:
                raise ValueError(f"{name} must be symmetric")
            object.__setattr__(self, name, M)
        if np.linalg.eigvalsh(self.Q).min() < -1e-10 or np.linalg.eigvalsh(self.Qf).min() < -1e-10:
            raise ValueError("state weights must be positive semidefinite")
        if np.linalg.eigvalsh(self.R).min() <= 1e-12:
            raise ValueError("control weight R must be positive definite")

    @classmethod
    def identity_state(cls, n: int, R) -> "LQRWeights":
        return cls(np.eye(n), np.eye(n), np.atleast_2d(np.asarray(R, float)))

    @property
    def R_inv(self) -> np.ndarray:
        return np.linalg.inv(self.R)


@dataclass(frozen=True)
class RiccatiSolution:
    """Backward Riccati solution.

    ``BtPi[j] = B(t_j)^T Pi(t_j)`` on the half grid (midpoint values of ``Pi``
    are the average of the neighbouring nodes). ``Pi`` holds every nodal
    matrix when the history was kept, otherwise only ``Pi(0)`` and ``Pi(t_f)``.
    """

    grid: TimeGrid
    Pi0: np.ndarray
    BtPi: np.ndarray
    Pi: np.ndarray | None
    max_asymmetry: float

    def value(self, Z0: np.ndarray) -> float:
        return float(Z0 @ self.Pi0 @ Z0)


def solve_riccati(
    A: np.ndarray,
    B_half: np.ndarray,
    weights: LQRWeights,
    grid: TimeGrid,
    keep_history: bool = True,
    ceiling: float = 1e12,
    method: str = "auto",
) -> RiccatiSolution:
    """Integrate ``-Pi' = A^T Pi + Pi A + Q - Pi B R^-1 B^T Pi`` backward by RK4.

    ``B_half`` has shape ``(2K+1, n, m)``. ``Pi`` is symmetrized after every
    step; the largest asymmetry removed is reported in ``max_asymmetry``.

    ``method="modal"`` integrates ``X = W^T Pi W`` where ``A = W diag(lam) W^-1``,
    which turns the ``Pi A`` products into elementwise scalings. RK4 commutes
    with the linear change of variables, so both methods give the same
    iterates up to rounding. ``"auto"`` picks the modal form when ``A`` has a
    real, well-conditioned eigenbasis (always the case for the Galerkin
    advection-diffusion matrix).
    """
    K = grid.steps
    n = A.shape[0]
    if B_half.shape[0] != 2 * K + 1 or B_half.shape[1] != n:
        raise ValueError(f"B_half shape {B_half.shape} does not match grid/state size")
    if method not in ("auto", "modal", "dense"):
        raise ValueError(f"unknown Riccati method {method!r}")
    if method != "dense":
        modes = _real_eigenbasis(A)
        if modes is not None:
            return _solve_modal(modes, B_half, weights, grid, keep_history, ceiling)
        if method == "modal":
            raise ValueError("A has no real well-conditioned eigenbasis")
    return _solve_dense(A, B_half, weights, grid, keep_history, ceiling)


def _real_eigenbasis(A: np.ndarray, max_cond: float = 1e6):
    lam, W = np.linalg.eig(A)
    scale = 1.0 + np.abs(lam).max()
    if np.abs(lam.imag).max() > 1e-10 * scale or np.abs(W.imag).max() > 1e-10:
        return None
    W = W.real
    if np.linalg.cond(W) > max_cond:
        return None
    return lam.real, W, np.linalg.inv(W)


def _solve_modal(modes, B_half, weights, grid, keep_history, ceiling) -> RiccatiSolution:
    lam, W, Winv = modes
    K, h = grid.steps, grid.h
    n = lam.size
    Rinv = weights.R_inv
    Qt = W.T @ weights.Q @ W
    Qt = 0.5 * (Qt + Qt.T)
    L = lam[:, None] + lam[None, :]
    C_half = np.matmul(Winv, B_half)
    LX = np.empty((n, n))

    def rhs(X, C, out):
        XC = X @ C
        np.matmul(XC @ Rinv, XC.T, out=out)
        np.multiply(L, X, out=LX)
        out -= LX
        out -= Qt
        return out

    stages = [np.empty((n, n)) for _ in range(4)]
    Y = np.empty((n, n))

    def shifted(X, k, c):
        np.multiply(k, -c, out=Y)
        np.add(Y, X, out=Y)
        return Y

    def to_pi(X):
        return Winv.T @ X @ Winv

    X = W.T @ weights.Qf @ W
    history = np.empty((K + 1, n, n)) if keep_history else None
    if history is not None:
        history[K] = weights.Qf
    BtPi = np.empty((2 * K + 1, B_half.shape[2], n))
    BtPi[2 * K] = B_half[2 * K].T @ weights.Qf
    max_asym = 0.0
    for k in range(K - 1, -1, -1):
        Cn, Cm, Cp = C_half[2 * k + 2], C_half[2 * k + 1], C_half[2 * k]
        k1 = rhs(X, Cn, stages[0])
        k2 = rhs(shifted(X, k1, 0.5 * h), Cm, stages[1])
        k3 = rhs(shifted(X, k2, 0.5 * h), Cm, stages[2])
        k4 = rhs(shifted(X, k3, h), Cp, stages[3])
        k2 += k3
        k2 *= 2.0
        k1 += k2
        k1 += k4
        Xn = X - (h / 6.0) * k1
        D = Xn - Xn.T
        max_asym = max(max_asym, np.abs(D).max())
        D *= 0.5
        Xn -= D
        scale = np.abs(Xn).max()
        if not np.isfinite(scale) or scale > ceiling:
            raise RiccatiEscape(f"Riccati solution exceeded {ceiling:g} at step {k}")
        BtPi[2 * k + 1] = (0.5 * (Cm.T @ X + Cm.T @ Xn)) @ Winv
        BtPi[2 * k] = (Cp.T @ Xn) @ Winv
        X = Xn
        if history is not None:
            history[k] = to_pi(X)
    Pi0 = to_pi(X)
    Pi0 = 0.5 * (Pi0 + Pi0.T)
    if history is None:
        history = np.stack([Pi0, weights.Qf])
    else:
        history = 0.5 * (history + history.transpose(0, 2, 1))
        history[K] = weights.Qf
    return RiccatiSolution(grid, Pi0, BtPi, history, max_asym)


def _solve_dense(A, B_half, weights, grid, keep_history, ceiling) -> RiccatiSolution:
    K = grid.steps
    n = A.shape[0]
    h = grid.h
    Q = weights.Q
    Rinv = weights.R_inv

    PA = np.empty((n, n))
    stages = [np.empty((n, n)) for _ in range(4)]
    Y = np.empty((n, n))

    def rhs(P, B, out):
        # time derivative of Pi (forward time), written into out
        np.matmul(P, A, out=PA)
        PB = P @ B
        np.matmul(PB @ Rinv, PB.T, out=out)
        out -= PA
        out -= PA.T
        out -= Q
        return out

    def shifted(P, k, c):
        np.multiply(k, -c, out=Y)
        np.add(Y, P, out=Y)
        return Y

    P = weights.Qf.copy()
    history = np.empty((K + 1, n, n)) if keep_history else None
    if history is not None:
        history[K] = P
    BtPi = np.empty((2 * K + 1, B_half.shape[2], n))
    BtPi[2 * K] = B_half[2 * K].T @ P
    max_asym = 0.0
    for k in range(K - 1, -1, -1):
        Bn, Bm, Bp = B_half[2 * k + 2], B_half[2 * k + 1], B_half[2 * k]
        k1 = rhs(P, Bn, stages[0])
        k2 = rhs(shifted(P, k1, 0.5 * h), Bm, stages[1])
        k3 = rhs(shifted(P, k2, 0.5 * h), Bm, stages[2])
        k4 = rhs(shifted(P, k3, h), Bp, stages[3])
        k2 += k3
        k2 *= 2.0
        k1 += k2
        k1 += k4
        Pn = P - (h / 6.0) * k1
        asym = np.abs(Pn - Pn.T).max()
        max_asym = max(max_asym, asym)
        Pn += Pn.T
        Pn *= 0.5
        scale = np.abs(Pn).max()
        if not np.isfinite(scale) or scale > ceiling:
            raise RiccatiEscape(f"Riccati solution exceeded {ceiling:g} at step {k}")
        BtPi[2 * k + 1] = 0.5 * (Bm.T @ P + Bm.T @ Pn)
        BtPi[2 * k] = Bp.T @ Pn
        P = Pn
        if history is not None:
            history[k] = P
    if history is None:
        history = np.stack([P, weights.Qf])
    return RiccatiSolution(grid, P, BtPi, history, max_asym)


def pde_cost_via_riccati(Z0: np.ndarray, sol: RiccatiSolution) -> float:
    """Optimal PDE cost ``<Z0, Pi(0) Z0>``."""
    return sol.value(np.asarray(Z0, dtype=float))


@dataclass(frozen=True)
class LinearFeedback:
    """State feedback ``u(t_j) = -gains[j] @ Z`` on the half grid."""

    gains: np.ndarray  # (2K+1, m, n)

    def __call__(self, j: int, Z: np.ndarray) -> np.ndarray:
        return -(self.gains[j] @ Z)

    def half_values(self, Z_half: np.ndarray) -> np.ndarray:
        return -np.einsum("jmn,jn->jm", self.gains, Z_half)


@dataclass(frozen=True)
class OpenLoop:
    """Open-loop control sampled at the step nodes, linear in between."""

    values: np.ndarray  # (K+1, m)

    def __post_init__(self):
        object.__setattr__(self, "_half", linear_half(np.asarray(self.values, float)))

    def __call__(self, j: int, Z: np.ndarray) -> np.ndarray:
        return self._half[j]

    def half_values(self, Z_half: np.ndarray) -> np.ndarray:
        return self._half


def synthesize_feedback(sol: RiccatiSolution, weights: LQRWeights) -> LinearFeedback:
    """Optimal gain ``R^-1 B^T Pi`` on the half grid."""
    return LinearFeedback(np.einsum("ab,jbn->jan", weights.R_inv, sol.BtPi))


@dataclass(frozen=True)
class SimResult:
    grid: TimeGrid
    Z: np.ndarray  # (K+1, n)
    Zdot: np.ndarray  # (K+1, n)
    u: np.ndarray  # (K+1, m)
    u_half: np.ndarray  # (2K+1, m)
    running: np.ndarray  # (K+1,) cost integrand samples
    terminal: float

    @property
    def running_cost(self) -> float:
        return self.grid.integrate(self.running)

    @property
    def cost(self) -> float:
        """PDE cost: trapezoid running cost plus terminal cost."""
        return self.running_cost + self.terminal

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.Z, axis=1)

    def Z_half(self) -> np.ndarray:
        return hermite_half(self.Z, self.Zdot, self.grid.h)


def simulate_loop(
    A: np.ndarray,
    B_half: np.ndarray,
    Z0: np.ndarray,
    grid: TimeGrid,
    weights: LQRWeights,
    control=None,
    disturbance: np.ndarray | None = None,
) -> SimResult:
    """RK4 simulation of ``Z' = A Z + B u + d`` with cost accumulation.

    ``control`` is a :class:`LinearFeedback`, an :class:`OpenLoop`, or None
    (no actuation). ``disturbance`` is the projected forcing on the half grid,
    shape ``(2K+1, n)``.
    """
    K = grid.steps
    h = grid.h
    n = A.shape[0]
    m = B_half.shape[2]
    Z = np.empty((K + 1, n))
    Zdot = np.empty((K + 1, n))
    U = np.zeros((K + 1, m))
    Z[0] = Z0
    d = disturbance

    def ctrl(j, z):
        return np.zeros(m) if control is None else control(j, z)

    def rhs(j, z):
        u = ctrl(j, z)
        r = A @ z + B_half[j] @ u
        if d is not None:
            r = r + d[j]
        return r, u

    for k in range(K):
        j = 2 * k
        k1, U[k] = rhs(j, Z[k])
        Zdot[k] = k1
        k2, _ = rhs(j + 1, Z[k] + 0.5 * h * k1)
        k3, _ = rhs(j + 1, Z[k] + 0.5 * h * k2)
        k4, _ = rhs(j + 2, Z[k] + h * k3)
        Z[k + 1] = Z[k] + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    Zdot[K], U[K] = rhs(2 * K, Z[K])

    Q, R = weights.Q, weights.R
    running = np.einsum("ki,ij,kj->k", Z, Q, Z) + np.einsum("ki,ij,kj->k", U, R, U)
    terminal = float(Z[K] @ weights.Qf @ Z[K])
    Zh = hermite_half(Z, Zdot, h)
    u_half = np.zeros((2 * K + 1, m)) if control is None else control.half_values(Zh)
    return SimResult(grid, Z, Zdot, U, u_half, running, terminal)
