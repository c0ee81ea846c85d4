"""Spectral Galerkin discretization of diffusion-advection on the unit square.

The basis functions are tensor products of 1D Laplacian eigenfunctions,
``phi_k(x, y) = psi_i(x) * psi_j(y)``, flattened row-major so that the
first (x) mode index varies slowest. All spatial integrals go through a
tensor-product Gauss-Legendre rule on [0, 1].
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

GRAM_TOL = 1e-10


class BoundaryCondition(enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"

    @classmethod
    def parse(cls, value: "str | BoundaryCondition") -> "BoundaryCondition":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown boundary condition {value!r}") from None


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor-product Gauss-Legendre rule mapped to [0, 1]^2."""

    order: int
    nodes_1d: np.ndarray
    weights_1d: np.ndarray

    @classmethod
    def gauss_legendre(cls, order: int) -> "QuadratureRule":
        if order < 1:
            raise ValueError("quadrature order must be positive")
        x, w = np.polynomial.legendre.leggauss(order)
        return cls(order, 0.5 * (x + 1.0), 0.5 * w)

    @property
    def nodes(self) -> np.ndarray:
        X, Y = np.meshgrid(self.nodes_1d, self.nodes_1d, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.weights_1d, self.weights_1d).ravel()

    def integrate(self, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
        X, Y = np.meshgrid(self.nodes_1d, self.nodes_1d, indexing="ij")
        vals = np.asarray(f(X, Y), dtype=float) * np.ones_like(X)
        return float(self.weights_1d @ vals @ self.weights_1d)


def default_quad_order(N: int) -> int:
    # Smallest orders certifying the Gram identity to 1e-12 are ~2N+10.
    return 2 * N + 12


@dataclass(frozen=True)
class BasisSet:
    """Orthonormal eigenfunction basis of dimension ``N**2``.

    ``modes[k] = (i, j)`` gives the per-axis mode numbers of flat index ``k``
    (1-based for Dirichlet, 0-based for Neumann).
    """

    bc: BoundaryCondition
    N: int
    quadrature: QuadratureRule

    @property
    def dim(self) -> int:
        return self.N * self.N

    @property
    def mode_numbers(self) -> np.ndarray:
        """1D mode numbers along each axis."""
        if self.bc is BoundaryCondition.DIRICHLET:
            return np.arange(1, self.N + 1)
        return np.arange(self.N)

    @property
    def modes(self) -> np.ndarray:
        m = self.mode_numbers
        I, J = np.meshgrid(m, m, indexing="ij")
        return np.column_stack([I.ravel(), J.ravel()])

    @property
    def norm_constants(self) -> np.ndarray:
        """Amplitude of each 2D mode (2, sqrt(2) or 1)."""
        c1 = np.full(self.N, np.sqrt(2.0))
        if self.bc is BoundaryCondition.NEUMANN:
            c1[0] = 1.0
        return np.outer(c1, c1).ravel()

    def flat_index(self, i: int, j: int) -> int:
        off = 1 if self.bc is BoundaryCondition.DIRICHLET else 0
        if not (0 <= i - off < self.N and 0 <= j - off < self.N):
            raise IndexError(f"mode ({i}, {j}) outside basis")
        return (i - off) * self.N + (j - off)

    def eval_1d(self, x, deriv: int = 0) -> np.ndarray:
        """Values (or derivatives) of the 1D factors, shape ``x.shape + (N,)``."""
        x = np.asarray(x, dtype=float)[..., None]
        m = self.mode_numbers
        w = np.pi * m
        amp = np.where(m == 0, 1.0, np.sqrt(2.0))
        if self.bc is BoundaryCondition.DIRICHLET:
            fns = (np.sin, np.cos, lambda s: -np.sin(s), lambda s: -np.cos(s))
        else:
            fns = (np.cos, lambda s: -np.sin(s), lambda s: -np.cos(s), np.sin)
        return amp * w**deriv * fns[deriv % 4](w * x)

    def evaluate(self, x, y) -> np.ndarray:
        """All basis functions at points (x, y); shape ``broadcast + (N**2,)``."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        fx = self.eval_1d(x)
        fy = self.eval_1d(y)
        return (fx[..., :, None] * fy[..., None, :]).reshape(x.shape + (self.dim,))

    def gradient(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        fx, dfx = self.eval_1d(x), self.eval_1d(x, 1)
        fy, dfy = self.eval_1d(y), self.eval_1d(y, 1)
        shape = x.shape + (self.dim,)
        gx = (dfx[..., :, None] * fy[..., None, :]).reshape(shape)
        gy = (fx[..., :, None] * dfy[..., None, :]).reshape(shape)
        return gx, gy

    def laplacian_eigenvalues(self) -> np.ndarray:
        I, J = self.modes.T
        return -(np.pi**2) * (I**2 + J**2).astype(float)

    def gram_matrix(self) -> np.ndarray:
        q = self.quadrature
        X, Y = np.meshgrid(q.nodes_1d, q.nodes_1d, indexing="ij")
        Phi = self.evaluate(X, Y).reshape(-1, self.dim)
        return Phi.T @ (q.weights[:, None] * Phi)


def build_basis(bc, N: int, quad_order: int | None = None) -> BasisSet:
    """Build and certify the orthonormal basis for ``bc`` with ``N`` modes per axis.

    Raises ValueError if ``N < 1`` or if the quadrature rule cannot reproduce
    the identity Gram matrix to ``GRAM_TOL``.
    """
    bc = BoundaryCondition.parse(bc)
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    N = int(N)
    if quad_order is None:
        quad_order = default_quad_order(N)
    basis = BasisSet(bc, N, QuadratureRule.gauss_legendre(quad_order))
    err = np.abs(basis.gram_matrix() - np.eye(basis.dim)).max()
    if err > GRAM_TOL:
        raise ValueError(
            f"quadrature order {quad_order} too low for N={N}: "
            f"Gram deviation {err:.2e} > {GRAM_TOL:.0e}"
        )
    return basis


def _derivative_coupling(basis: BasisSet) -> np.ndarray:
    """1D matrix ``G[i, l] = int_0^1 psi_i psi_l' dx`` by quadrature."""
    q = basis.quadrature
    F = basis.eval_1d(q.nodes_1d)
    dF = basis.eval_1d(q.nodes_1d, 1)
    return F.T @ (q.weights_1d[:, None] * dF)


def assemble_A(basis: BasisSet, a: float, v) -> np.ndarray:
    """Galerkin matrix of ``a*lap(z) - v.grad(z)``.

    Entry ``(k, l)`` is ``<phi_k, A phi_l>``: the diffusion part uses the
    Laplacian eigenvalues, the advection part 1D quadrature of ``psi psi'``.
    """
    if a <= 0:
        raise ValueError("diffusivity must be positive")
    vx, vy = np.asarray(v, dtype=float).reshape(2)
    G = _derivative_coupling(basis)
    I = np.eye(basis.N)
    advection = -vx * np.kron(G, I) - vy * np.kron(I, G)
    return np.diag(a * basis.laplacian_eigenvalues()) + advection


def project_field(f: Callable, basis: BasisSet) -> np.ndarray:
    """Coefficients ``c_k = int f phi_k`` of a field ``f(x, y)`` (vectorized)."""
    q = basis.quadrature
    X, Y = np.meshgrid(q.nodes_1d, q.nodes_1d, indexing="ij")
    F = np.asarray(f(X, Y), dtype=float) * np.ones_like(X)
    P = basis.eval_1d(q.nodes_1d) * q.weights_1d[:, None]
    return (P.T @ F @ P).ravel()


def evaluate_field(c: np.ndarray, basis: BasisSet, x, y) -> np.ndarray:
    """Value of the truncated series ``sum_k c_k phi_k`` at points in the unit square."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    eps = 1e-12
    if np.any((x < -eps) | (x > 1 + eps) | (y < -eps) | (y > 1 + eps)):
        raise ValueError("evaluation point outside the unit square")
    C = np.asarray(c, dtype=float).reshape(basis.N, basis.N)
    fx = basis.eval_1d(x)
    fy = basis.eval_1d(y)
    return np.einsum("...i,ij,...j->...", fx, C, fy)


def l2_norm(c: np.ndarray) -> float:
    return float(np.linalg.norm(c))
