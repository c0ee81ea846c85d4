import numpy as np
import pytest
from scipy import integrate
from scipy.special import erf

from actuator_guidance.actuation import (
    GaussianKernel,
    circular_disturbance,
    input_location_gradient,
    kernel_eval,
    project_input,
)
from actuator_guidance.spectral import build_basis, project_field


def test_kernel_peak_and_support():
    k = GaussianKernel(0.05, (0.4, 0.6))
    assert kernel_eval(k, 0.4, 0.6) == pytest.approx(1 / (2 * np.pi * 0.05**2))
    assert kernel_eval(k, 0.4, 0.6) == pytest.approx(63.662, abs=1e-3)
    assert kernel_eval(k, 0.4 + 0.051, 0.6) == 0.0
    assert kernel_eval(k, 0.4, 0.6 - 0.0501) == 0.0
    with pytest.raises(ValueError):
        GaussianKernel(-0.05, (0.5, 0.5))


def test_kernel_mass_lost_to_truncation():
    # separable oracle: (sigma sqrt(pi) erf(1))^2 / (2 pi sigma^2) = erf(1)^2 / 2
    k = GaussianKernel(0.05, (0.5, 0.5))
    mass, _ = integrate.dblquad(
        lambda y, x: float(kernel_eval(k, x, y)), 0.45, 0.55, 0.45, 0.55, epsabs=1e-12
    )
    assert mass == pytest.approx(erf(1.0) ** 2 / 2, rel=1e-8)
    assert mass < 1.0


def test_projection_matches_global_quadrature():
    basis = build_basis("neumann", 5)
    pos = np.array([[0.3, 0.62]])
    B = project_input(pos, 0.05, basis)[:, 0]
    k = GaussianKernel(0.05, (0.3, 0.62))
    ref = np.empty(basis.dim)
    for idx in range(basis.dim):
        ref[idx], _ = integrate.dblquad(
            lambda y, x: float(kernel_eval(k, x, y) * basis.evaluate(x, y)[idx]),
            0.25, 0.35, 0.57, 0.67, epsabs=1e-11,
        )
    assert np.abs(B - ref).max() < 1e-8
    # constant mode coefficient equals the kernel mass
    assert B[0] == pytest.approx(erf(1.0) ** 2 / 2, rel=1e-10)


def test_symmetry_zero_coefficient():
    basis = build_basis("dirichlet", 6)
    B = project_input(np.array([[0.5, 0.5]]), 0.05, basis)
    assert abs(B[basis.flat_index(1, 2), 0]) < 1e-14


def test_outside_domain_is_zero():
    basis = build_basis("dirichlet", 6)
    pos = np.array([[1.2, 0.5], [0.5, -0.3]])
    assert np.all(project_input(pos, 0.05, basis) == 0.0)
    assert np.all(input_location_gradient(pos, 0.05, basis) == 0.0)


def test_locality():
    basis = build_basis("dirichlet", 6)
    pos = np.array([[0.2, 0.3], [0.7, 0.6], [0.4, 0.8]])
    moved = pos.copy()
    moved[1] += [0.03, -0.02]
    B0 = project_input(pos, 0.05, basis)
    B1 = project_input(moved, 0.05, basis)
    assert np.all(B0[:, [0, 2]] == B1[:, [0, 2]])
    assert np.abs(B0[:, 1] - B1[:, 1]).max() > 0


def test_lipschitz_in_location():
    basis = build_basis("dirichlet", 13)
    rng = np.random.default_rng(3)
    ratios = []
    for _ in range(20):
        x = rng.uniform(0.1, 0.9, 2)
        d = rng.normal(size=2)
        d /= np.linalg.norm(d)
        prev = np.inf
        for delta in [1e-2, 3e-3, 1e-3, 1e-4]:
            diff = np.linalg.norm(
                project_input(x[None], 0.05, basis) - project_input((x + delta * d)[None], 0.05, basis)
            )
            assert diff < prev
            prev = diff
            ratios.append(diff / delta)
    L = max(ratios)
    assert np.isfinite(L)
    # a single constant bounds every probe
    assert min(ratios) > 0 and L / np.median(ratios) < 10


def _fd_gradient(pos, basis, h=1e-5):
    out = []
    for c in range(2):
        e = np.zeros(2)
        e[c] = h
        out.append(
            (project_input((pos + e)[None], 0.05, basis) - project_input((pos - e)[None], 0.05, basis))[:, 0]
            / (2 * h)
        )
    return np.array(out)


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
@pytest.mark.parametrize("pos", [(0.3, 0.4), (0.03, 0.5), (0.5, 0.98)])
def test_location_gradient_vs_fd(bc, pos):
    basis = build_basis(bc, 13)
    pos = np.array(pos)
    g = input_location_gradient(pos[None], 0.05, basis)[0]
    fd = _fd_gradient(pos, basis)
    for c in range(2):
        assert np.linalg.norm(g[c] - fd[c]) / np.linalg.norm(fd[c]) < 1e-3


def test_gradient_sign_agreement():
    basis = build_basis("dirichlet", 13)
    pos = np.array([0.5, 0.5])
    g = input_location_gradient(pos[None], 0.05, basis)[0]
    fd = _fd_gradient(pos, basis)
    rng = np.random.default_rng(7)
    big = np.nonzero(np.abs(fd[0]) > 1e-3)[0]
    for k in rng.choice(big, 10, replace=False):
        assert np.sign(g[0, k]) == np.sign(fd[0, k])


def test_vectorized_shapes():
    basis = build_basis("neumann", 4)
    pos = np.random.default_rng(0).random((7, 3, 2))
    B = project_input(pos, 0.05, basis)
    G = input_location_gradient(pos, 0.05, basis)
    assert B.shape == (7, 16, 3)
    assert G.shape == (7, 3, 2, 16)
    assert np.allclose(B[4], project_input(pos[4], 0.05, basis))


def test_disturbance_model():
    d = circular_disturbance()
    t = np.linspace(0, 1, 201)
    pos = d.positions(t)
    assert np.all((pos > 0) & (pos < 1))
    assert np.allclose(pos[0], [0.5, 0.8])
    basis = build_basis("dirichlet", 5)
    F = d.forcing(t[:3], basis)
    assert F.shape == (3, 25)
    assert np.allclose(F[0], 0.5 * project_input(np.array([[0.5, 0.8]]), 0.05, basis)[:, 0])


def test_projection_of_kernel_field_agrees():
    # project_input agrees with the generic field projector for a wide kernel
    basis = build_basis("dirichlet", 6, quad_order=60)
    k = GaussianKernel(0.3, (0.45, 0.55))
    generic = project_field(lambda x, y: kernel_eval(k, x, y), basis)
    special = project_input(np.array([[0.45, 0.55]]), 0.3, basis, npts=40)[:, 0]
    assert np.abs(generic - special).max() < 5e-3 * np.abs(special).max()
