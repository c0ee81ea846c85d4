import numpy as np
import pytest

from actuator_guidance.actuation import project_input
from actuator_guidance.fleet import FleetDynamics
from actuator_guidance.riccati import LQRWeights
from actuator_guidance.spectral import assemble_A, build_basis, project_field
from actuator_guidance.sweep import GuidanceProblem, MobilityCost
from actuator_guidance.timegrid import TimeGrid

A_DIFF = 0.05
VELOCITY = (0.1, -0.1)


def z0(x, y):
    return 320.0 * (x - x**2) * (y - y**2)


@pytest.fixture(scope="session")
def dirichlet13():
    return build_basis("dirichlet", 13)


@pytest.fixture(scope="session")
def neumann13():
    return build_basis("neumann", 13)


def small_problem(bc="dirichlet", N=4, steps=200, positions=((0.3, 0.3), (0.6, 0.4)), ic=z0):
    basis = build_basis(bc, N)
    fleet = FleetDynamics.single_integrators(positions)
    m = fleet.m_a
    return GuidanceProblem(
        basis=basis,
        A=assemble_A(basis, A_DIFF, VELOCITY),
        Z0=project_field(ic, basis),
        fleet=fleet,
        sigmas=np.full(m, 0.05),
        weights=LQRWeights.identity_state(basis.dim, 0.1 * np.eye(m)),
        mobility=MobilityCost.quadratic(0.1),
        grid=TimeGrid(1.0, steps),
    )


@pytest.fixture
def small():
    return small_problem()


def static_input(basis, positions, grid):
    B = project_input(np.asarray(positions, float), 0.05, basis)
    return np.broadcast_to(B, (2 * grid.steps + 1,) + B.shape)


# Full-size reference runs, shared by every test in the session.


@pytest.fixture(scope="session")
def reference_runs():
    from actuator_guidance.bench import build_scenario, solve
    from actuator_guidance.config import from_dict

    cache = {}

    def get(bc):
        if bc not in cache:
            sc = build_scenario(from_dict({"preset": f"{bc}-paper"}))
            cache[bc] = (sc, solve(sc))
        return cache[bc]

    return get
