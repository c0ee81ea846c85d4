import numpy as np
import pytest

from actuator_guidance.fleet import (
    FleetDynamics,
    GuidanceBounds,
    GuidanceProfile,
    project_guidance,
    propagate,
    validate_guidance,
)
from actuator_guidance.timegrid import TimeGrid, hermite_half

START = ((0.1, 0.1), (0.125, 0.1), (0.125, 0.125), (0.1, 0.125))


@pytest.fixture
def fleet():
    return FleetDynamics.single_integrators(START)


def test_assembly(fleet):
    assert fleet.m_a == 4 and fleet.n == 8 and fleet.m == 8
    assert np.all(fleet.alpha == 0)
    assert np.all(fleet.beta == np.eye(8))
    xi = np.arange(8.0)
    assert np.all(fleet.positions(xi) == xi.reshape(4, 2))


def test_selector_skips_extra_states():
    # double integrator: state (x, y, vx, vy), input acceleration
    a = np.block([[np.zeros((2, 2)), np.eye(2)], [np.zeros((2, 4))]])
    b = np.vstack([np.zeros((2, 2)), np.eye(2)])
    fl = FleetDynamics.from_blocks([a, np.zeros((2, 2))], [b, np.eye(2)], [[0.2, 0.3, 0, 0], [0.5, 0.6]])
    assert fl.M.shape == (4, 6)
    xi = np.array([1, 2, 3, 4, 5, 6.0])
    assert np.all(fl.positions(xi) == [[1, 2], [5, 6]])


def test_rejects_uncontrollable():
    with pytest.raises(ValueError, match="controllable"):
        FleetDynamics.from_blocks([np.zeros((2, 2))], [np.array([[1.0], [0.0]])], [[0.5, 0.5]])
    with pytest.raises(ValueError):
        FleetDynamics.from_blocks([np.zeros((2, 2))], [np.eye(2)], [[0.5, 0.5], [0.1, 0.1]])


def test_zero_guidance_is_stationary(fleet):
    p = GuidanceProfile.zeros(TimeGrid(1.0, 50), fleet)
    traj = propagate(fleet, p)
    assert np.all(traj.states == fleet.xi0)


def test_constant_guidance_exact(fleet):
    grid = TimeGrid(1.0, 40)
    v = np.linspace(-0.3, 0.4, 8)
    p = GuidanceProfile.zeros(grid, fleet).with_values(np.tile(v, (41, 1)))
    traj = propagate(fleet, p)
    assert np.abs(traj.states - (fleet.xi0 + np.outer(grid.nodes, v))).max() < 1e-14


def test_polynomial_guidance_exact(fleet):
    # p = t integrates to t^2/2; linear midpoint interpolation is exact for linear p
    grid = TimeGrid(1.0, 200)
    t = grid.nodes
    p = GuidanceProfile.zeros(grid, fleet).with_values(np.outer(t, np.ones(8)))
    traj = propagate(fleet, p)
    assert np.abs(traj.states - (fleet.xi0 + np.outer(t**2 / 2, np.ones(8)))).max() < 1e-14


def test_linearity_of_trajectory_map(fleet):
    grid = TimeGrid(1.0, 100)
    rng = np.random.default_rng(0)
    p1 = GuidanceProfile.zeros(grid, fleet).with_values(rng.normal(size=(101, 8)))
    p2 = GuidanceProfile.zeros(grid, fleet).with_values(rng.normal(size=(101, 8)))
    zero = np.zeros(8)

    def resp(p):
        return propagate(fleet, p, xi0=zero).states

    comb = p1.with_values(2.0 * p1.values - 0.7 * p2.values)
    lhs = propagate(fleet, comb).states - fleet.xi0
    assert np.abs(lhs - (2.0 * resp(p1) - 0.7 * resp(p2))).max() < 1e-12


def test_continuity_constant_stable(fleet):
    grid = TimeGrid(1.0, 100)
    rng = np.random.default_rng(1)
    ratios = []
    for _ in range(10):
        a, b = rng.normal(size=(2, 101, 8))
        pa = GuidanceProfile.zeros(grid, fleet).with_values(a)
        pb = pa.with_values(b)
        d = np.abs(propagate(fleet, pa).states - propagate(fleet, pb).states).max()
        ratios.append(d / np.abs(a - b).max())
    # single integrators on [0, 1]: sup-norm gain is at most t_f
    assert max(ratios) <= 1.0 + 1e-12
    assert min(ratios) > 0.01


def test_half_states_match_midpoint(fleet):
    grid = TimeGrid(1.0, 400)
    t = grid.nodes
    p = GuidanceProfile.zeros(grid, fleet).with_values(np.outer(np.sin(3 * t), np.ones(8)))
    traj = propagate(fleet, p)
    half = traj.half_states()
    exact = fleet.xi0[0] + (1 - np.cos(3 * grid.half_nodes)) / 3
    assert np.abs(half[:, 0] - exact).max() < 1e-5
    assert np.all(half[::2] == traj.states)


def test_hermite_exact_for_cubics():
    grid = TimeGrid(1.0, 7)
    t = grid.nodes[:, None]
    y = 2 * t**3 - t**2 + 0.5
    dy = 6 * t**2 - 2 * t
    th = grid.half_nodes[:, None]
    assert np.abs(hermite_half(y, dy, grid.h) - (2 * th**3 - th**2 + 0.5)).max() < 1e-14


def test_validate_examples(fleet):
    grid = TimeGrid(1.0, 1000)
    p = GuidanceProfile.zeros(grid, fleet)
    assert validate_guidance(p) == []
    v = np.zeros((1001, 8))
    v[400:, 3] = 30.0
    v[700, 0] = 150.0
    kinds = {(x.kind, x.index, x.component) for x in validate_guidance(p.with_values(v))}
    assert ("box", 700, 0) in kinds
    assert ("rate", 400, 1) in kinds
    # a step of 30 in one time step exceeds a_max * h = 0.1
    assert 30 > 100 * 0.001


def test_magnitude_violation(fleet):
    grid = TimeGrid(1.0, 10)
    v = np.zeros((11, 8))
    v[:, 0] = v[:, 1] = 80.0  # 2-norm 113 > 100, inside the box
    bad = validate_guidance(GuidanceProfile.zeros(grid, fleet).with_values(v))
    assert {x.kind for x in bad} == {"magnitude"}
    assert all(x.component == 0 for x in bad)


def test_projection_clips(fleet):
    grid = TimeGrid(1.0, 10)
    v = np.zeros((11, 8))
    v[:, 2] = 150.0
    out = project_guidance(GuidanceProfile.zeros(grid, fleet).with_values(v))
    assert np.all(out.values[:, 2] == 100.0)
    assert validate_guidance(out) == []


def test_projection_feasible_and_idempotent(fleet):
    grid = TimeGrid(1.0, 50)
    rng = np.random.default_rng(5)
    base = GuidanceProfile.zeros(grid, fleet, GuidanceBounds(-100, 100, 100, 100))
    for _ in range(100):
        raw = rng.normal(scale=rng.choice([0.5, 5, 80, 300]), size=(51, 8))
        q = project_guidance(base, raw)
        assert validate_guidance(q) == []
        assert np.array_equal(project_guidance(q).values, q.values)


def test_profile_shape_checked(fleet):
    with pytest.raises(ValueError):
        GuidanceProfile(TimeGrid(1.0, 10), np.zeros((10, 8)), fleet.input_sizes)
