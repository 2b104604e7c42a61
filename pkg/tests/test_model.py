import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evolvefem.mapping import CustomMapping, IdentityMapping, LinearPeriodic, NonlinearPeriodic
from evolvefem.model import (
    Kinetics,
    ManufacturedProblem,
    build_manufactured,
    pure_diffusion,
    schnakenberg,
    steady_state,
)
from evolvefem.verify import fd_source_residual

KIN = schnakenberg(0.1, 0.9, 1.0, 0.01, 1.0)


def test_steady_state_values():
    assert np.allclose(steady_state(0.1, 0.9), (1.0, 0.9))
    u = np.array(steady_state(0.1, 0.9))
    assert np.abs(KIN.f(u)).max() <= 1e-14


def test_reaction_at_origin():
    k = schnakenberg(0.3, 0.7, 2.5, 1.0, 1.0)
    assert np.allclose(k.f(np.zeros(2)), (2.5 * 0.3, 2.5 * 0.7))


def test_structural_identity_random_states():
    z = np.random.default_rng(0).uniform(-2, 2, size=(2, 100))
    a, b, g = 0.1, 0.9, 1.0
    f = KIN.f(z)
    u1, u2 = z
    assert np.abs(f[0] - g * (a - u1 + u1**2 * u2)).max() <= 1e-14
    assert np.abs(f[1] - g * (b - u1**2 * u2)).max() <= 1e-14
    F = KIN.F(z)
    assert np.abs(f[0] - g * (a + u1 * F[0])).max() <= 1e-14


@pytest.mark.parametrize("name", ["a", "b", "gamma", "d1", "d2"])
@pytest.mark.parametrize("value", [0.0, -1.0, float("inf")])
def test_schnakenberg_rejects_bad_parameters(name, value):
    params = dict(a=0.1, b=0.9, gamma=1.0, d1=0.01, d2=1.0)
    params[name] = value
    with pytest.raises(ValueError, match=name):
        schnakenberg(**params)


def test_zero_kinetics():
    k = pure_diffusion((0.5, 2.0))
    assert k.gamma == 0
    assert np.all(k.f(np.ones((2, 4))) == 0)
    with pytest.raises(ValueError, match="diffusion"):
        pure_diffusion((0.0, 1.0))
    with pytest.raises(ValueError, match="gamma"):
        Kinetics(-1.0, (0.0,), lambda z: z, (1.0,))


def test_source_at_initial_time():
    xi = np.random.default_rng(1).uniform(0, 1, (20, 2))
    base = np.cos(np.pi * xi[:, 0]) * np.cos(np.pi * xi[:, 1])
    for m in (LinearPeriodic(1.0, 1.0), NonlinearPeriodic(1.0, 1.0)):
        p = ManufacturedProblem(m, KIN)
        assert np.allclose(p.source(0, xi, 0.0), np.pi * base - 0.1)
        assert np.allclose(p.source(1, xi, 0.0), -np.pi * base - 0.9)


def test_identity_source_closed_form():
    p = ManufacturedProblem(IdentityMapping(), KIN)
    rng = np.random.default_rng(2)
    xi = rng.uniform(0, 1, (50, 2))
    t = 0.37
    u1 = p.exact(0, xi, t)
    dt = np.pi * np.cos(np.pi * t) * np.cos(np.pi * xi[:, 0]) * np.cos(np.pi * xi[:, 1])
    expected = dt + 0.01 * 2 * np.pi**2 * u1 - KIN.f(np.stack([u1, -u1]))[0]
    assert np.allclose(p.source(0, xi, t), expected, atol=1e-13)


def test_source_all_matches_per_species():
    p = ManufacturedProblem(NonlinearPeriodic(1.0, 1.0), KIN)
    xi = np.random.default_rng(3).uniform(0, 1, (4, 6, 2))
    both = p.source_all(xi, 0.6)
    assert both.shape == (2, 4, 6)
    for i in range(2):
        assert np.array_equal(both[i], p.source(i, xi, 0.6))


@pytest.mark.parametrize("mapping", [LinearPeriodic(1.0, 1.0), NonlinearPeriodic(1.0, 1.0)], ids=lambda m: m.kind)
def test_source_against_fd_oracle(mapping):
    p = build_manufactured(mapping, KIN)
    rng = np.random.default_rng(4)
    xi = rng.uniform(0, 1, (40, 2))
    for t in rng.uniform(0, 1, 5):
        for i in range(2):
            assert np.abs(p.source(i, xi, t) - fd_source_residual(p, i, xi, t)).max() <= 1e-6


@pytest.mark.parametrize("mapping", [LinearPeriodic(1.0, 1.0), NonlinearPeriodic(1.0, 1.0)], ids=lambda m: m.kind)
def test_exact_solution_satisfies_neumann_condition(mapping):
    p = ManufacturedProblem(mapping, KIN)
    s = np.linspace(0, 1, 33)
    sides = [
        (np.column_stack([np.zeros_like(s), s]), np.array([-1.0, 0.0])),
        (np.column_stack([np.ones_like(s), s]), np.array([1.0, 0.0])),
        (np.column_stack([s, np.zeros_like(s)]), np.array([0.0, -1.0])),
        (np.column_stack([s, np.ones_like(s)]), np.array([0.0, 1.0])),
    ]
    for t in (0.2, 0.5, 0.9):
        for pts, nu in sides:
            B = mapping.geometry(pts, t).b_tensor
            flux = np.einsum("pij,pj->pi", B, p.exact_gradient(0, pts, t)) @ nu
            assert np.abs(flux).max() < 1e-14


def test_exact_derivatives_against_fd():
    p = ManufacturedProblem(IdentityMapping(), KIN)
    xi = np.array([[0.3, 0.8]])
    t = 0.4
    h = 1e-6
    g = p.exact_gradient(1, xi, t)[0]
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (p.exact(1, xi + e, t) - p.exact(1, xi - e, t))[0] / (2 * h)
        assert np.isclose(g[j], fd, atol=1e-8)
    H = p.exact_hessian(0, xi, t)[0]
    fd = (p.exact_gradient(0, xi + [h, 0], t) - p.exact_gradient(0, xi - [h, 0], t))[0] / (2 * h)
    assert np.allclose(H[:, 0], fd, atol=1e-7)


def test_rejects_custom_mapping_without_closed_form():
    ref = LinearPeriodic()
    m = CustomMapping(ref.position, ref.jacobian, ref.velocity)
    with pytest.raises(ValueError, match="closed-form"):
        ManufacturedProblem(m, KIN)


def test_rejects_wrong_species_count():
    with pytest.raises(ValueError, match="two species"):
        ManufacturedProblem(IdentityMapping(), pure_diffusion((1.0,)))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0.01, 5))
def test_steady_state_is_root(a, b, gamma):
    k = schnakenberg(a, b, gamma, 1.0, 1.0)
    u = np.array(steady_state(a, b))
    assert np.abs(k.f(u)).max() <= 1e-12 * max(1.0, gamma * (a + b) ** 2)
