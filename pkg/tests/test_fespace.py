from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evolvefem.fespace import (
    MAX_QUADRATURE_EXACTNESS,
    build_space,
    eval_basis,
    evaluate_function,
    lagrange_interpolate,
    lattice_indices,
    local_dof_count,
    quadrature_rule,
)
from evolvefem.mesh import mesh_for_level


def monomial_integral(a, b):
    """int_T x^a y^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("degree", [0, 1, 2, 5, 8, 13, 20])
def test_quadrature_exact_up_to_degree(degree):
    q = quadrature_rule(degree)
    x, y = q.xy[:, 0], q.xy[:, 1]
    assert np.isclose(q.weights.sum(), 0.5)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            assert np.isclose(q.weights @ (x**a * y**b), monomial_integral(a, b), rtol=1e-13, atol=1e-15)


def test_quadrature_points_inside_triangle():
    q = quadrature_rule(12)
    assert np.all(q.points > 0)
    assert np.allclose(q.points.sum(axis=1), 1.0)


@pytest.mark.parametrize("bad", [-1, MAX_QUADRATURE_EXACTNESS + 1])
def test_quadrature_out_of_range(bad):
    with pytest.raises(ValueError, match="unavailable"):
        quadrature_rule(bad)


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_basis_is_nodal(degree):
    nodes = lattice_indices(degree) / degree
    phi, _ = eval_basis(degree, nodes)
    assert np.allclose(phi, np.eye(local_dof_count(degree)), atol=1e-13)


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_partition_of_unity(degree):
    q = quadrature_rule(7)
    phi, dphi = eval_basis(degree, q.points)
    assert np.allclose(phi.sum(axis=1), 1.0)
    assert np.allclose(dphi.sum(axis=1), 0.0, atol=1e-12)


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_basis_gradients_match_finite_differences(degree):
    rng = np.random.default_rng(3)
    xy = rng.uniform(0.1, 0.4, size=(5, 2))
    bary = lambda p: np.column_stack([1 - p[:, 0] - p[:, 1], p])  # noqa: E731
    _, g = eval_basis(degree, bary(xy))
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (eval_basis(degree, bary(xy + e))[0] - eval_basis(degree, bary(xy - e))[0]) / (2 * h)
        assert np.allclose(g[..., j], fd, atol=1e-7)


def test_unsupported_degree():
    with pytest.raises(ValueError, match="unsupported degree"):
        build_space(mesh_for_level(1), 4)


@pytest.mark.parametrize("degree,n", [(1, 4), (2, 4), (3, 4), (2, 8)])
def test_dof_counts(degree, n):
    level = int(np.log2(n))
    sp = build_space(mesh_for_level(level), degree)
    assert sp.dof_count == (degree * n + 1) ** 2
    assert len(np.unique(sp.element_dofs)) == sp.dof_count


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_interpolation_reproduces_polynomials(degree):
    sp = build_space(mesh_for_level(2), degree)
    f = lambda p: (1 + p[..., 0]) ** degree + p[..., 1] ** degree - p[..., 0] * p[..., 1] ** (degree - 1)  # noqa: E731
    U = lagrange_interpolate(sp, f)
    q = quadrature_rule(6)
    vals = evaluate_function(sp, U, q.points)
    from evolvefem.fespace import element_affine_maps

    origin, F, _, _ = element_affine_maps(sp.mesh.vertices, sp.mesh.triangles)
    pts = origin[:, None, :] + np.einsum("eij,qj->eqi", F, q.xy)
    assert np.allclose(vals, f(pts), atol=1e-12)


def test_integral_of_monomial_over_square():
    sp = build_space(mesh_for_level(2), 2)
    from evolvefem.postproc import NormEvaluator

    ev = NormEvaluator(sp)
    w = ev.rule.weights
    p = ev.rule.points
    assert np.isclose(np.sum(w * p[..., 0] ** 2 * p[..., 1] ** 2), 1 / 9, rtol=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_interpolant_of_affine_function_is_exact_everywhere(degree, a, b, c):
    sp = build_space(mesh_for_level(1), degree)
    U = lagrange_interpolate(sp, lambda p: a + b * p[..., 0] + c * p[..., 1])
    assert np.allclose(U, a + b * sp.dof_points[:, 0] + c * sp.dof_points[:, 1])
