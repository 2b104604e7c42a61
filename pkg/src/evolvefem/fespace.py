"""Lagrange finite element spaces of degree 1-3 on triangles, plus quadrature.

Local node layout on the reference triangle (0,0), (1,0), (0,1): the three
vertices, then ``degree - 1`` nodes on each local edge (v0->v1, v1->v2,
v2->v0) in the edge's local direction, then interior nodes. Every node is a
barycentric lattice point ``(i, j, k) / degree``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import ceil

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .mesh import ReferenceMesh

SUPPORTED_DEGREES = (1, 2, 3)
MAX_QUADRATURE_EXACTNESS = 40


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference triangle.

    ``points`` holds barycentric coordinates ``(lambda0, lambda1, lambda2)``
    with the reference point ``(x, y) = (lambda1, lambda2)``; the weights sum
    to 1/2.
    """

    points: np.ndarray
    weights: np.ndarray
    exactness: int

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, 1:]


@lru_cache(maxsize=None)
def quadrature_rule(exactness_degree: int) -> QuadratureRule:
    """Collapsed Gauss-Jacobi x Gauss-Legendre rule exact to the given degree.

    Degree <= 1 returns the one-point barycenter rule.
    """
    if exactness_degree < 0 or exactness_degree > MAX_QUADRATURE_EXACTNESS:
        raise ValueError(
            f"quadrature exactness {exactness_degree} unavailable "
            f"(supported 0..{MAX_QUADRATURE_EXACTNESS})"
        )
    if exactness_degree <= 1:
        pts = np.array([[1 / 3, 1 / 3, 1 / 3]])
        return QuadratureRule(pts, np.array([0.5]), exactness_degree)
    n = int(ceil((exactness_degree + 1) / 2))
    # x in [0,1] with weight (1-x): Jacobi(alpha=1, beta=0) on [-1,1]
    s, ws = roots_jacobi(n, 1.0, 0.0)
    x = 0.5 * (s + 1.0)
    wx = ws / 4.0
    r, wr = roots_legendre(n)
    v = 0.5 * (r + 1.0)
    wv = wr / 2.0
    X = np.repeat(x, n)
    Y = np.tile(v, n) * (1.0 - X)
    W = np.repeat(wx, n) * np.tile(wv, n)
    pts = np.column_stack([1.0 - X - Y, X, Y])
    pts.setflags(write=False)
    W.setflags(write=False)
    return QuadratureRule(pts, W, exactness_degree)


@lru_cache(maxsize=None)
def lattice_indices(degree: int) -> np.ndarray:
    """Barycentric multi-indices of the local nodes, in local node order."""
    p = degree
    nodes = [(p, 0, 0), (0, p, 0), (0, 0, p)]
    for k in range(1, p):
        nodes.append((p - k, k, 0))
    for k in range(1, p):
        nodes.append((0, p - k, k))
    for k in range(1, p):
        nodes.append((k, 0, p - k))
    for j in range(1, p):
        for k in range(1, p - j):
            nodes.append((p - j - k, j, k))
    out = np.array(nodes, dtype=np.int64)
    out.setflags(write=False)
    return out


def local_dof_count(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


def eval_basis(degree: int, points) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate the local Lagrange basis at barycentric points.

    Parameters
    ----------
    degree : polynomial degree
    points : (3,) or (q, 3) barycentric coordinates

    Returns
    -------
    values : (q, nloc)
    gradients : (q, nloc, 2), derivatives w.r.t. reference ``(x, y)``
    """
    if degree not in SUPPORTED_DEGREES:
        raise ValueError(f"unsupported degree {degree}; expected one of {SUPPORTED_DEGREES}")
    lam = np.atleast_2d(np.asarray(points, dtype=float))
    p = degree
    idx = lattice_indices(p)
    q = lam.shape[0]

    # 1D factors P_m(l) = prod_{r<m} (p*l - r)/(r+1) and their derivatives
    fac = np.ones((q, 3, p + 1))
    dfac = np.zeros((q, 3, p + 1))
    for m in range(1, p + 1):
        r = m - 1
        lin = (p * lam - r) / (r + 1)
        fac[:, :, m] = fac[:, :, m - 1] * lin
        dfac[:, :, m] = dfac[:, :, m - 1] * lin + fac[:, :, m - 1] * (p / (r + 1))

    a = fac[:, 0, idx[:, 0]]
    b = fac[:, 1, idx[:, 1]]
    c = fac[:, 2, idx[:, 2]]
    values = a * b * c
    da = dfac[:, 0, idx[:, 0]] * b * c
    db = a * dfac[:, 1, idx[:, 1]] * c
    dc = a * b * dfac[:, 2, idx[:, 2]]
    # lambda0 = 1 - x - y, lambda1 = x, lambda2 = y
    grads = np.stack([db - da, dc - da], axis=-1)
    return values, grads


@dataclass(frozen=True, eq=False)
class FESpace:
    """Continuous Lagrange space of a given degree on a reference mesh.

    Global numbering: vertices first, then edge nodes by global edge (each
    edge's nodes ordered from its lower- to higher-numbered vertex), then
    interior nodes by element.
    """

    mesh: ReferenceMesh
    degree: int
    dof_count: int
    element_dofs: np.ndarray
    dof_points: np.ndarray

    @property
    def local_count(self) -> int:
        return self.element_dofs.shape[1]


def build_space(mesh: ReferenceMesh, degree: int) -> FESpace:
    if degree not in SUPPORTED_DEGREES:
        raise ValueError(f"unsupported degree {degree}; expected one of {SUPPORTED_DEGREES}")
    p = degree
    nv = mesh.num_vertices
    nt = mesh.num_triangles
    tri = mesh.triangles
    edges = mesh.edges
    tri_edges = mesh.triangle_edges
    ne = len(edges)
    n_edge_nodes = p - 1
    n_int = (p - 1) * (p - 2) // 2
    dof_count = nv + ne * n_edge_nodes + nt * n_int

    nloc = local_dof_count(p)
    edofs = np.empty((nt, nloc), dtype=np.int64)
    edofs[:, :3] = tri
    col = 3
    for le, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
        g = tri_edges[:, le]
        forward = tri[:, a] < tri[:, b]
        for k in range(1, p):
            pos = np.where(forward, k - 1, p - 1 - k)
            edofs[:, col] = nv + g * n_edge_nodes + pos
            col += 1
    if n_int:
        base = nv + ne * n_edge_nodes
        edofs[:, col:] = base + np.arange(nt)[:, None] * n_int + np.arange(n_int)[None, :]

    lam = lattice_indices(p) / p
    verts = mesh.vertices[tri]  # (nt, 3, 2)
    local_pts = np.einsum("ab,ebd->ead", lam, verts)
    dof_points = np.empty((dof_count, 2))
    dof_points[edofs.ravel()] = local_pts.reshape(-1, 2)
    for arr in (edofs, dof_points):
        arr.setflags(write=False)
    return FESpace(mesh, p, dof_count, edofs, dof_points)


def lagrange_interpolate(space: FESpace, g) -> np.ndarray:
    """Nodal interpolant coefficients: ``g`` evaluated at every DOF point.

    ``g`` takes an (n, 2) array of points and returns n values.
    """
    vals = np.asarray(g(space.dof_points), dtype=float)
    if vals.ndim == 0:
        vals = np.full(space.dof_count, float(vals))
    return vals.reshape(space.dof_count).copy()


def element_affine_maps(vertices: np.ndarray, triangles: np.ndarray):
    """Affine element maps ``x = v0 + F (x_ref)``.

    Returns ``(origin (nt,2), F (nt,2,2), detF (nt,), Finv (nt,2,2))``.
    """
    p = vertices[triangles]
    F = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
    det = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    inv = np.empty_like(F)
    inv[:, 0, 0] = F[:, 1, 1] / det
    inv[:, 1, 1] = F[:, 0, 0] / det
    inv[:, 0, 1] = -F[:, 0, 1] / det
    inv[:, 1, 0] = -F[:, 1, 0] / det
    return p[:, 0], F, det, inv


def evaluate_function(space: FESpace, coeffs: np.ndarray, points_bary: np.ndarray) -> np.ndarray:
    """FE function values at barycentric points of every element, (nt, q)."""
    phi, _ = eval_basis(space.degree, points_bary)
    return coeffs[space.element_dofs] @ phi.T
