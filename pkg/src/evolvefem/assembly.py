"""Quadrature assembly of the J-weighted matrices on the reference domain.

Element integrals are vectorised over all elements and quadrature points;
the scatter into CSR storage goes through :class:`SparsityPattern` with a
sequential ``bincount`` so results are bit-reproducible.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .fespace import FESpace, element_affine_maps, eval_basis, quadrature_rule
from .linalg import SparsityPattern
from .mapping import DomainMapping


@dataclass
class _RuleData:
    rule: object
    phi: np.ndarray  # (q, nloc)
    phiphi: np.ndarray  # (q, nloc, nloc)
    points: np.ndarray  # (ne, q, 2) in reference-domain coordinates
    weights: np.ndarray  # (ne, q), quadrature weight times element area factor
    grads: np.ndarray  # (ne, q, nloc, 2) gradients in reference-domain coordinates


def _rule_data(space: FESpace, vertices: np.ndarray, exactness: int) -> _RuleData:
    rule = quadrature_rule(exactness)
    phi, dphi = eval_basis(space.degree, rule.points)
    origin, F, det, Finv = element_affine_maps(vertices, space.mesh.triangles)
    pts = origin[:, None, :] + np.einsum("eij,qj->eqi", F, rule.xy)
    weights = np.abs(det)[:, None] * rule.weights[None, :]
    # grad_x phi = F^{-T} grad_ref phi
    grads = np.einsum("eji,qaj->eqai", Finv, dphi)
    return _RuleData(rule, phi, np.einsum("qa,qb->qab", phi, phi), pts, weights, grads)


class AssemblyContext:
    """Cached element data for one FE space and one domain mapping.

    Parameters
    ----------
    space, mapping
    mass_exactness : quadrature exactness for mass, stiffness, load and
        source integrals (default ``2*degree + 4``)
    picard_exactness : exactness for the Picard matrices (default ``4*degree + 4``)
    """

    def __init__(self, space: FESpace, mapping: DomainMapping,
                 mass_exactness: int | None = None, picard_exactness: int | None = None):
        p = space.degree
        self.space = space
        self.mapping = mapping
        self.mass_exactness = 2 * p + 4 if mass_exactness is None else mass_exactness
        self.picard_exactness = 4 * p + 4 if picard_exactness is None else picard_exactness
        self.pattern = SparsityPattern(space.element_dofs, space.dof_count)
        v = space.mesh.vertices
        self.low = _rule_data(space, v, self.mass_exactness)
        self.high = _rule_data(space, v, self.picard_exactness)
        self._geom = OrderedDict()

    @property
    def n(self) -> int:
        return self.space.dof_count

    def geometry(self, which: _RuleData, t: float):
        key = ("geom", id(which), float(t))
        g = self._geom.get(key)
        if g is None:
            g = self._cache(key, self.mapping.geometry(which.points, t))
        return g

    def det(self, which: _RuleData, t: float) -> np.ndarray:
        """J at the quadrature points of ``which``, shape (ne, q)."""
        key = ("det", id(which), float(t))
        d = self._geom.get(key)
        if d is None:
            d = self._cache(key, self.mapping.det(which.points, t))
        return d

    def _cache(self, key, value):
        self._geom[key] = value
        if len(self._geom) > 8:
            self._geom.popitem(last=False)
        return value

    def scatter_vector(self, local: np.ndarray) -> np.ndarray:
        return np.bincount(self.space.element_dofs.ravel(), weights=local.ravel(),
                           minlength=self.n)


def weighted_mass_values(ctx: AssemblyContext, r: _RuleData, weight: np.ndarray) -> np.ndarray:
    """CSR values of ``int weight phi_a phi_b`` with ``weight`` given at the
    quadrature points of ``r``, shape (ne, q)."""
    nloc = r.phi.shape[1]
    local = (r.weights * weight) @ r.phiphi.reshape(len(r.phi), nloc * nloc)
    return ctx.pattern.values(local)


def assemble_mass(ctx: AssemblyContext, t: float):
    return ctx.pattern.matrix(weighted_mass_values(ctx, ctx.low, ctx.det(ctx.low, t)))


def assemble_stiffness(ctx: AssemblyContext, t: float):
    r = ctx.low
    B = ctx.geometry(r, t).b_tensor
    ne, q, nloc, _ = r.grads.shape
    BG = np.matmul(r.grads, np.swapaxes(B, -1, -2))  # (ne, q, nloc, 2)
    G = (r.grads * r.weights[:, :, None, None]).transpose(0, 2, 1, 3).reshape(ne, nloc, 2 * q)
    BG = BG.transpose(0, 2, 1, 3).reshape(ne, nloc, 2 * q)
    return ctx.pattern.assemble(np.matmul(G, np.swapaxes(BG, 1, 2)))


def assemble_load(ctx: AssemblyContext, t: float) -> np.ndarray:
    r = ctx.low
    return ctx.scatter_vector((r.weights * ctx.det(r, t)) @ r.phi)


def assemble_weighted_functional(ctx: AssemblyContext, t: float, g) -> np.ndarray:
    """Vector of ``int J g phi_alpha``; ``g`` maps (..., 2) points to values.

    ``g`` may also return shape (m, ne, q); the result is then (m, n).
    """
    r = ctx.low
    J = ctx.det(r, t)
    gv = np.asarray(g(r.points), dtype=float)
    if gv.ndim == 3:
        return np.stack([ctx.scatter_vector((r.weights * J * gi) @ r.phi) for gi in gv])
    gv = np.broadcast_to(gv, J.shape)
    return ctx.scatter_vector((r.weights * J * gv) @ r.phi)


def state_at_quadrature(ctx: AssemblyContext, state, which: _RuleData | None = None) -> np.ndarray:
    """Per-species FE values at quadrature points, shape (m, ne, q)."""
    r = ctx.high if which is None else which
    W = np.asarray(state, dtype=float)
    if W.ndim == 1:
        W = W[None, :]
    if W.shape[-1] != ctx.n:
        raise ValueError(f"state vectors have length {W.shape[-1]}, expected {ctx.n}")
    return W[:, ctx.space.element_dofs] @ r.phi.T


def assemble_picard(ctx: AssemblyContext, t: float, species_index: int, previous_state, kinetics):
    """``(N_i)_{ab} = -int J phi_a phi_b F_i(U^{n-1})``."""
    r = ctx.high
    Z = state_at_quadrature(ctx, previous_state, r)
    Fi = kinetics.F(Z)[species_index]
    return ctx.pattern.matrix(weighted_mass_values(ctx, r, -ctx.det(r, t) * Fi))


def assemble_picard_displayed(ctx: AssemblyContext, t: float, previous_state):
    """Experimental: the first Picard matrix exactly as typeset in the source
    display, ``int J phi_a phi_b U_2^2``. Not used by the solver."""
    r = ctx.high
    Z = state_at_quadrature(ctx, previous_state, r)
    return ctx.pattern.matrix(weighted_mass_values(ctx, r, ctx.det(r, t) * Z[1] ** 2))


def assemble_physical(space: FESpace, mapping: DomainMapping, t: float, exactness: int | None = None):
    """Unweighted mass and stiffness on the pushed-forward affine mesh.

    Vertices are moved to ``A_t(vertex)`` and elements stay affine. Agrees with
    the weighted reference matrices whenever ``A_t`` is affine in space.
    """
    ex = 2 * space.degree + 4 if exactness is None else exactness
    moved = mapping.position(space.mesh.vertices, t)
    r = _rule_data(space, moved, ex)
    pattern = SparsityPattern(space.element_dofs, space.dof_count)
    M = pattern.assemble(np.einsum("eq,qab->eab", r.weights, r.phiphi))
    S = pattern.assemble(np.einsum("eqai,eqbi->eab", r.grads * r.weights[:, :, None, None], r.grads))
    return M, S
