"""Prescribed domain evolution maps and the geometry they induce.

All evaluators are vectorised: ``xi`` has shape ``(..., 2)`` and results
carry the same leading shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

FD_TIME_STEP = 1e-7


class NonInvertibleMappingError(ValueError):
    """Raised when the Jacobian determinant is not strictly positive."""


@dataclass
class GeometryAtPoint:
    jac: np.ndarray  # (..., 2, 2)
    det: np.ndarray  # (...)
    inv: np.ndarray  # (..., 2, 2)
    b_tensor: np.ndarray  # (..., 2, 2)
    velocity: np.ndarray  # (..., 2)
    dilution: np.ndarray  # (...)


def _inv2(m: np.ndarray, det: np.ndarray) -> np.ndarray:
    inv = np.empty_like(m)
    inv[..., 0, 0] = m[..., 1, 1] / det
    inv[..., 1, 1] = m[..., 0, 0] / det
    inv[..., 0, 1] = -m[..., 0, 1] / det
    inv[..., 1, 0] = -m[..., 1, 0] / det
    return inv


def _det2(m: np.ndarray) -> np.ndarray:
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


class DomainMapping:
    """Base class. Subclasses provide ``position``, ``jacobian``, ``velocity``
    and ``dt_jacobian``; everything else is derived."""

    kind = "custom"
    kappa = 0.0
    period = 1.0
    #: True when J depends on time only, so weighted mass = J(t) * plain mass.
    spatially_constant_det = False
    #: True when B = J K K^T does not change in time (stiffness can be reused).
    b_time_independent = False

    def position(self, xi, t):
        raise NotImplementedError

    def jacobian(self, xi, t):
        raise NotImplementedError

    def velocity(self, xi, t):
        raise NotImplementedError

    def dt_jacobian(self, xi, t):
        raise NotImplementedError

    def det(self, xi, t):
        return _det2(self.jacobian(xi, t))

    def dt_det(self, xi, t):
        """Time derivative of J from d/dt det = tr(adj(jac) d/dt jac)."""
        m = self.jacobian(xi, t)
        dm = self.dt_jacobian(xi, t)
        return (
            dm[..., 0, 0] * m[..., 1, 1] + m[..., 0, 0] * dm[..., 1, 1]
            - dm[..., 0, 1] * m[..., 1, 0] - m[..., 0, 1] * dm[..., 1, 0]
        )

    def geometry(self, xi, t, check: bool = True) -> GeometryAtPoint:
        xi = np.asarray(xi, dtype=float)
        jac = self.jacobian(xi, t)
        det = _det2(jac)
        if check and np.any(det <= 0):
            bad = np.unravel_index(np.argmin(det), det.shape)
            raise NonInvertibleMappingError(
                f"det J = {det[bad]:.3e} <= 0 at xi={xi[bad]}, t={t}"
            )
        inv = _inv2(jac, det)
        b = det[..., None, None] * np.einsum("...ik,...jk->...ij", inv, inv)
        return GeometryAtPoint(
            jac=jac,
            det=det,
            inv=inv,
            b_tensor=b,
            velocity=self.velocity(xi, t),
            dilution=self.dt_det(xi, t) / det,
        )

    def div_b_grad(self, xi, t, grad, hess):
        """Closed-form ``div(B grad u)`` given grad u (..., 2) and Hessian (..., 2, 2)."""
        raise NotImplementedError(
            f"{type(self).__name__} has no closed-form div(B grad u); "
            "manufactured sources need a built-in mapping"
        )


class IdentityMapping(DomainMapping):
    kind = "identity"
    spatially_constant_det = True
    b_time_independent = True

    def position(self, xi, t):
        return np.array(xi, dtype=float)

    def jacobian(self, xi, t):
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape[:-1] + (2, 2))
        out[..., 0, 0] = out[..., 1, 1] = 1.0
        return out

    def velocity(self, xi, t):
        return np.zeros_like(np.asarray(xi, dtype=float))

    def dt_jacobian(self, xi, t):
        xi = np.asarray(xi, dtype=float)
        return np.zeros(xi.shape[:-1] + (2, 2))

    def div_b_grad(self, xi, t, grad, hess):
        return hess[..., 0, 0] + hess[..., 1, 1]


@dataclass
class LinearPeriodic(DomainMapping):
    """``A_t(xi) = xi * (1 + kappa sin(pi t / T))``."""

    kappa: float = 1.0
    period: float = 1.0
    kind = "linear_periodic"
    spatially_constant_det = True
    b_time_independent = True

    def scale(self, t):
        return 1.0 + self.kappa * np.sin(np.pi * t / self.period)

    def dscale(self, t):
        return self.kappa * np.pi / self.period * np.cos(np.pi * t / self.period)

    def position(self, xi, t):
        return np.asarray(xi, dtype=float) * self.scale(t)

    def jacobian(self, xi, t):
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape[:-1] + (2, 2))
        out[..., 0, 0] = out[..., 1, 1] = self.scale(t)
        return out

    def velocity(self, xi, t):
        return np.asarray(xi, dtype=float) * self.dscale(t)

    def dt_jacobian(self, xi, t):
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape[:-1] + (2, 2))
        out[..., 0, 0] = out[..., 1, 1] = self.dscale(t)
        return out

    def div_b_grad(self, xi, t, grad, hess):
        # B is the identity for isotropic scaling in 2D
        return hess[..., 0, 0] + hess[..., 1, 1]


@dataclass
class NonlinearPeriodic(DomainMapping):
    """``A_t(xi)_i = xi_i (1 + kappa sin(pi t / T) xi_i)``."""

    kappa: float = 1.0
    period: float = 1.0
    kind = "nonlinear_periodic"

    def amplitude(self, t):
        return self.kappa * np.sin(np.pi * t / self.period)

    def damplitude(self, t):
        return self.kappa * np.pi / self.period * np.cos(np.pi * t / self.period)

    def position(self, xi, t):
        xi = np.asarray(xi, dtype=float)
        return xi * (1.0 + self.amplitude(t) * xi)

    def jacobian(self, xi, t):
        xi = np.asarray(xi, dtype=float)
        s = self.amplitude(t)
        out = np.zeros(xi.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0 + 2.0 * s * xi[..., 0]
        out[..., 1, 1] = 1.0 + 2.0 * s * xi[..., 1]
        return out

    def velocity(self, xi, t):
        xi = np.asarray(xi, dtype=float)
        return self.damplitude(t) * xi * xi

    def dt_jacobian(self, xi, t):
        xi = np.asarray(xi, dtype=float)
        ds = self.damplitude(t)
        out = np.zeros(xi.shape[:-1] + (2, 2))
        out[..., 0, 0] = 2.0 * ds * xi[..., 0]
        out[..., 1, 1] = 2.0 * ds * xi[..., 1]
        return out

    def div_b_grad(self, xi, t, grad, hess):
        # B = diag(p2/p1, p1/p2) with p_i = 1 + 2 s xi_i
        xi = np.asarray(xi, dtype=float)
        s = self.amplitude(t)
        p1 = 1.0 + 2.0 * s * xi[..., 0]
        p2 = 1.0 + 2.0 * s * xi[..., 1]
        return (
            p2 / p1 * hess[..., 0, 0]
            - 2.0 * s * p2 / p1**2 * grad[..., 0]
            + p1 / p2 * hess[..., 1, 1]
            - 2.0 * s * p1 / p2**2 * grad[..., 1]
        )


class CustomMapping(DomainMapping):
    """User-supplied map. ``dt_jacobian`` falls back to a forward time
    difference with step ``FD_TIME_STEP`` (approximate)."""

    kind = "custom"

    def __init__(
        self,
        position: Callable,
        jacobian: Callable,
        velocity: Callable,
        dt_jacobian: Optional[Callable] = None,
        period: float = 1.0,
    ):
        self._position = position
        self._jacobian = jacobian
        self._velocity = velocity
        self._dt_jacobian = dt_jacobian
        self.period = period
        self.dilution_is_approximate = dt_jacobian is None

    def position(self, xi, t):
        return self._position(np.asarray(xi, dtype=float), t)

    def jacobian(self, xi, t):
        return self._jacobian(np.asarray(xi, dtype=float), t)

    def velocity(self, xi, t):
        return self._velocity(np.asarray(xi, dtype=float), t)

    def dt_jacobian(self, xi, t):
        if self._dt_jacobian is not None:
            return self._dt_jacobian(np.asarray(xi, dtype=float), t)
        h = FD_TIME_STEP
        return (self.jacobian(xi, t + h) - self.jacobian(xi, t)) / h


def make_mapping(kind: str, kappa: float = 1.0, period: float = 1.0) -> DomainMapping:
    if kind == "identity":
        return IdentityMapping()
    if kind == "linear_periodic":
        return LinearPeriodic(kappa, period)
    if kind == "nonlinear_periodic":
        return NonlinearPeriodic(kappa, period)
    raise ValueError(f"unknown mapping kind {kind!r}")


def eval_geometry(mapping: DomainMapping, xi, t) -> GeometryAtPoint:
    return mapping.geometry(xi, t)


def domain_area(mapping: DomainMapping, t: float, exactness: int = 12) -> float:
    """``|Omega_t|`` as the quadrature integral of J over the unit square."""
    from .fespace import quadrature_rule

    q = quadrature_rule(exactness)
    xy = q.xy
    # unit square as two triangles: (0,0),(1,0),(1,1) and (0,0),(1,1),(0,1)
    lower = np.column_stack([xy[:, 0] + xy[:, 1], xy[:, 1]])
    upper = np.column_stack([xy[:, 0], xy[:, 0] + xy[:, 1]])
    pts = np.vstack([lower, upper])
    w = np.concatenate([q.weights, q.weights])
    return float(w @ mapping.det(pts, t))


def coercivity_bounds(mapping: DomainMapping, final_time: float, samples: int = 20):
    """Smallest and largest eigenvalue of B over a sample grid of (xi, t)."""
    s = np.linspace(0.0, 1.0, samples)
    X, Y = np.meshgrid(s, s)
    xi = np.column_stack([X.ravel(), Y.ravel()])
    lo, hi = np.inf, -np.inf
    for t in np.linspace(0.0, final_time, samples):
        ev = np.linalg.eigvalsh(mapping.geometry(xi, t).b_tensor)
        lo = min(lo, float(ev.min()))
        hi = max(hi, float(ev.max()))
    return lo, hi


def min_det(mapping: DomainMapping, final_time: float, samples: int = 201, grid: int = 21):
    """Smallest ``det J`` over a ``grid x grid`` lattice and ``samples`` times; returns (value, t)."""
    s = np.linspace(0.0, 1.0, grid)
    X, Y = np.meshgrid(s, s)
    xi = np.column_stack([X.ravel(), Y.ravel()])
    worst = (np.inf, 0.0)
    for t in np.linspace(0.0, final_time, samples):
        worst = min(worst, (float(mapping.det(xi, t).min()), float(t)))
    return worst


def require_invertible(mapping: DomainMapping, final_time: float, samples: int = 201) -> None:
    """Raise :class:`NonInvertibleMappingError` unless ``det J > 0`` on the sample grid."""
    d, t = min_det(mapping, final_time, samples)
    if not d > 0:
        raise NonInvertibleMappingError(f"{mapping.kind}: det J = {d:.3e} <= 0 at t = {t:.6g}")
