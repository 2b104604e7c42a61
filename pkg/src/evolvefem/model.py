"""Reaction kinetics in the form ``f_i(z) = gamma (c_i + z_i F_i(z))`` and the
manufactured benchmark used for convergence studies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .mapping import DomainMapping


@dataclass(frozen=True)
class Kinetics:
    """Reaction terms split into constants, an implicit linear factor and a
    lagged nonlinearity.

    ``F`` maps an array of shape (m, ...) to per-species values of the same
    shape.
    """

    gamma: float
    constants: tuple
    F: Callable[[np.ndarray], np.ndarray]
    diffusion: tuple
    name: str = "custom"

    def __post_init__(self):
        if len(self.constants) != len(self.diffusion):
            raise ValueError("constants and diffusion must have one entry per species")
        if not all(d > 0 and math.isfinite(d) for d in self.diffusion):
            raise ValueError(f"diffusion coefficients must be positive, got {self.diffusion}")
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be finite and non-negative, got {self.gamma}")

    @property
    def species_count(self) -> int:
        return len(self.diffusion)

    def f(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        c = np.asarray(self.constants, dtype=float).reshape((-1,) + (1,) * (z.ndim - 1))
        return self.gamma * (c + z * self.F(z))


def _schnakenberg_F(z):
    u1, u2 = z[0], z[1]
    return np.stack([u1 * u2 - 1.0, -u1 * u1])


def schnakenberg(a: float, b: float, gamma: float, d1: float, d2: float) -> Kinetics:
    """``f1 = gamma (a - u1 + u1^2 u2)``, ``f2 = gamma (b - u1^2 u2)``."""
    for name, v in (("a", a), ("b", b), ("gamma", gamma), ("d1", d1), ("d2", d2)):
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"schnakenberg parameter {name} must be positive and finite, got {v}")
    return Kinetics(gamma, (a, b), _schnakenberg_F, (d1, d2), name="schnakenberg")


def _zero_F(z):
    return np.zeros_like(z)


def pure_diffusion(diffusion: Sequence[float]) -> Kinetics:
    """Zero reaction terms (``gamma = 0``)."""
    return Kinetics(0.0, (0.0,) * len(diffusion), _zero_F, tuple(diffusion), name="none")


def steady_state(a: float, b: float) -> tuple[float, float]:
    """Spatially homogeneous Schnakenberg steady state."""
    return a + b, b / (a + b) ** 2


class ManufacturedProblem:
    """Exact solution ``u1 = sin(pi t) cos(pi x) cos(pi y)``, ``u2 = -u1`` and the
    source that makes it solve the reference-domain problem for the given
    mapping and kinetics."""

    signs = (1.0, -1.0)

    def __init__(self, mapping: DomainMapping, kinetics: Kinetics):
        if kinetics.species_count != 2:
            raise ValueError("the benchmark has two species")
        try:
            mapping.div_b_grad(np.zeros((1, 2)), 0.0, np.zeros((1, 2)), np.zeros((1, 2, 2)))
        except NotImplementedError as exc:
            raise ValueError(str(exc)) from None
        self.mapping = mapping
        self.kinetics = kinetics

    def amplitude(self, i: int, t: float) -> float:
        """Time factor: ``exact(i, xi, t) = amplitude(i, t) * profile(xi)``."""
        return self.signs[i] * math.sin(math.pi * t)

    @staticmethod
    def profile(xi):
        xi = np.asarray(xi, dtype=float)
        return np.cos(np.pi * xi[..., 0]) * np.cos(np.pi * xi[..., 1])

    @staticmethod
    def profile_gradient(xi):
        xi = np.asarray(xi, dtype=float)
        px, py = np.pi * xi[..., 0], np.pi * xi[..., 1]
        return -np.pi * np.stack([np.sin(px) * np.cos(py), np.cos(px) * np.sin(py)], axis=-1)

    def exact(self, i: int, xi, t: float):
        return self.amplitude(i, t) * self.profile(xi)

    def exact_dt(self, i: int, xi, t: float):
        return self.signs[i] * math.pi * math.cos(math.pi * t) * self.profile(xi)

    def exact_gradient(self, i: int, xi, t: float):
        return self.amplitude(i, t) * self.profile_gradient(xi)

    def exact_hessian(self, i: int, xi, t: float):
        xi = np.asarray(xi, dtype=float)
        px, py = np.pi * xi[..., 0], np.pi * xi[..., 1]
        amp = self.amplitude(i, t) * np.pi**2
        h = np.empty(xi.shape[:-1] + (2, 2))
        h[..., 0, 0] = h[..., 1, 1] = -amp * np.cos(px) * np.cos(py)
        h[..., 0, 1] = h[..., 1, 0] = amp * np.sin(px) * np.sin(py)
        return h

    def source(self, i: int, xi, t: float):
        """``du/dt + u div(a) - (D_i/J) div(B grad u) - f_i(u)``."""
        return self.source_all(xi, t)[i]

    def source_all(self, xi, t: float) -> np.ndarray:
        """Both species' sources, shape (2, ...)."""
        xi = np.asarray(xi, dtype=float)
        m = self.mapping
        J = m.det(xi, t)
        dil = m.dt_det(xi, t) / J
        # both species are +-1 times the same field, so build it once
        base = self.exact(0, xi, t)
        diff = m.div_b_grad(xi, t, self.exact_gradient(0, xi, t), self.exact_hessian(0, xi, t)) / J
        dt = self.exact_dt(0, xi, t)
        u = np.stack([s * base for s in self.signs])
        fu = self.kinetics.f(u)
        return np.stack([
            s * (dt + base * dil - self.kinetics.diffusion[k] * diff) - fu[k]
            for k, s in enumerate(self.signs)
        ])


def build_manufactured(mapping: DomainMapping, kinetics: Kinetics) -> ManufacturedProblem:
    return ManufacturedProblem(mapping, kinetics)
