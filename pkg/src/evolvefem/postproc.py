"""Error norms, EOC tables and snapshot export on the physical domain."""

from __future__ import annotations

import csv
import math
import weakref
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .assembly import _rule_data
from .fespace import FESpace, lattice_indices
from .mapping import DomainMapping


class ExactReproduction(ValueError):
    """An error of exactly zero: the EOC is undefined and reported as 'exact'."""


_evaluators = weakref.WeakKeyDictionary()


class NormEvaluator:
    """Reference-domain norms of FE functions minus exact fields."""

    def __init__(self, space: FESpace, exactness: int | None = None):
        self.space = space
        ex = 2 * space.degree + 4 if exactness is None else exactness
        self.rule = _rule_data(space, space.mesh.vertices, ex)

    @classmethod
    def for_space(cls, space: FESpace) -> "NormEvaluator":
        ev = _evaluators.get(space)
        if ev is None:
            ev = _evaluators[space] = cls(space)
        return ev

    def values(self, U):
        return np.asarray(U)[self.space.element_dofs] @ self.rule.phi.T

    def gradients(self, U):
        loc = np.asarray(U)[self.space.element_dofs]
        return np.einsum("ea,eqai->eqi", loc, self.rule.grads)

    def l2_error(self, U, exact) -> float:
        """``exact`` is a callable on (ne, q, 2) points or precomputed (ne, q) values."""
        r = self.rule
        ex = exact(r.points) if callable(exact) else exact
        diff = self.values(U) - np.broadcast_to(ex, r.weights.shape)
        return math.sqrt(float(np.sum(r.weights * diff * diff)))

    def h1_error(self, U, exact_gradient) -> float:
        r = self.rule
        ex = exact_gradient(r.points) if callable(exact_gradient) else exact_gradient
        diff = self.gradients(U) - np.broadcast_to(ex, r.points.shape)
        return math.sqrt(float(np.sum(r.weights * (diff * diff).sum(-1))))

    def weighted_l2_norm(self, U, mapping: DomainMapping, t: float) -> float:
        r = self.rule
        v = self.values(U)
        J = mapping.det(r.points, t)
        return math.sqrt(float(np.sum(r.weights * J * v * v)))


def error_L2_ref(space: FESpace, U, exact) -> float:
    """``||U_h - u||_{L2(reference)}``; ``exact`` maps (..., 2) points to values."""
    return NormEvaluator.for_space(space).l2_error(U, exact)


def error_H1_ref(space: FESpace, U, exact_gradient) -> float:
    """``||grad(U_h - u)||_{L2(reference)}``."""
    return NormEvaluator.for_space(space).h1_error(U, exact_gradient)


def weighted_l2_norm(space: FESpace, U, mapping: DomainMapping, t: float) -> float:
    """``(int J U^2)^{1/2}``, the physical L2 norm pulled back to the reference domain."""
    return NormEvaluator.for_space(space).weighted_l2_norm(U, mapping, t)


@dataclass
class TrajectoryError:
    linf_l2: float
    linf_l2_species: list
    l2_h1: float
    l2_h1_species: list


def trajectory_error(l2_errors: Sequence, h1_errors: Sequence, taus: Sequence) -> TrajectoryError:
    """Aggregate per-step errors into L-infinity(L2) and L2(H1) norms.

    ``l2_errors[n]`` and ``h1_errors[n]`` are per-species errors at step n
    (n = 0 is the initial time); ``taus[n-1]`` is the step ending at n.
    The L2-in-time sum runs over n >= 1.
    """
    L2 = np.atleast_2d(np.asarray(l2_errors, dtype=float))
    H1 = np.atleast_2d(np.asarray(h1_errors, dtype=float))
    combined = np.sqrt((L2**2).sum(axis=1))
    linf = float(combined.max())
    per = L2.max(axis=0).tolist()
    if len(H1) == 1:
        l2h1_s = H1[0].tolist()
        l2h1 = float(np.sqrt((H1[0] ** 2).sum()))
    else:
        tau = np.asarray(taus, dtype=float)
        acc = (tau[:, None] * H1[1:] ** 2).sum(axis=0)
        l2h1_s = np.sqrt(acc).tolist()
        l2h1 = float(np.sqrt(acc.sum()))
    return TrajectoryError(linf, per, l2h1, l2h1_s)


def eoc(errors: Sequence[float], hs: Sequence[float]) -> list:
    """``ln(e_{i+1}/e_i) / ln(h_{i+1}/h_i)`` for consecutive pairs."""
    if len(errors) != len(hs) or len(errors) < 2:
        raise ValueError("eoc needs matching error and mesh-size lists of length >= 2")
    e = np.asarray(errors, dtype=float)
    h = np.asarray(hs, dtype=float)
    if np.any(e == 0):
        raise ExactReproduction("zero error encountered")
    if np.any(e < 0) or np.any(h <= 0):
        raise ValueError("errors and mesh sizes must be positive")
    return (np.log(e[1:] / e[:-1]) / np.log(h[1:] / h[:-1])).tolist()


@dataclass
class ErrorReport:
    degree: int
    mapping: str
    rows: list = field(default_factory=list)

    def add(self, **row):
        self.rows.append(row)

    def eocs(self, key: str = "err_combined") -> list:
        out = [None]
        for prev, cur in zip(self.rows, self.rows[1:]):
            try:
                out.append(eoc([prev[key], cur[key]], [prev["h"], cur["h"]])[0])
            except ExactReproduction:
                out.append("exact")
            except (ValueError, TypeError, KeyError):
                out.append(None)
        return out


TABLE_COLUMNS = [
    "level", "h", "log2_h", "dofs", "steps", "tau",
    "err_u1", "err_u2", "err_combined", "eoc",
    "h1_err_combined", "h1_eoc", "status",
]


def _fmt(v):
    if v is None:
        return "n.a."
    if isinstance(v, float):
        return f"{v:.6e}"
    return str(v)


def error_table_rows(report: ErrorReport) -> list:
    eo = report.eocs("err_combined")
    eo_h1 = report.eocs("h1_err_combined")
    rows = []
    for row, a, b in zip(report.rows, eo, eo_h1):
        r = {k: row.get(k) for k in TABLE_COLUMNS}
        r["eoc"], r["h1_eoc"] = a, b
        rows.append(r)
    return rows


def write_error_table(report: ErrorReport, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE_COLUMNS)
        for r in error_table_rows(report):
            w.writerow([_fmt(r[k]) for k in TABLE_COLUMNS])


def format_error_table(report: ErrorReport) -> str:
    """Console version of the CSV table, one row per level."""
    cols = [("level", "level"), ("|log2 h|", "log2_h"), ("dofs", "dofs"), ("steps", "steps"),
            ("err_u1", "err_u1"), ("err_u2", "err_u2"), ("err", "err_combined"), ("EOC", "eoc"),
            ("status", "status")]

    def cell(key, v):
        if v is None:
            return "n.a."
        if key == "log2_h":
            return f"{v:.2f}"
        if key == "eoc" and isinstance(v, float):
            return f"{v:.2f}"
        if isinstance(v, float):
            return f"{v:.3e}"
        return str(v)

    rows = [[cell(k, r[k]) for _, k in cols] for r in error_table_rows(report)]
    widths = [max(len(h), *(len(r[j]) for r in rows)) if rows else len(h) for j, (h, _) in enumerate(cols)]
    lines = [f"P{report.degree} {report.mapping}"]
    lines.append("  ".join(h.rjust(w) for (h, _), w in zip(cols, widths)))
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)


def _subtriangles(degree: int) -> np.ndarray:
    """P1 sub-triangulation of the local Lagrange lattice, local node indices."""
    idx = lattice_indices(degree)
    where = {(int(j), int(k)): n for n, (_, j, k) in enumerate(idx)}
    p = degree
    tris = []
    for j in range(p):
        for k in range(p - j):
            tris.append((where[(j, k)], where[(j + 1, k)], where[(j, k + 1)]))
            if j + k <= p - 2:
                tris.append((where[(j + 1, k)], where[(j + 1, k + 1)], where[(j, k + 1)]))
    return np.array(tris, dtype=np.int64)


def export_physical_snapshot(space: FESpace, mapping: DomainMapping, t: float, fields, path,
                             names: Sequence[str] | None = None) -> Path:
    """Write a legacy ASCII VTK unstructured grid of the fields on ``Omega_t``.

    Points are the Lagrange nodes pushed forward by ``A_t``; for degree > 1
    each element is split into its P1 sub-triangles.
    """
    path = Path(path)
    fields = [np.asarray(f, dtype=float) for f in fields]
    names = list(names) if names is not None else [f"u{i + 1}" for i in range(len(fields))]
    pts = mapping.position(space.dof_points, t)
    cells = space.element_dofs[:, _subtriangles(space.degree)].reshape(-1, 3)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            fh.write("# vtk DataFile Version 3.0\n")
            fh.write(f"evolvefem snapshot t={t:.17g}\n")
            fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
            fh.write(f"POINTS {len(pts)} double\n")
            for x, y in pts:
                fh.write(f"{x:.17g} {y:.17g} 0\n")
            fh.write(f"CELLS {len(cells)} {4 * len(cells)}\n")
            for a, b, c in cells:
                fh.write(f"3 {a} {b} {c}\n")
            fh.write(f"CELL_TYPES {len(cells)}\n")
            fh.write("5\n" * len(cells))
            fh.write(f"POINT_DATA {len(pts)}\n")
            for name, f in zip(names, fields):
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                fh.write("".join(f"{v:.17g}\n" for v in f))
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc}") from exc
    return path


def read_vtk_points_and_fields(path) -> tuple[np.ndarray, dict]:
    """Minimal reader for files produced by :func:`export_physical_snapshot`."""
    lines = Path(path).read_text().splitlines()
    i = 0
    pts, fields = None, {}
    npts = 0
    while i < len(lines):
        tok = lines[i].split()
        if tok and tok[0] == "POINTS":
            npts = int(tok[1])
            pts = np.array([[float(v) for v in l.split()] for l in lines[i + 1:i + 1 + npts]])
            i += npts
        elif tok and tok[0] == "SCALARS":
            vals = np.array([float(v) for v in lines[i + 2:i + 2 + npts]])
            fields[tok[1]] = vals
            i += 1 + npts
        i += 1
    return pts, fields
