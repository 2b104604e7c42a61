"""Conforming triangulations of the unit square and uniform red refinement."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class ReferenceMesh:
    """Triangulation of the reference domain ``[0, 1]^2``.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise vertex triples
    boundary_edges : (nb, 2) int array
    level : number of uniform refinements applied since construction
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    level: int = 0
    _edges: np.ndarray = field(default=None, repr=False, compare=False)
    _tri_edges: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary_edges"):
            getattr(self, name).setflags(write=False)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def edges(self) -> np.ndarray:
        """Unique edges as sorted vertex pairs, in lexicographic order."""
        if self._edges is None:
            self._build_edges()
        return self._edges

    @property
    def triangle_edges(self) -> np.ndarray:
        """(nt, 3) global edge index of local edges (v0,v1), (v1,v2), (v2,v0)."""
        if self._tri_edges is None:
            self._build_edges()
        return self._tri_edges

    def _build_edges(self):
        t = self.triangles
        local = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1)
        pairs = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        object.__setattr__(self, "_edges", edges)
        object.__setattr__(self, "_tri_edges", inverse.reshape(-1, 3))

    def dump(self, path) -> None:
        """Write a plain-text node/element listing (see README)."""
        path = Path(path)
        with path.open("w") as fh:
            fh.write(f"vertices {self.num_vertices}\n")
            for x, y in self.vertices:
                fh.write(f"{x:.17g} {y:.17g}\n")
            fh.write(f"triangles {self.num_triangles}\n")
            for a, b, c in self.triangles:
                fh.write(f"{a} {b} {c}\n")


def build_unit_square_mesh(n: int) -> ReferenceMesh:
    """Uniform ``n x n`` lattice, each square cut bottom-left to top-right."""
    if int(n) != n or n < 1:
        raise ValueError(f"subdivisions per side must be an integer >= 1, got {n!r}")
    n = int(n)
    s = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(s, s, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    ll = (j * (n + 1) + i).ravel()
    lr = ll + 1
    ul = ll + n + 1
    ur = ul + 1
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    k = np.arange(n)
    bottom = np.column_stack([k, k + 1])
    right = np.column_stack([k * (n + 1) + n, (k + 1) * (n + 1) + n])
    top = np.column_stack([n * (n + 1) + k + 1, n * (n + 1) + k])
    left = np.column_stack([(k + 1) * (n + 1), k * (n + 1)])
    boundary = np.vstack([bottom, right, top, left]).astype(np.int64)
    return ReferenceMesh(vertices, triangles, boundary, level=0)


def refine_uniform(mesh: ReferenceMesh) -> ReferenceMesh:
    """Red refinement: split every triangle into four similar children."""
    nv = mesh.num_vertices
    edges = mesh.edges
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])

    t = mesh.triangles
    m = mesh.triangle_edges + nv  # midpoints of (v0v1, v1v2, v2v0)
    children = np.stack(
        [
            np.column_stack([t[:, 0], m[:, 0], m[:, 2]]),
            np.column_stack([m[:, 0], t[:, 1], m[:, 1]]),
            np.column_stack([m[:, 2], m[:, 1], t[:, 2]]),
            np.column_stack([m[:, 0], m[:, 1], m[:, 2]]),
        ],
        axis=1,
    ).reshape(-1, 3)

    be = mesh.boundary_edges
    keys = np.sort(be, axis=1)
    idx = _edge_lookup(edges, keys) + nv
    boundary = np.empty((2 * len(be), 2), dtype=np.int64)
    boundary[0::2] = np.column_stack([be[:, 0], idx])
    boundary[1::2] = np.column_stack([idx, be[:, 1]])
    return ReferenceMesh(vertices, children, boundary, level=mesh.level + 1)


def _edge_lookup(edges: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    n = int(edges.max()) + 1
    table = edges[:, 0] * n + edges[:, 1]
    keys = pairs[:, 0] * n + pairs[:, 1]
    pos = np.searchsorted(table, keys)
    if np.any(table[np.minimum(pos, len(table) - 1)] != keys):
        raise ValueError("boundary edge not present in triangulation")
    return pos


def mesh_size(mesh: ReferenceMesh) -> float:
    """Largest edge length over all triangles."""
    e = mesh.edges
    d = mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]]
    return float(np.sqrt((d * d).sum(axis=1)).max())


def mesh_for_level(level: int) -> ReferenceMesh:
    """Lattice mesh with ``2**level`` subdivisions per side, via refinement."""
    mesh = build_unit_square_mesh(1)
    for _ in range(level):
        mesh = refine_uniform(mesh)
    return mesh


def is_conforming(mesh: ReferenceMesh) -> bool:
    """Every interior edge is shared by exactly two triangles and no
    vertex sits in the interior of another triangle's edge."""
    t = mesh.triangles
    local = np.sort(np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1).reshape(-1, 2), axis=1)
    _, counts = np.unique(local, axis=0, return_counts=True)
    if np.any(counts > 2):
        return False
    n_boundary = int(np.sum(counts == 1))
    if n_boundary != len(mesh.boundary_edges):
        return False
    # hanging vertices: any vertex lying strictly inside an edge
    v = mesh.vertices
    e = mesh.edges
    a, b = v[e[:, 0]], v[e[:, 1]]
    for k in range(0, len(e), 256):
        aa, bb = a[k:k + 256, None, :], b[k:k + 256, None, :]
        d = bb - aa
        w = v[None, :, :] - aa
        cross = d[..., 0] * w[..., 1] - d[..., 1] * w[..., 0]
        dot = (d * w).sum(-1)
        ll = (d * d).sum(-1)
        inside = (np.abs(cross) < 1e-12 * ll) & (dot > 1e-12 * ll) & (dot < ll * (1 - 1e-12))
        if inside.any():
            return False
    return True
