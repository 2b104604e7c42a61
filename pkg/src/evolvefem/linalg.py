"""Sparse storage helpers and a preconditioned conjugate gradient solver.

Matrices are :class:`scipy.sparse.csr_matrix` in canonical form (sorted
column indices, no duplicates). :class:`SparsityPattern` precomputes the
scatter from element matrices into the CSR value array so that repeated
assembly only rewrites values.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class NonConvergence(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"CG did not converge: {iterations} iterations, relative residual {residual:.3e}"
        )
        self.iterations = iterations
        self.residual = residual


class IndefinitenessDetected(RuntimeError):
    def __init__(self, iteration: int, curvature: float):
        super().__init__(
            f"non-positive curvature p^T A p = {curvature:.3e} at CG iteration {iteration}"
        )
        self.iteration = iteration
        self.curvature = curvature


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float


class SparsityPattern:
    """CSR pattern shared by every matrix assembled on one FE space."""

    def __init__(self, element_dofs: np.ndarray, n: int):
        nloc = element_dofs.shape[1]
        rows = np.repeat(element_dofs, nloc, axis=1).ravel()
        cols = np.tile(element_dofs, (1, nloc)).ravel()
        keys = rows.astype(np.int64) * n + cols
        ukeys, scatter = np.unique(keys, return_inverse=True)
        self.n = n
        self.indices = (ukeys % n).astype(np.int32)
        urows = ukeys // n
        self.indptr = np.zeros(n + 1, dtype=np.int32)
        np.cumsum(np.bincount(urows, minlength=n), out=self.indptr[1:])
        self.scatter = scatter.ravel()
        self.nnz = len(ukeys)
        self._diag = None

    def values(self, element_matrices: np.ndarray) -> np.ndarray:
        """Sum ``(ne, nloc, nloc)`` element matrices into CSR values."""
        return np.bincount(self.scatter, weights=element_matrices.ravel(), minlength=self.nnz)

    def matrix(self, values: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix((values, self.indices, self.indptr), shape=(self.n, self.n))

    def assemble(self, element_matrices: np.ndarray) -> sp.csr_matrix:
        return self.matrix(self.values(element_matrices))

    @property
    def diagonal_positions(self) -> np.ndarray:
        if self._diag is None:
            rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
            self._diag = np.flatnonzero(rows == self.indices)
        return self._diag


def matvec(A, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {A.shape}, vector {x.shape}")
    return A @ x


def symmetry_defect(A) -> float:
    """``max |A_ij - A_ji| / max |A|``."""
    A = sp.csr_matrix(A)
    scale = abs(A).max()
    if scale == 0:
        return 0.0
    d = A - A.T
    return float(abs(d).max() / scale) if d.nnz else 0.0


def cg_solve(
    A,
    b,
    tol: float = 1e-10,
    max_iter: int = 10000,
    precond: str = "jacobi",
    x0=None,
) -> CGResult:
    """Preconditioned conjugate gradients with relative-residual stopping.

    Stops when ``||b - A x||_2 <= tol ||b||_2``. Raises
    :class:`NonConvergence` after ``max_iter`` iterations and
    :class:`IndefinitenessDetected` on non-positive curvature.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"dimension mismatch: matrix {A.shape}, rhs {b.shape}")
    if precond == "jacobi":
        d = A.diagonal()
        if np.any(d <= 0):
            raise IndefinitenessDetected(0, float(d.min()))
        minv = 1.0 / d
    elif precond == "none":
        minv = None
    else:
        raise ValueError(f"unknown preconditioner {precond!r}")

    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return CGResult(np.zeros(n), 0, 0.0)
    r = b - A @ x if x0 is not None else b.copy()
    rnorm = np.linalg.norm(r)
    if rnorm <= tol * bnorm:
        return CGResult(x, 0, float(rnorm / bnorm))
    z = r * minv if minv is not None else r
    p = z.copy()
    rz = r @ z
    for k in range(1, max_iter + 1):
        Ap = A @ p
        curv = p @ Ap
        if curv <= 0:
            raise IndefinitenessDetected(k, float(curv))
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.linalg.norm(r)
        if rnorm <= tol * bnorm:
            return CGResult(x, k, float(rnorm / bnorm))
        z = r * minv if minv is not None else r
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise NonConvergence(max_iter, rnorm / bnorm)


def dump_coo(A, path) -> None:
    """Write ``row col value`` lines (0-based) for external cross-checks."""
    C = sp.coo_matrix(A)
    with Path(path).open("w") as fh:
        for i, j, v in zip(C.row, C.col, C.data):
            fh.write(f"{i} {j} {v:.17g}\n")
