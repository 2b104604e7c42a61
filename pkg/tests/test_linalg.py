import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from evolvefem.linalg import (
    IndefinitenessDetected,
    NonConvergence,
    SparsityPattern,
    cg_solve,
    dump_coo,
    matvec,
    symmetry_defect,
)
from evolvefem.mesh import mesh_for_level


def laplacian_1d(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


def test_pattern_matches_coo_sum():
    t = mesh_for_level(2).triangles
    rng = np.random.default_rng(0)
    local = rng.normal(size=(len(t), 3, 3))
    pat = SparsityPattern(t, 25)
    A = pat.assemble(local)
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    ref = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(25, 25)).tocsr()
    assert abs(A - ref).max() < 1e-14
    assert A.has_canonical_format


def test_pattern_assembly_is_bit_reproducible():
    t = mesh_for_level(3).triangles
    local = np.random.default_rng(1).normal(size=(len(t), 3, 3))
    pat = SparsityPattern(t, 81)
    assert np.array_equal(pat.values(local), SparsityPattern(t, 81).values(local.copy()))


def test_diagonal_positions():
    t = mesh_for_level(1).triangles
    pat = SparsityPattern(t, 9)
    A = pat.assemble(np.ones((len(t), 3, 3)))
    assert np.array_equal(A.data[pat.diagonal_positions], A.diagonal())


@pytest.mark.parametrize("precond", ["jacobi", "none"])
def test_cg_matches_direct_solve(precond):
    A = laplacian_1d(50) + sp.identity(50) * 0.1
    b = np.sin(np.arange(50.0))
    res = cg_solve(A.tocsr(), b, tol=1e-12, precond=precond)
    assert np.allclose(res.x, spla.spsolve(A.tocsc(), b), atol=1e-9)
    assert res.residual <= 1e-12
    assert isinstance(res.residual, float)


def test_cg_initial_guess_already_solution():
    A = laplacian_1d(10).tocsr() + sp.identity(10, format="csr")
    x = np.arange(10.0)
    res = cg_solve(A, A @ x, x0=x)
    assert res.iterations == 0


def test_cg_zero_rhs():
    res = cg_solve(laplacian_1d(5), np.zeros(5))
    assert res.iterations == 0 and np.all(res.x == 0)


def test_cg_nonconvergence():
    with pytest.raises(NonConvergence) as info:
        cg_solve(laplacian_1d(200), np.ones(200), max_iter=3)
    assert info.value.iterations == 3


def test_cg_detects_indefinite():
    A = sp.diags([1.0, -1.0, 2.0], format="csr")
    with pytest.raises(IndefinitenessDetected):
        cg_solve(A, np.ones(3))
    B = sp.csr_matrix(np.array([[1.0, 3.0], [3.0, 1.0]]))
    with pytest.raises(IndefinitenessDetected):
        cg_solve(B, np.array([1.0, -1.0]), precond="none")


def test_cg_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        cg_solve(laplacian_1d(4), np.ones(5))
    with pytest.raises(ValueError, match="dimension"):
        matvec(laplacian_1d(4), np.ones(3))


def test_unknown_preconditioner():
    with pytest.raises(ValueError, match="preconditioner"):
        cg_solve(laplacian_1d(4), np.ones(4), precond="ilu")


def test_symmetry_defect():
    assert symmetry_defect(laplacian_1d(6)) == 0.0
    A = sp.csr_matrix(np.array([[2.0, 1.0], [0.0, 2.0]]))
    assert np.isclose(symmetry_defect(A), 0.5)


def test_dump_coo(tmp_path):
    p = tmp_path / "A.txt"
    dump_coo(laplacian_1d(3), p)
    lines = p.read_text().splitlines()
    assert len(lines) == 7
    assert lines[0].split() == ["0", "0", "2"]


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 40), st.floats(1e-3, 10), st.integers(0, 2**16))
def test_cg_random_spd(n, shift, seed):
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(n, n))
    A = sp.csr_matrix(G @ G.T + shift * np.eye(n))
    b = rng.normal(size=n)
    res = cg_solve(A, b, tol=1e-11, max_iter=20 * n)
    assert np.linalg.norm(A @ res.x - b) <= 1e-11 * np.linalg.norm(b) * 1.0001
