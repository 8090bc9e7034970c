import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgemg import sparse
from edgemg.sparse import SparseMatrix

from conftest import random_sparse


def test_matvec_identity_and_zero():
    np.testing.assert_array_equal(sparse.matvec(sparse.identity(3), [1, 2, 3]), [1, 2, 3])
    zero = SparseMatrix(2, 2, [0, 0, 0], [], [])
    np.testing.assert_array_equal(sparse.matvec(zero, [5, 7]), [0, 0])


def test_matvec_against_dense(rng):
    m, d = random_sparse(rng, 5, 4)
    v = rng.standard_normal(4)
    got = sparse.matvec(m, v)
    want = d @ v
    assert np.max(np.abs(got - want)) <= 1e-14 * np.max(np.abs(want))


def test_matvec_dimension_mismatch():
    with pytest.raises(ValueError):
        sparse.matvec(sparse.identity(3), [1.0, 2.0])
    with pytest.raises(ValueError):
        sparse.matvec_transpose(sparse.from_dense(np.ones((3, 2))), [1.0, 2.0])


def test_matvec_transpose_cases(rng):
    np.testing.assert_array_equal(sparse.matvec_transpose(sparse.identity(3), [1, 2, 3]), [1, 2, 3])
    col = sparse.from_dense([[1.0], [2.0]])
    np.testing.assert_array_equal(sparse.matvec_transpose(col, [3, 4]), [11.0])

    m, _ = random_sparse(rng, 6, 4)
    x, y = rng.standard_normal(4), rng.standard_normal(6)
    lhs = sparse.matvec(m, x) @ y
    rhs = x @ sparse.matvec_transpose(m, y)
    assert abs(lhs - rhs) <= 1e-13 * abs(lhs)


def test_cached_transpose_path_agrees(rng):
    m, d = random_sparse(rng, 7, 5)
    y = rng.standard_normal(7)
    scatter = sparse.matvec_transpose(m, y)
    m.csr_t
    cached = sparse.matvec_transpose(m, y)
    np.testing.assert_allclose(cached, d.T @ y, rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(scatter, cached, rtol=1e-14, atol=1e-14)


def test_spgemm(rng):
    a, da = random_sparse(rng, 8, 6)
    assert sparse.spgemm(a, sparse.identity(6)) == a
    b, db = random_sparse(rng, 6, 5)
    c = sparse.spgemm(a, b)
    assert np.max(np.abs(c.toarray() - da @ db)) <= 1e-13
    zero = SparseMatrix(6, 5, np.zeros(7, dtype=int), [], [])
    assert not np.any(sparse.spgemm(a, zero).toarray())
    with pytest.raises(ValueError):
        sparse.spgemm(a, a)


def test_spgemm_rows_sorted(rng):
    a, _ = random_sparse(rng, 10, 10, 0.5)
    c = sparse.spgemm(a, a)
    SparseMatrix(c.n_rows, c.n_cols, c.row_offsets, c.col_indices, c.values, check=True)


def test_kron(rng):
    assert sparse.kron(sparse.identity(2), sparse.identity(3)) == sparse.identity(6)
    m, dm = random_sparse(rng, 3, 4)
    np.testing.assert_array_equal(sparse.kron(sparse.from_dense([[2.0]]), m).toarray(), 2 * dm)
    a, da = random_sparse(rng, 2, 2, 0.9)
    b, db = random_sparse(rng, 3, 2, 0.9)
    np.testing.assert_allclose(sparse.kron(a, b).toarray(), np.kron(da, db), rtol=0, atol=1e-15)


def test_kron_bilinear_identity(rng):
    a, da = random_sparse(rng, 3, 3, 0.8)
    b, db = random_sparse(rng, 3, 3, 0.8)
    X = rng.standard_normal((3, 3))
    got = sparse.matvec(sparse.kron(a, b), X.ravel(order="F"))
    want = (db @ X @ da.T).ravel(order="F")
    assert np.max(np.abs(got - want)) <= 1e-13


def test_column_sumsq(rng):
    np.testing.assert_array_equal(sparse.column_sumsq(sparse.identity(4)), [1, 1, 1, 1])
    np.testing.assert_array_equal(sparse.column_sumsq(sparse.from_dense([[1, 2], [3, 4]])), [10, 20])
    m, d = random_sparse(rng, 9, 5)
    np.testing.assert_allclose(sparse.column_sumsq(m), np.diag(d.T @ d), rtol=1e-14)


def test_transpose(rng):
    m, d = random_sparse(rng, 5, 3)
    assert sparse.transpose(sparse.transpose(m)) == m
    assert sparse.transpose(sparse.identity(4)) == sparse.identity(4)
    np.testing.assert_array_equal(sparse.transpose(m).toarray(), d.T)


def test_invariants_rejected():
    with pytest.raises(ValueError):
        SparseMatrix(2, 2, [0, 2, 1], [0, 1, 0], [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        SparseMatrix(1, 3, [0, 2], [2, 1], [1.0, 1.0])
    with pytest.raises(ValueError):
        SparseMatrix(1, 3, [0, 2], [1, 1], [1.0, 1.0])
    with pytest.raises(ValueError):
        SparseMatrix(1, 2, [0, 1], [2], [1.0])


def test_row_scale_keeps_zeros():
    m = sparse.from_dense([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0]])
    s = sparse.row_scale([0.0, 2.0], m)
    assert s.nnz == m.nnz
    np.testing.assert_array_equal(s.toarray(), [[0, 0, 0], [0, 2, -2]])
    assert sparse.prune(s).nnz == 2


def test_matrix_market_roundtrip(tmp_path, rng):
    m, _ = random_sparse(rng, 7, 4)
    path = tmp_path / "m.mtx"
    sparse.write_matrix_market(path, m)
    text = path.read_text().splitlines()
    assert text[0] == "%%MatrixMarket matrix coordinate real general"
    assert text[1] == f"7 4 {m.nnz}"
    i, j, _ = text[2].split()
    assert int(i) >= 1 and int(j) >= 1
    assert sparse.read_matrix_market(path) == m


def test_matrix_market_empty_rows(tmp_path):
    m = SparseMatrix(3, 3, [0, 0, 1, 1], [2], [4.5])
    sparse.write_matrix_market(tmp_path / "e.mtx", m)
    assert sparse.read_matrix_market(tmp_path / "e.mtx") == m


@st.composite
def conforming(draw):
    m = draw(st.integers(1, 7))
    n = draw(st.integers(1, 7))
    seed = draw(st.integers(0, 2**31))
    return m, n, seed


@settings(max_examples=40, deadline=None)
@given(conforming())
def test_adjoint_property(args):
    m, n, seed = args
    rng = np.random.default_rng(seed)
    mat, d = random_sparse(rng, m, n, 0.5)
    x, y = rng.standard_normal(n), rng.standard_normal(m)
    gap = abs(sparse.matvec(mat, x) @ y - x @ sparse.matvec_transpose(mat, y))
    assert gap <= 1e-12 * np.linalg.norm(x) * np.linalg.norm(y) * max(np.linalg.norm(d), 1e-300) + 1e-300


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_spgemm_associative(seed):
    rng = np.random.default_rng(seed)
    a, _ = random_sparse(rng, 4, 5, 0.6)
    b, _ = random_sparse(rng, 5, 3, 0.6)
    c, _ = random_sparse(rng, 3, 4, 0.6)
    left = sparse.spgemm(sparse.spgemm(a, b), c).toarray()
    right = sparse.spgemm(a, sparse.spgemm(b, c)).toarray()
    scale = max(np.abs(left).max(), 1.0)
    assert np.max(np.abs(left - right)) <= 1e-12 * scale
