import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgemg import operators, sparse
from edgemg.operators import RegularizedSystem, WeightState

from conftest import random_sparse


def test_gradient_2x2_rows():
    L = operators.build_gradient(2, 2).matrix.toarray()
    want = np.array(
        [
            [-1, 1, 0, 0],
            [0, 0, -1, 1],
            [-1, 0, 1, 0],
            [0, -1, 0, 1],
        ],
        dtype=float,
    )
    np.testing.assert_array_equal(L, want)


@pytest.mark.parametrize("nv,nh", [(2, 2), (3, 5), (7, 4), (16, 16)])
def test_gradient_shape_and_constants(nv, nh):
    g = operators.build_gradient(nv, nh)
    L = g.matrix
    assert L.shape == (nh * (nv - 1) + (nh - 1) * nv, nv * nh)
    assert np.max(np.abs(sparse.matvec(L, np.ones(nv * nh)))) == 0.0
    counts = np.diff(L.row_offsets)
    assert np.all(counts == 2)
    for i in range(L.n_rows):
        vals = sorted(L.values[L.row_offsets[i] : L.row_offsets[i + 1]])
        assert vals == [-1.0, 1.0]


def test_gradient_row_count_64():
    assert operators.build_gradient(64, 64).n_edges == 8064


def test_gradient_column_major_convention():
    img = np.zeros((3, 4))
    img[:, 2:] = 1.0  # vertical edge between columns 1 and 2
    v = sparse.matvec(operators.build_gradient(3, 4).matrix, img.ravel(order="F"))
    vert, horiz = v[: 4 * 2], v[4 * 2 :]
    assert not np.any(vert)
    assert np.count_nonzero(horiz) == 3


def test_gradient_rejects_small():
    with pytest.raises(ValueError):
        operators.build_gradient(1, 5)


def test_update_single_nonzero():
    st0 = operators.initial_weights(4, q=2.0)
    st1 = operators.update_weights(st0, [0.0, 3.0, 0.0, 0.0])
    np.testing.assert_array_equal(st1.d_current, [1, 0, 1, 1])
    assert st1.outer_index == 1


def test_update_q1_example():
    st0 = operators.initial_weights(2, q=1.0)
    st1 = operators.update_weights(st0, [1.0, 0.5])
    np.testing.assert_array_equal(st1.last_factor, [0.0, 0.5])
    np.testing.assert_array_equal(st1.d_current, [0.0, 0.5])


def test_update_zero_vector_errors():
    with pytest.raises(ValueError):
        operators.update_weights(operators.initial_weights(3), np.zeros(3))


def test_update_wrong_length():
    with pytest.raises(ValueError):
        operators.update_weights(operators.initial_weights(3), np.ones(4))


@settings(max_examples=60, deadline=None)
@given(
    st.integers(0, 2**31),
    st.floats(0.1, 5.0),
    st.integers(1, 5),
)
def test_weights_bounded_and_monotone(seed, q, steps):
    rng = np.random.default_rng(seed)
    state = operators.initial_weights(12, q)
    for _ in range(steps):
        v = rng.standard_normal(12) * rng.integers(0, 2, 12)
        if not np.any(v):
            v[0] = 1.0
        new = operators.update_weights(state, v)
        assert np.all((new.d_current >= 0) & (new.d_current <= 1))
        assert np.all(new.d_current <= state.d_current)
        at_max = np.abs(v) == np.abs(v).max()
        assert np.all(new.d_current[at_max] == 0.0)
        state = new


def _system(rng, lam=0.7):
    A, dA = random_sparse(rng, 9, 6, 0.5)
    M, dM = random_sparse(rng, 7, 6, 0.5)
    b = rng.standard_normal(9)
    return RegularizedSystem(A, M, lam, b), dA, dM


def test_normal_apply_cases(rng):
    sys, dA, dM = _system(rng)
    x = rng.standard_normal(6)
    want = (dA.T @ dA + sys.lam**2 * dM.T @ dM) @ x
    got = operators.normal_apply(sys, x)
    assert np.linalg.norm(got - want) <= 1e-12 * np.linalg.norm(want)

    sys0 = RegularizedSystem(sys.A, sys.M, 0.0, sys.b)
    np.testing.assert_allclose(operators.normal_apply(sys0, x), dA.T @ dA @ x, rtol=1e-12)

    eye = sparse.identity(4)
    sys_i = RegularizedSystem(eye, eye, 1.0, np.zeros(4))
    np.testing.assert_array_equal(operators.normal_apply(sys_i, [1, 2, 3, 4]), [2, 4, 6, 8])

    with pytest.raises(ValueError):
        operators.normal_apply(sys, np.ones(5))


def test_normal_apply_symmetric_psd(rng):
    sys, _, _ = _system(rng)
    x, y = rng.standard_normal(6), rng.standard_normal(6)
    a = operators.normal_apply(sys, x) @ y
    b = x @ operators.normal_apply(sys, y)
    assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)
    assert operators.normal_apply(sys, x) @ x >= 0


def test_residual_norms(rng):
    sys, dA, dM = _system(rng)
    assert operators.residual_norms(sys, np.zeros(6)) == (pytest.approx(np.linalg.norm(sys.b), rel=1e-15), 0.0)
    x = rng.standard_normal(6)
    r, c = operators.residual_norms(sys, x)
    assert r == pytest.approx(np.linalg.norm(dA @ x - sys.b), rel=1e-13)
    assert c == pytest.approx(np.linalg.norm(dM @ x), rel=1e-13)

    Asq, dAsq = random_sparse(rng, 5, 5, 1.0)
    x_true = rng.standard_normal(5)
    sq = RegularizedSystem(Asq, sparse.identity(5), 3.0, dAsq @ x_true)
    assert operators.residual_norms(sq, x_true)[0] <= 1e-12 * np.linalg.norm(sq.b)


def test_weighted_gradient_is_row_scaling(rng):
    L = operators.build_gradient(4, 3).matrix
    d = rng.uniform(0, 1, L.n_rows)
    M = operators.weighted_gradient(WeightState(d), L)
    np.testing.assert_array_equal(M.toarray(), np.diag(d) @ L.toarray())
    assert M.n_rows == L.n_rows
