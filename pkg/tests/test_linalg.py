import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chasebse import linalg
from chasebse.errors import DimensionError, NotHermitianError, RankDeficiencyError

from oracles import jacobi_eigenvalues, naive_matmul


def _unitary(n, rng):
    Q, _ = np.linalg.qr(linalg.random_block(n, n, rng))
    return Q


# -- multiply_block ------------------------------------------------------------

def test_multiply_identity(rng):
    V = linalg.random_block(5, 2, rng)
    assert np.array_equal(linalg.multiply_block(np.eye(5, dtype=complex), V), V)


def test_multiply_zero_block(rng):
    H = linalg.random_hermitian(6, rng)
    assert np.all(linalg.multiply_block(H, np.zeros((6, 3), complex)) == 0)


def test_multiply_matches_triple_loop(rng):
    H = linalg.random_hermitian(16, rng)
    V = linalg.random_block(16, 3, rng)
    W = linalg.multiply_block(H, V)
    ref = naive_matmul(H, V)
    assert np.linalg.norm(W - ref) <= 1e-13 * np.linalg.norm(ref)


def test_multiply_counts_columns(rng):
    H = linalg.random_hermitian(8, rng)
    linalg.multiply_block(H, linalg.random_block(8, 5, rng), "filter")
    linalg.multiply_block(H, linalg.random_block(8, 1, rng)[:, 0], "rr")
    assert linalg.matvec_counter.get("filter") == 5
    assert linalg.matvec_counter.get("rr") == 1
    assert linalg.matvec_counter.total == 6


def test_multiply_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        linalg.multiply_block(np.eye(4), np.ones((5, 2)))


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 40), b1=st.integers(1, 6), b2=st.integers(1, 6),
       seed=st.integers(0, 2**32 - 1))
def test_multiply_distributes_over_concatenation(n, b1, b2, seed):
    rng = np.random.default_rng(seed)
    H = linalg.random_hermitian(n, rng)
    V1, V2 = linalg.random_block(n, b1, rng), linalg.random_block(n, b2, rng)
    with linalg.deterministic():
        whole = linalg.multiply_block(H, np.hstack([V1, V2]))
        parts = np.hstack([linalg.multiply_block(H, V1), linalg.multiply_block(H, V2)])
    assert np.array_equal(whole, parts)


# -- qr_orthonormalize ---------------------------------------------------------

def test_qr_of_orthonormal_block_is_phase_copy(rng):
    V = _unitary(7, rng)[:, :3]
    Q = linalg.qr_orthonormalize(V)
    phase = np.sum(V.conj() * Q, axis=0)
    assert np.allclose(np.abs(phase), 1.0, atol=1e-12)
    assert np.allclose(Q, V * phase, atol=1e-12)


def test_qr_random_block(rng):
    V = linalg.random_block(8, 3, rng)
    Q, R = linalg.qr_orthonormalize(V, return_r=True)
    assert np.max(np.abs(Q.conj().T @ Q - np.eye(3))) <= 1e-12
    assert np.linalg.norm(Q @ R - V) <= 1e-12 * np.linalg.norm(V)
    assert np.all(np.diag(R).real > 0) and np.allclose(np.diag(R).imag, 0)


def test_qr_duplicated_column_raises(rng):
    v = linalg.random_block(6, 1, rng)
    with pytest.raises(RankDeficiencyError) as info:
        linalg.qr_orthonormalize(np.hstack([v, linalg.random_block(6, 1, rng), v]))
    assert info.value.column == 2


def test_qr_nonstrict_accepts_dependent_block(rng):
    v = linalg.random_block(6, 1, rng)
    Q = linalg.qr_orthonormalize(np.hstack([v, v]), strict=False)
    assert np.max(np.abs(Q.conj().T @ Q - np.eye(2))) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 30), data=st.data())
def test_qr_idempotent(n, data):
    b = data.draw(st.integers(1, n))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    Q1 = linalg.qr_orthonormalize(linalg.random_block(n, b, rng))
    Q2 = linalg.qr_orthonormalize(Q1)
    phase = np.sum(Q1.conj() * Q2, axis=0)
    assert np.max(np.abs(Q2 - Q1 * phase)) <= 1e-12


# -- small_hermitian_eig -------------------------------------------------------

def test_eig_diagonal():
    res = linalg.small_hermitian_eig(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(res.values, [1, 2, 3])


def test_eig_identity():
    assert np.allclose(linalg.small_hermitian_eig(np.eye(4)).values, 1.0)


def test_eig_matches_jacobi(rng):
    A = linalg.random_hermitian(10, rng)
    res = linalg.small_hermitian_eig(A)
    assert np.max(np.abs(res.values - jacobi_eigenvalues(A))) <= 1e-11
    V = res.vectors
    assert np.max(np.abs(V.conj().T @ V - np.eye(10))) <= 1e-12


def test_eig_rejects_non_hermitian(rng):
    A = linalg.random_block(4, 4, rng)
    with pytest.raises(NotHermitianError):
        linalg.small_hermitian_eig(A)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 25), seed=st.integers(0, 2**32 - 1))
def test_eig_unitary_similarity_and_trace(n, seed):
    rng = np.random.default_rng(seed)
    A = linalg.random_hermitian(n, rng)
    U = _unitary(n, rng)
    B = U.conj().T @ A @ U
    B = (B + B.conj().T) / 2
    a = linalg.small_hermitian_eig(A).values
    b = linalg.small_hermitian_eig(B).values
    assert np.all(np.diff(a) >= 0)
    assert np.max(np.abs(a - b)) <= 1e-11
    assert abs(a.sum() - np.trace(A).real) <= 1e-10 * np.linalg.norm(A)


# -- orthogonalize_against -----------------------------------------------------

def test_orthogonalize_empty_lock(rng):
    V = linalg.random_block(6, 2, rng)
    W, replaced = linalg.orthogonalize_against(V, np.zeros((6, 0)))
    assert np.array_equal(W, V) and replaced == []


def test_orthogonalize_replaces_annihilated_column(rng):
    Q = linalg.qr_orthonormalize(linalg.random_block(8, 3, rng))
    v = Q @ np.array([[1.0], [2.0], [-1.0]])
    W, replaced = linalg.orthogonalize_against(v, Q, rng)
    assert replaced == [0]
    assert abs(np.linalg.norm(W[:, 0]) - 1) <= 1e-12
    assert np.max(np.abs(Q.conj().T @ W)) <= 1e-12


def test_orthogonalize_inner_products(rng):
    Q = linalg.qr_orthonormalize(linalg.random_block(30, 5, rng))
    W, replaced = linalg.orthogonalize_against(linalg.random_block(30, 4, rng), Q)
    assert replaced == []
    assert np.max(np.abs(Q.conj().T @ W)) <= 1e-12


# -- residual_norms ------------------------------------------------------------

def test_residuals_exact_pairs():
    H = np.diag([1.0, 2.0, 3.0]).astype(complex)
    r = linalg.residual_norms(H, np.eye(3, dtype=complex), [1, 2, 3])
    assert np.all(r <= 1e-14)


def test_residual_simple():
    H = np.diag([1.0, 2.0]).astype(complex)
    r = linalg.residual_norms(H, np.array([[1.0], [0.0]]), [0.0])
    assert r[0] == pytest.approx(1.0)


def test_residual_direct_evaluation(rng):
    H = linalg.random_hermitian(20, rng)
    v = linalg.random_block(20, 1, rng)[:, 0]
    v /= np.linalg.norm(v)
    lam = np.vdot(v, H @ v).real
    direct = np.sqrt(sum(abs(sum(H[i, j] * v[j] for j in range(20)) - lam * v[i]) ** 2
                         for i in range(20)))
    r = linalg.residual_norms(H, v[:, None], [lam])[0]
    assert abs(r - direct) <= 1e-13 * max(1.0, direct)


def test_residual_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        linalg.residual_norms(np.eye(3), np.eye(3), [1.0, 2.0])
