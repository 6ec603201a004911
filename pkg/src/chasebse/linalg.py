"""Dense complex kernels shared by the eigensolvers.

Matrices are plain ``numpy`` arrays: a Hermitian matrix is an ``(n, n)``
complex array, a block of vectors an ``(n, b)`` array whose columns are the
vectors.  Every application of ``H`` to a column is tallied in
:data:`matvec_counter`.
"""
from __future__ import annotations

import contextlib
from collections import Counter
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import DimensionError, NotHermitianError, RankDeficiencyError

__all__ = [
    "MatvecCounter", "matvec_counter", "SmallEigResult", "deterministic",
    "is_deterministic", "check_hermitian", "random_hermitian",
    "multiply_block", "qr_orthonormalize", "small_hermitian_eig",
    "orthogonalize_against", "residual_norms", "random_block",
]


class MatvecCounter:
    """Per-category tally of matrix-vector products."""

    def __init__(self):
        self.counts = Counter()

    def add(self, category, n):
        self.counts[category] += int(n)

    @property
    def total(self):
        return sum(self.counts.values())

    def get(self, category):
        return self.counts[category]

    def reset(self):
        self.counts.clear()

    def snapshot(self):
        return dict(self.counts)


matvec_counter = MatvecCounter()

_DETERMINISTIC = False


@contextlib.contextmanager
def deterministic(enabled=True):
    """Fix the reduction order of all kernels.

    Products are evaluated column by column on a single BLAS thread, so the
    result for a column never depends on which other columns share the block.
    """
    global _DETERMINISTIC
    previous = _DETERMINISTIC
    _DETERMINISTIC = bool(enabled)
    try:
        if enabled:
            with threadpool_limits(limits=1):
                yield
        else:
            yield
    finally:
        _DETERMINISTIC = previous


def is_deterministic():
    return _DETERMINISTIC


@dataclass
class SmallEigResult:
    values: np.ndarray
    vectors: np.ndarray


def check_hermitian(A, tol=1e-12):
    """Return ``A`` as a complex array after verifying Hermitian symmetry.

    The deviation ``max|A - A^H|`` is measured relative to ``max(1, max|A|)``.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NotHermitianError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    dev = float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0
    if dev > tol * scale:
        raise NotHermitianError(
            f"matrix is not Hermitian: max|A - A^H| = {dev:.3e}")
    return A.astype(np.complex128, copy=False)


def random_hermitian(n, rng, scale=1.0):
    """Random complex Hermitian matrix that is exactly Hermitian bitwise."""
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (A + A.conj().T) / 2


def random_block(n, b, rng):
    """Seeded normal complex block (not orthonormalized)."""
    return rng.standard_normal((n, b)) + 1j * rng.standard_normal((n, b))


def multiply_block(H, V, category="other"):
    """Return ``H @ V`` and count ``V.shape[1]`` matrix-vector products."""
    V = np.asarray(V)
    squeeze = V.ndim == 1
    if squeeze:
        V = V[:, None]
    if V.shape[0] != H.shape[1]:
        raise DimensionError(
            f"cannot multiply {H.shape} matrix by block with {V.shape[0]} rows")
    b = V.shape[1]
    if _DETERMINISTIC:
        W = np.empty((H.shape[0], b), dtype=np.result_type(H, V))
        for j in range(b):
            W[:, j] = H @ V[:, j]
    else:
        W = H @ V
    matvec_counter.add(category, b)
    return W[:, 0] if squeeze else W


def qr_orthonormalize(V, return_r=False, strict=True):
    """Orthonormalize the columns of ``V`` with Householder QR.

    Columns of ``Q`` are phase-fixed so that ``diag(R)`` is real and
    positive, which makes ``Q`` unique for a full-rank ``V``.  With
    ``strict=False`` a numerically dependent block is accepted: the
    Householder ``Q`` is orthonormal regardless, and the undetermined
    columns simply carry new directions.
    """
    V = np.asarray(V, dtype=np.complex128)
    n, b = V.shape
    if b > n:
        raise DimensionError(f"cannot orthonormalize {b} vectors in dimension {n}")
    if b == 0:
        return (V.copy(), np.zeros((0, 0), complex)) if return_r else V.copy()
    Q, R = np.linalg.qr(V)
    d = np.diag(R)
    threshold = 1e-14 * np.linalg.norm(V)
    small = np.flatnonzero(np.abs(d) < threshold)
    if small.size and strict:
        j = int(small[0])
        raise RankDeficiencyError(j, abs(d[j]), threshold)
    phase = np.ones_like(d)
    nz = d != 0
    phase[nz] = d[nz] / np.abs(d[nz])
    Q = Q * phase
    R = R * phase.conj()[:, None]
    return (Q, R) if return_r else Q


def small_hermitian_eig(A, tol=1e-12):
    """Diagonalize a small dense Hermitian matrix, values ascending."""
    A = check_hermitian(A, tol)
    A = (A + A.conj().T) / 2
    values, vectors = np.linalg.eigh(A)
    return SmallEigResult(values=values, vectors=vectors)


def _project_out(Q, V):
    return V - Q @ (Q.conj().T @ V)


def orthogonalize_against(V, Qlocked, rng=None):
    """Make the columns of ``V`` orthogonal to the orthonormal ``Qlocked``.

    Two classical Gram-Schmidt passes.  A column whose norm collapses below
    ``1e-14`` of its input norm is replaced by a random column orthogonal to
    ``Qlocked`` and normalized.

    Returns
    -------
    (block, replaced)
        The projected block and the indices of replaced columns.
    """
    V = np.asarray(V, dtype=np.complex128)
    if Qlocked is None or Qlocked.shape[1] == 0:
        return V.copy(), []
    if Qlocked.shape[0] != V.shape[0]:
        raise DimensionError("locked block and active block differ in row count")
    norms0 = np.linalg.norm(V, axis=0)
    W = _project_out(Qlocked, _project_out(Qlocked, V))
    norms = np.linalg.norm(W, axis=0)
    replaced = [j for j in range(V.shape[1])
                if norms[j] < 1e-14 * max(norms0[j], np.finfo(float).tiny)]
    if replaced:
        rng = rng if rng is not None else np.random.default_rng(0)
        for j in replaced:
            x = random_block(V.shape[0], 1, rng)
            x = _project_out(Qlocked, _project_out(Qlocked, x))
            W[:, j] = x[:, 0] / np.linalg.norm(x)
    return W, replaced


def residual_norms(H, V, lambdas, HV=None):
    """``||H v_i - lambda_i v_i||`` for every unit-normalized column ``v_i``.

    A precomputed ``HV`` (for the unnormalized ``V``) avoids another product.
    """
    V = np.asarray(V)
    lambdas = np.asarray(lambdas, dtype=float)
    if V.ndim != 2 or V.shape[1] != lambdas.shape[0]:
        raise DimensionError("number of columns and eigenvalues differ")
    if V.shape[1] == 0:
        return np.zeros(0)
    norms = np.linalg.norm(V, axis=0)
    if HV is None:
        HV = multiply_block(H, V, "resid")
    R = HV / norms - (V / norms) * lambdas
    return np.linalg.norm(R, axis=0)
