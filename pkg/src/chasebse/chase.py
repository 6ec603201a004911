"""Chebyshev accelerated subspace iteration for the lowest eigenpairs.

The solver follows the usual loop: estimate spectral bounds with a few
Lanczos runs, then repeat filter -> QR -> Rayleigh-Ritz -> residuals ->
locking until ``nev`` pairs have converged.  Filter degrees are planned per
column from the predicted convergence rate of each Ritz value.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import (DegenerateIntervalError, DimensionError,
                     InsideIntervalError, LanczosBreakdownError,
                     PartialConvergenceError)
from .linalg import (multiply_block, orthogonalize_against, qr_orthonormalize,
                     random_block, small_hermitian_eig)

log = logging.getLogger(__name__)

PHASES = ("lanczos", "filter", "qr", "rr", "resid")


@dataclass
class SpectralBounds:
    """Filter interval and normalization point.

    ``mu1`` estimates the lowest eigenvalue, ``alpha`` the lower end of the
    damped interval and ``beta`` bounds the spectrum from above.
    """
    mu1: float
    alpha: float
    beta: float

    @property
    def c(self):
        return (self.alpha + self.beta) / 2

    @property
    def e(self):
        return (self.beta - self.alpha) / 2

    @property
    def scale(self):
        return max(abs(self.mu1), abs(self.beta))

    @property
    def degenerate(self):
        return not self.e > 1e-14 * max(1.0, self.scale)


@dataclass
class ChaseConfig:
    nev: int
    nex: int
    tol: float = 1e-10
    max_iters: int = 25
    lanczos_steps: int = 25
    lanczos_starts: int = 4
    base_degree: int = 20
    degree_cap: int = 72
    seed: int = 0

    def __post_init__(self):
        if self.nev < 1 or self.nex < 1:
            raise ValueError("nev and nex must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class ChaseResult:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    matvecs: int
    phase_timers: dict
    converged: bool = True
    dense_fallback: bool = False
    bounds: SpectralBounds | None = None
    scale: float = 0.0
    extra_matvecs: int = 0  # Rayleigh-Ritz and residual products
    history: list = field(default_factory=list)


@dataclass
class DampingReport:
    gamma: float
    c: float
    e: float
    rho_inverse: float


@dataclass
class RitzPairs:
    values: np.ndarray
    basis: np.ndarray
    hbasis: np.ndarray  # H @ basis, reused for residuals


@dataclass
class LockPartition:
    locked_values: np.ndarray
    locked_vectors: np.ndarray
    locked_residuals: np.ndarray
    active_values: np.ndarray
    active_vectors: np.ndarray
    active_residuals: np.ndarray
    newly_locked: int
    replaced: list


# -- spectral bounds ---------------------------------------------------------

def _lanczos_run(H, v, steps):
    """One Lanczos run with full reorthogonalization.

    Returns the tridiagonal coefficients and the norm of the final
    residual vector.  The run stops early on an invariant subspace.
    """
    n = H.shape[0]
    V = np.zeros((n, steps + 1), dtype=np.complex128)
    a = np.zeros(steps)
    b = np.zeros(steps)
    V[:, 0] = v / np.linalg.norm(v)
    for j in range(steps):
        w = multiply_block(H, V[:, j], "lanczos")
        a[j] = np.vdot(V[:, j], w).real
        basis = V[:, :j + 1]
        w = w - basis @ (basis.conj().T @ w)
        w = w - basis @ (basis.conj().T @ w)
        b[j] = np.linalg.norm(w)
        if b[j] < 1e-14 * max(1.0, abs(a[j])):
            return a[:j + 1], b[:j], 0.0, True
        V[:, j + 1] = w / b[j]
    return a, b[:-1], b[-1], False


def lanczos_bounds(H, steps, starts, nev_plus_nex, seed=0):
    """Estimate ``mu1``, ``alpha`` and ``beta`` from ``starts`` Lanczos runs.

    ``beta`` is the largest Ritz value plus the residual norm of its Ritz
    pair.  ``alpha`` is read off the approximate cumulative spectral density
    (Ritz values weighted by squared first components of the tridiagonal
    eigenvectors) at the fraction ``nev_plus_nex / N``.

    A run that hits an invariant subspace is retried from a fresh random
    vector, up to ``starts`` attempts.  If every attempt breaks down, the
    truncated run is kept: a random start spans an invariant Krylov space
    only when its Ritz values are exact eigenvalues.
    """
    n = H.shape[0]
    if nev_plus_nex >= n:
        raise DimensionError("nev + nex must be smaller than N")
    steps = min(steps, n)
    rng = np.random.default_rng(seed)
    thetas, weights = [], []
    mu1, beta = math.inf, -math.inf
    for _ in range(starts):
        for _attempt in range(starts):
            v = random_block(n, 1, rng)[:, 0]
            a, b, b_last, broke = _lanczos_run(H, v, steps)
            if not broke:
                break
            log.debug("Lanczos breakdown after %d steps, restarting", len(a))
        T = np.diag(a) + np.diag(b, 1) + np.diag(b, -1)
        theta, S = np.linalg.eigh(T)
        if not np.all(np.isfinite(theta)):
            raise LanczosBreakdownError("non-finite Ritz values")
        mu1 = min(mu1, theta[0])
        beta = max(beta, theta[-1] + b_last * abs(S[-1, -1]))
        thetas.append(theta)
        weights.append(np.abs(S[0, :]) ** 2)
    theta = np.concatenate(thetas)
    w = np.concatenate(weights) / starts
    order = np.argsort(theta, kind="stable")
    theta, cdf = theta[order], np.cumsum(w[order])
    k = int(np.searchsorted(cdf, nev_plus_nex / n))
    alpha = theta[min(k, len(theta) - 1)]
    if alpha <= mu1:
        above = theta[theta > mu1]
        alpha = above[0] if above.size else mu1
    alpha = min(alpha, beta)
    return SpectralBounds(mu1=float(mu1), alpha=float(alpha), beta=float(beta))


# -- filter planning ---------------------------------------------------------

def damping_factor(gamma, alpha, beta):
    """Inverse convergence rate of the filter at ``gamma`` below [alpha, beta]."""
    if not alpha < beta:
        raise DegenerateIntervalError(f"alpha={alpha} must be below beta={beta}")
    if gamma >= alpha:
        raise InsideIntervalError(
            f"gamma={gamma} is inside the filtered interval [{alpha}, {beta}]")
    c = (alpha + beta) / 2
    e = (beta - alpha) / 2
    z = (gamma - c) / e
    s = math.sqrt(max(z * z - 1.0, 0.0))
    rho = max(abs(z + s), abs(z - s))
    return DampingReport(gamma=gamma, c=c, e=e, rho_inverse=1.0 / rho)


def plan_degrees(bounds, ritz_values, residuals, tol, base_degree, cap,
                 first=False):
    """Filter degree per column; 0 marks converged columns.

    Returns ``(degrees, flagged)`` where ``flagged`` lists the columns for
    which no damping is available and the cap was used.
    """
    residuals = np.asarray(residuals, dtype=float)
    degrees = np.zeros(len(residuals), dtype=int)
    flagged = []
    for i, (gamma, res) in enumerate(zip(ritz_values, residuals)):
        if res <= tol:
            continue
        if first:
            degrees[i] = base_degree
            continue
        try:
            rho_inv = damping_factor(gamma, bounds.alpha, bounds.beta).rho_inverse
        except (InsideIntervalError, DegenerateIntervalError):
            rho_inv = 1.0
        if rho_inv >= 1.0:
            degrees[i] = cap
            flagged.append(i)
            continue
        d = math.ceil(math.log(tol / res) / math.log(rho_inv))
        degrees[i] = max(1, min(cap, d))
    return degrees, flagged


def chebyshev_filter(H, V, degrees, bounds, deflate=None):
    """Apply the scaled Chebyshev polynomial of per-column degree.

    The polynomial of degree ``d`` is ``T_d((x - c)/e) / T_d((mu1 - c)/e)``.
    Columns are sorted by degree so that every step multiplies one
    contiguous block.

    ``deflate`` is an orthonormal block (the locked vectors) projected out
    after every step.  Without it, rounding-level components along locked
    eigenvectors far below the active ones are amplified faster than the
    wanted components and swamp the block at high degree.
    """
    V = np.asarray(V, dtype=np.complex128)
    degrees = np.asarray(degrees, dtype=int)
    if degrees.shape != (V.shape[1],):
        raise DimensionError("one degree per column required")
    if np.any(degrees < 0):
        raise ValueError("degrees must be nonnegative")
    c, e, mu1 = bounds.c, bounds.e, bounds.mu1
    if not e > 0:
        raise DegenerateIntervalError("filter interval has zero width")
    out = V.copy()
    if V.shape[1] == 0 or degrees.max() == 0:
        return out
    order = np.argsort(-degrees, kind="stable")
    ds = degrees[order]
    Vs = V[:, order]
    res = Vs.copy()

    def count(t):
        return int(np.count_nonzero(ds >= t))

    if deflate is not None and deflate.shape[1] == 0:
        deflate = None

    def project(W):
        if deflate is None:
            return W
        return W - deflate @ (deflate.conj().T @ W)

    sigma1 = e / (mu1 - c)  # negative; keeps p_d(mu1) == 1 for every d
    k = count(1)
    X = project(Vs[:, :k])
    # shift once: rounding x - c a single time per entry keeps the damped
    # components accurate at high degree
    Hc = np.array(H, dtype=np.complex128)
    Hc[np.diag_indices_from(Hc)] -= c
    Y = project((sigma1 / e) * multiply_block(Hc, X, "filter"))
    res[:, count(2):k] = Y[:, count(2):k]
    sigma = sigma1
    for t in range(2, int(ds[0]) + 1):
        k = count(t)
        sigma_new = 1.0 / (2.0 / sigma1 - sigma)
        Yk = Y[:, :k]
        Ynew = project((2.0 * sigma_new / e) * multiply_block(Hc, Yk, "filter")
                       - (sigma * sigma_new) * X[:, :k])
        X, Y, sigma = Yk, Ynew, sigma_new
        k_next = count(t + 1)
        res[:, k_next:k] = Y[:, k_next:k]
    out[:, order] = res
    return out


# -- projection and locking --------------------------------------------------

def rayleigh_ritz(H, Q, category="rr"):
    """Project onto span(Q) and rotate to Ritz vectors, values ascending."""
    HQ = multiply_block(H, Q, category)
    A = Q.conj().T @ HQ
    eig = small_hermitian_eig((A + A.conj().T) / 2)
    return RitzPairs(values=eig.values, basis=Q @ eig.vectors,
                     hbasis=HQ @ eig.vectors)


def lock_converged(ritz_values, basis, residuals, tol, scale,
                   locked_values=None, locked_vectors=None,
                   locked_residuals=None, max_lock=None, rng=None):
    """Move converged columns to the locked set.

    Only the first ``max_lock`` columns are eligible.  Previously locked pairs
    are kept; the merged locked set is sorted ascending, and the active block
    is re-orthogonalized against it.
    """
    ritz_values = np.asarray(ritz_values, dtype=float)
    residuals = np.asarray(residuals, dtype=float)
    n = basis.shape[0]
    if locked_values is None:
        locked_values = np.zeros(0)
        locked_vectors = np.zeros((n, 0), dtype=np.complex128)
    if locked_residuals is None:
        locked_residuals = np.zeros(len(locked_values))
    eligible = len(ritz_values) if max_lock is None else max_lock
    conv = residuals <= tol * scale
    conv[eligible:] = False
    new_idx = np.flatnonzero(conv)
    act_idx = np.flatnonzero(~conv)
    lv = np.concatenate([locked_values, ritz_values[new_idx]])
    lV = np.concatenate([locked_vectors, basis[:, new_idx]], axis=1)
    order = np.argsort(lv, kind="stable")
    lr = np.concatenate([locked_residuals, residuals[new_idx]])[order]
    lv, lV = lv[order], lV[:, order]
    active, replaced = orthogonalize_against(basis[:, act_idx], lV, rng)
    return LockPartition(locked_values=lv, locked_vectors=lV,
                         locked_residuals=lr,
                         active_values=ritz_values[act_idx],
                         active_vectors=active,
                         active_residuals=residuals[act_idx],
                         newly_locked=len(new_idx), replaced=replaced)


# -- driver ------------------------------------------------------------------

def _dense_solve(H, nev):
    t0 = time.perf_counter()
    values, vectors = np.linalg.eigh(H)
    values, vectors = values[:nev], vectors[:, :nev]
    resid = linalg.residual_norms(H, vectors, values)
    timers = dict.fromkeys(PHASES, 0.0)
    timers["rr"] = time.perf_counter() - t0
    return ChaseResult(values=values, vectors=vectors, residuals=resid,
                       iterations=0, matvecs=0, phase_timers=timers,
                       dense_fallback=True,
                       scale=float(max(abs(values[0]), abs(values[-1]))))


def chase_solve(H, config):
    """Lowest ``config.nev`` eigenpairs of the Hermitian matrix ``H``.

    Falls back to dense diagonalization when ``nev + nex >= N``.  Raises
    :class:`PartialConvergenceError` carrying the converged subset when
    ``max_iters`` is exhausted.
    """
    H = np.asarray(H)
    n = H.shape[0]
    nev, nex = config.nev, config.nex
    if nev > n:
        raise DimensionError(f"nev={nev} exceeds N={n}")
    if nev + nex >= n:
        log.info("nev + nex >= N, using dense diagonalization")
        return _dense_solve(H, nev)

    counts0 = linalg.matvec_counter.snapshot()
    timers = dict.fromkeys(PHASES, 0.0)
    rng = np.random.default_rng(config.seed)

    t0 = time.perf_counter()
    bounds = lanczos_bounds(H, config.lanczos_steps, config.lanczos_starts,
                            nev + nex, seed=config.seed)
    timers["lanczos"] += time.perf_counter() - t0
    scale = bounds.scale
    tol = config.tol
    mu1 = bounds.mu1
    alpha = bounds.alpha

    t0 = time.perf_counter()
    V = qr_orthonormalize(random_block(n, nev + nex, rng))
    timers["qr"] += time.perf_counter() - t0

    locked_values = np.zeros(0)
    locked_vectors = np.zeros((n, 0), dtype=np.complex128)
    locked_resid = np.zeros(0)
    degrees = np.full(nev + nex, config.base_degree)
    history = []
    iterations = 0
    converged = False

    for it in range(1, config.max_iters + 1):
        iterations = it
        cur = SpectralBounds(mu1=mu1, alpha=alpha, beta=bounds.beta)
        t0 = time.perf_counter()
        if not cur.degenerate:
            V = chebyshev_filter(H, V, degrees, cur, deflate=locked_vectors)
        timers["filter"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        V, _ = orthogonalize_against(V, locked_vectors, rng)
        norms = np.linalg.norm(V, axis=0)
        norms[norms == 0] = 1.0
        V = qr_orthonormalize(V / norms, strict=False)
        if locked_vectors.shape[1]:
            V, _ = orthogonalize_against(V, locked_vectors, rng)
            V = qr_orthonormalize(V, strict=False)
        timers["qr"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        rr = rayleigh_ritz(H, V)
        timers["rr"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        resid = linalg.residual_norms(H, rr.basis, rr.values, HV=rr.hbasis)
        timers["resid"] += time.perf_counter() - t0

        # alpha tracks the largest Ritz value of the whole search space
        alpha = float(rr.values[-1])
        mu1 = min(mu1, float(rr.values[0]))
        if alpha >= bounds.beta:
            alpha = bounds.beta - 1e-8 * (bounds.beta - mu1)

        wanted = nev - len(locked_values)
        part = lock_converged(rr.values, rr.basis, resid, tol, scale,
                              locked_values, locked_vectors, locked_resid,
                              max_lock=wanted, rng=rng)
        locked_values, locked_vectors = part.locked_values, part.locked_vectors
        locked_resid = part.locked_residuals
        V = part.active_vectors
        history.append({
            "iteration": it, "locked": len(locked_values),
            "locked_values": locked_values.copy(), "alpha": alpha,
            "max_residual": float(resid.max()) if resid.size else 0.0,
            "degrees": degrees.copy(),
        })
        log.debug("iter %d: locked %d/%d, max resid %.3e", it,
                  len(locked_values), nev, history[-1]["max_residual"])
        if len(locked_values) >= nev:
            converged = True
            break

        cur = SpectralBounds(mu1=mu1, alpha=alpha, beta=bounds.beta)
        wanted = nev - len(locked_values)
        degrees, _ = plan_degrees(cur, part.active_values,
                                  part.active_residuals / scale, tol,
                                  config.base_degree, config.degree_cap)
        # extra search directions follow the slowest wanted column
        dmax = int(degrees[:wanted].max()) if wanted else 0
        degrees[wanted:] = dmax
        degrees[:wanted] = np.maximum(degrees[:wanted], 1)

    counts = linalg.matvec_counter.snapshot()
    delta = {k: counts.get(k, 0) - counts0.get(k, 0) for k in counts}
    matvecs = delta.get("lanczos", 0) + delta.get("filter", 0)
    extra = delta.get("rr", 0) + delta.get("resid", 0)
    result = ChaseResult(
        values=locked_values[:nev], vectors=locked_vectors[:, :nev],
        residuals=locked_resid[:nev], iterations=iterations, matvecs=matvecs,
        phase_timers=timers, converged=converged, bounds=bounds, scale=scale,
        extra_matvecs=extra, history=history)
    if not converged:
        raise PartialConvergenceError(
            f"{len(locked_values)} of {nev} eigenpairs converged in "
            f"{config.max_iters} iterations", result)
    return result
