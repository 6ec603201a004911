"""Conjugate-gradient baseline eigensolver.

Alternates per-vector nonlinear CG on the Rayleigh quotient with block
Rayleigh-Ritz rotations, in the spirit of Kalkreuter and Simma.  It exists
to cross-check :func:`chasebse.chase.chase_solve` and to compare operation
counts, not to be fast.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .chase import PHASES, lanczos_bounds, lock_converged, rayleigh_ritz
from .errors import DimensionError, PartialConvergenceError
from .linalg import multiply_block, qr_orthonormalize, random_block

log = logging.getLogger(__name__)


@dataclass
class KscgConfig:
    nev: int
    block_extra: int = 30
    tol: float = 1e-10
    max_cg_cycles_per_vector: int = 500
    ritz_every: int = 20
    seed: int = 0
    lanczos_steps: int = 25
    lanczos_starts: int = 4

    def __post_init__(self):
        if self.nev < 1 or self.block_extra < 0:
            raise ValueError("nev must be positive and block_extra nonnegative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class KscgResult:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    total_cg_cycles: int
    matvecs: int
    phase_timers: dict = field(default_factory=dict)
    converged: bool = True
    dense_fallback: bool = False
    scale: float = 0.0
    iterations: int = 0  # outer CG sweep / rotation rounds
    extra_matvecs: int = 0  # rotation and residual products


@dataclass
class CGOutcome:
    value: float
    vector: np.ndarray
    cycles: int
    residual: float
    converged: bool


def _project(Q, x):
    if Q is None or Q.shape[1] == 0:
        return x
    x = x - Q @ (Q.conj().T @ x)
    return x - Q @ (Q.conj().T @ x)


def cg_minimize_rayleigh(H, x0, locked, tol, max_cycles, scale=1.0):
    """Minimize the Rayleigh quotient over the complement of ``locked``.

    Polak-Ribiere directions with exact line search (a 2x2 Rayleigh-Ritz on
    ``span{x, p}``).  The previous direction is transported to the new
    iterate before the update, and the direction restarts to steepest
    descent whenever it stops being a descent direction.  One product with
    ``H`` per cycle.
    """
    x = _project(locked, np.asarray(x0, dtype=np.complex128))
    nx = np.linalg.norm(x)
    if nx == 0:
        raise ValueError("start vector lies in the locked subspace")
    x = x / nx
    Hx = multiply_block(H, x, "cg")
    lam = np.vdot(x, Hx).real
    p = g_old = None
    cycles = 0
    while True:
        r = _project(locked, Hx - lam * x)
        rnorm = np.linalg.norm(r)
        if rnorm <= tol * scale:
            return CGOutcome(lam, x, cycles, rnorm, True)
        if cycles >= max_cycles:
            return CGOutcome(lam, x, cycles, rnorm, False)
        g = r
        if p is None:
            p = -g
        else:
            beta = max(0.0, np.vdot(g, g - g_old).real / np.vdot(g_old, g_old).real)
            p = -g + beta * p
            if np.vdot(g, p).real >= 0:
                p = -g
        g_old = g
        p = _project(locked, p - x * np.vdot(x, p))
        pn = np.linalg.norm(p)
        if pn < 1e-300:
            return CGOutcome(lam, x, cycles, rnorm, False)
        ph = p / pn
        Hp = multiply_block(H, ph, "cg")
        cycles += 1
        a = np.array([[lam, np.vdot(x, Hp)],
                      [np.vdot(ph, Hx), np.vdot(ph, Hp).real]])
        _, S = np.linalg.eigh((a + a.conj().T) / 2)
        c1, c2 = S[0, 0], S[1, 0]
        if abs(c1) > 0:
            phase = np.conj(c1) / abs(c1)
            c1, c2 = c1 * phase, c2 * phase
        # carry the direction along the great circle to stay tangent at x
        p = pn * (-np.conj(c2) * x + np.conj(c1) * ph)
        x = c1 * x + c2 * ph
        Hx = c1 * Hx + c2 * Hp
        nrm = np.linalg.norm(x)
        x, Hx = x / nrm, Hx / nrm
        lam = np.vdot(x, Hx).real


def kscg_subspace_rotate(H, block):
    """Orthonormalize ``block`` and rotate it to ascending Ritz vectors."""
    Q = qr_orthonormalize(block)
    return rayleigh_ritz(H, Q, "rr")


def kscg_solve(H, config):
    """Lowest ``config.nev`` eigenpairs by alternating CG and block rotation.

    The convergence criterion is the same as for ``chase_solve``:
    ``||H x - lambda x|| <= tol * max(|mu1|, |beta|)`` with bounds from the
    same Lanczos estimate.
    """
    H = np.asarray(H)
    n = H.shape[0]
    nev = config.nev
    if nev > n:
        raise DimensionError(f"nev={nev} exceeds N={n}")
    m = min(nev + config.block_extra, n - 1)
    if m <= nev:
        values, vectors = np.linalg.eigh(H)
        values, vectors = values[:nev], vectors[:, :nev]
        return KscgResult(values=values, vectors=vectors,
                          residuals=linalg.residual_norms(H, vectors, values),
                          total_cg_cycles=0, matvecs=0,
                          phase_timers=dict.fromkeys(PHASES, 0.0),
                          dense_fallback=True)

    counts0 = linalg.matvec_counter.snapshot()
    timers = dict.fromkeys(PHASES, 0.0)
    rng = np.random.default_rng(config.seed)
    t0 = time.perf_counter()
    bounds = lanczos_bounds(H, config.lanczos_steps, config.lanczos_starts, m,
                            seed=config.seed)
    timers["lanczos"] += time.perf_counter() - t0
    scale = bounds.scale
    tol = config.tol

    locked_values = np.zeros(0)
    locked_vectors = np.zeros((n, 0), dtype=np.complex128)
    locked_resid = np.zeros(0)
    block = random_block(n, m, rng)
    budget = config.max_cg_cycles_per_vector * m
    total_cycles = 0
    rounds = 0
    converged = False

    while True:
        t0 = time.perf_counter()
        rr = kscg_subspace_rotate(H, block)
        timers["rr"] += time.perf_counter() - t0
        t0 = time.perf_counter()
        resid = linalg.residual_norms(H, rr.basis, rr.values, HV=rr.hbasis)
        timers["resid"] += time.perf_counter() - t0
        wanted = nev - len(locked_values)
        part = lock_converged(rr.values, rr.basis, resid, tol, scale,
                              locked_values, locked_vectors, locked_resid,
                              max_lock=wanted, rng=rng)
        locked_values, locked_vectors = part.locked_values, part.locked_vectors
        locked_resid = part.locked_residuals
        if len(locked_values) >= nev:
            converged = True
            break
        if total_cycles >= budget:
            break
        rounds += 1
        wanted = nev - len(locked_values)

        # per-vector CG sweep, each column deflated against lower ones
        t0 = time.perf_counter()
        active = part.active_vectors
        # CG outputs are unit and orthogonal to their constraints, so the
        # constraint block stays orthonormal without re-factorizing
        cons = locked_vectors
        for j in range(wanted):
            out = cg_minimize_rayleigh(H, active[:, j], cons, tol,
                                       config.ritz_every, scale)
            active[:, j] = out.vector
            cons = np.concatenate([cons, out.vector[:, None]], axis=1)
            total_cycles += out.cycles
        timers["filter"] += time.perf_counter() - t0
        block = _project(locked_vectors, active)

    counts = linalg.matvec_counter.snapshot()
    delta = {k: counts.get(k, 0) - counts0.get(k, 0) for k in counts}
    result = KscgResult(values=locked_values[:nev],
                        vectors=locked_vectors[:, :nev],
                        residuals=locked_resid[:nev],
                        total_cg_cycles=total_cycles,
                        matvecs=delta.get("lanczos", 0) + delta.get("cg", 0),
                        phase_timers=timers, converged=converged, scale=scale,
                        iterations=rounds,
                        extra_matvecs=delta.get("rr", 0) + delta.get("resid", 0))
    if not converged:
        raise PartialConvergenceError(
            f"{len(locked_values)} of {nev} eigenpairs converged within "
            f"{budget} CG cycles", result)
    return result
