"""Synthetic Bethe-Salpeter exciton Hamiltonians.

A tight-binding-like band model on a periodic k-grid supplies the
electron-hole transition energies ``E_ck - E_vk``.  Pairs below an energy
cutoff form the basis, and the exciton Hamiltonian is

    H_ij = t_i delta_ij + 2 vbar_ij - W_ij

with an exchange term ``vbar`` and a screened attraction ``W``.  Both
kernels are Gaussian in k-space distance times a Gram matrix of seeded
per-pair vectors, so each is positive semidefinite.  All couplings depend
only on the pair labels ``(v, c, k)``, which makes ``H`` for a smaller
cutoff an exact leading principal submatrix of ``H`` for a larger one.

Energies are in eV throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyBasisError, FitError

__all__ = [
    "BandModel", "PairBasis", "CouplingModel", "BindingSeries", "LinearFit",
    "build_band_model", "enumerate_pairs", "assemble_hamiltonian",
    "binding_energy", "extrapolate_binding", "load_model_config",
    "write_model_config", "model_from_config",
]


@dataclass
class BandModel:
    nk: tuple
    nv: int
    nc: int
    gap: float
    valence_width: float = 0.0
    conduction_width: float = 0.0
    band_offsets: tuple = None  # (valence offsets, conduction offsets)
    seed: int = 0
    kgrid: np.ndarray = field(init=False, repr=False)
    ev: np.ndarray = field(init=False, repr=False)  # (nv, Nk)
    ec: np.ndarray = field(init=False, repr=False)  # (nc, Nk)

    def __post_init__(self):
        self.nk = tuple(int(n) for n in self.nk)
        if len(self.nk) != 3 or min(self.nk) < 1:
            raise ValueError(f"nk must be three positive integers, got {self.nk}")
        if self.nv < 1 or self.nc < 1:
            raise ValueError("nv and nc must be positive")
        if not self.gap > 0:
            raise ValueError(f"gap must be positive, got {self.gap}")
        if self.valence_width < 0 or self.conduction_width < 0:
            raise ValueError("band widths must be nonnegative")
        if self.band_offsets is None:
            self.band_offsets = _default_offsets(self.nv, self.nc, self.seed)
        off_v, off_c = (np.asarray(o, dtype=float) for o in self.band_offsets)
        if off_v.shape != (self.nv,) or off_c.shape != (self.nc,):
            raise ValueError("band_offsets must have lengths nv and nc")
        self.band_offsets = (off_v, off_c)

        n1, n2, n3 = self.nk
        self.kgrid = np.array([(i, j, l) for i in range(n1)
                               for j in range(n2) for l in range(n3)])
        d = dispersion(self.kgrid / np.array(self.nk))
        self.ev = off_v[:, None] - self.valence_width * d[None, :]
        self.ec = self.gap + off_c[:, None] + self.conduction_width * d[None, :]
        if not (np.all(np.isfinite(self.ev)) and np.all(np.isfinite(self.ec))):
            raise ValueError("band energies are not finite")

    @property
    def nkpts(self):
        return len(self.kgrid)

    def transitions(self):
        """Array ``t[v, c, k] = E_ck - E_vk``."""
        return self.ec[None, :, :] - self.ev[:, None, :]


def _default_offsets(nv, nc, seed):
    rng = np.random.default_rng(seed)
    off_v = np.concatenate([[0.0], -np.sort(rng.uniform(0.2, 1.5, nv - 1))])
    off_c = np.concatenate([[0.0], np.sort(rng.uniform(0.2, 1.5, nc - 1))])
    return off_v, off_c


def dispersion(k):
    """``(3 - sum_a cos 2 pi k_a) / 2``; 0 at Gamma, 3 at the zone corner."""
    k = np.atleast_2d(k)
    return (3.0 - np.cos(2 * np.pi * k).sum(axis=1)) / 2.0


def build_band_model(params):
    """Build a :class:`BandModel` from a mapping of its field values."""
    if isinstance(params, BandModel):
        return params
    keys = ("nk", "nv", "nc", "gap", "valence_width", "conduction_width",
            "band_offsets", "seed")
    return BandModel(**{k: params[k] for k in keys if k in params})


@dataclass
class PairBasis:
    v: np.ndarray
    c: np.ndarray
    k: np.ndarray
    t: np.ndarray
    ecut: float
    nk: tuple
    nv: int
    nc: int
    kgrid: np.ndarray = field(repr=False)

    @property
    def size(self):
        return len(self.t)

    @property
    def pairs(self):
        return list(zip(self.v.tolist(), self.c.tolist(), self.k.tolist()))

    def labels(self):
        """Global label index of every pair, independent of the cutoff."""
        return (self.v * self.nc + self.c) * (self.nk[0] * self.nk[1] * self.nk[2]) + self.k


def enumerate_pairs(model, ecut):
    """All pairs with transition energy below ``ecut``.

    Sorted ascending by energy, ties broken by ``(k, v, c)``.
    """
    if not ecut > 0:
        raise ValueError("ecut must be positive")
    t = model.transitions()
    v, c, k = np.meshgrid(np.arange(model.nv), np.arange(model.nc),
                          np.arange(model.nkpts), indexing="ij")
    v, c, k, t = v.ravel(), c.ravel(), k.ravel(), t.ravel()
    keep = t < ecut
    if not keep.any():
        raise EmptyBasisError(
            f"no electron-hole pairs below ecut={ecut} eV "
            f"(lowest transition {t.min():.6g} eV)")
    v, c, k, t = v[keep], c[keep], k[keep], t[keep]
    order = np.lexsort((c, v, k, t))
    return PairBasis(v=v[order], c=c[order], k=k[order], t=t[order],
                     ecut=float(ecut), nk=model.nk, nv=model.nv, nc=model.nc,
                     kgrid=model.kgrid)


@dataclass
class CouplingModel:
    exchange_strength: float = 0.0
    screened_strength: float = 0.0
    decay_length: float = 0.2
    seed: int = 0
    rank: int = 4  # width of the per-pair feature vectors

    def __post_init__(self):
        if self.exchange_strength < 0 or self.screened_strength < 0:
            raise ValueError("coupling strengths must be nonnegative")
        if not (math.isfinite(self.exchange_strength)
                and math.isfinite(self.screened_strength)):
            raise ValueError("coupling strengths must be finite")
        if not self.decay_length > 0:
            raise ValueError("decay_length must be positive")


def _pair_features(n_labels, rank, rng):
    g = rng.standard_normal((n_labels, rank)) + 1j * rng.standard_normal((n_labels, rank))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def k_kernel(kgrid, nk, ki, kj, decay_length):
    """Periodic Gaussian in k-distance between grid points ``ki`` and ``kj``.

    Uses the chordal form ``(1 - cos 2 pi dk) / (2 pi^2)`` of the squared
    minimum-image distance, which agrees with it to leading order and keeps
    the kernel positive semidefinite on the torus.
    """
    dk = (kgrid[ki][:, None, :] - kgrid[kj][None, :, :]) / np.asarray(nk)
    d2 = ((1.0 - np.cos(2 * np.pi * dk)) / (2 * np.pi ** 2)).sum(axis=2)
    return np.exp(-d2 / (2 * decay_length ** 2))


def _gram(a, b):
    """``a @ b^H`` accumulated feature by feature.

    Elementwise accumulation makes each entry independent of the matrix size.
    """
    out = np.zeros((a.shape[0], b.shape[0]), dtype=np.complex128)
    for r in range(a.shape[1]):
        out += a[:, r][:, None] * b[:, r].conj()[None, :]
    return out


def assemble_hamiltonian(basis, coupling):
    """Dense exciton Hamiltonian for ``basis``; exactly Hermitian."""
    n = basis.size
    if n == 0:
        raise EmptyBasisError("cannot assemble a Hamiltonian on an empty basis")
    H = np.zeros((n, n), dtype=np.complex128)
    x, s = coupling.exchange_strength, coupling.screened_strength
    if x > 0 or s > 0:
        n_labels = basis.nv * basis.nc * int(np.prod(basis.nk))
        rng = np.random.default_rng(coupling.seed)
        u = _pair_features(n_labels, coupling.rank, rng)
        w = _pair_features(n_labels, coupling.rank, rng)
        lab = basis.labels()
        phi = k_kernel(basis.kgrid, basis.nk, basis.k, basis.k,
                       coupling.decay_length)
        if x > 0:
            H += (2.0 * x) * phi * _gram(u[lab], u[lab])
        if s > 0:
            H -= s * phi * _gram(w[lab], w[lab])
    upper = np.triu(H, 1)
    H = upper + upper.conj().T
    diag = np.arange(n)
    H[diag, diag] = basis.t + _diag_coupling(basis, coupling)
    return H


def _diag_coupling(basis, coupling):
    # feature vectors are unit and the kernel is 1 at zero distance
    return np.full(basis.size, 2.0 * coupling.exchange_strength
                   - coupling.screened_strength)


def binding_energy(basis, eigenvalues, state_index=1):
    """Lowest transition energy minus the ``state_index``-th eigenvalue (1-based)."""
    if state_index < 1:
        raise ValueError("state_index is 1-based")
    eigenvalues = np.sort(np.asarray(eigenvalues, dtype=float))
    if len(eigenvalues) < state_index:
        raise ValueError(f"need at least {state_index} eigenvalues")
    return float(basis.t.min() - eigenvalues[state_index - 1])


@dataclass
class LinearFit:
    slope: float
    intercept: float
    r_squared: float


@dataclass
class BindingSeries:
    """Binding energies against inverse cutoff for one excitonic state."""
    points: list = field(default_factory=list)  # (inverse_ecut, e_b, state_index)
    fit: LinearFit | None = None

    def add(self, inverse_ecut, e_b, state_index):
        if self.points and not inverse_ecut < self.points[-1][0]:
            raise ValueError("inverse_ecut must decrease along the series")
        self.points.append((float(inverse_ecut), float(e_b), int(state_index)))


def extrapolate_binding(series, window=None):
    """Least-squares line of E_b against 1/ecut.

    The intercept is the binding energy extrapolated to infinite cutoff.
    ``series`` is a :class:`BindingSeries` or a sequence of ``(x, y)`` or
    ``(x, y, state)`` tuples; ``window`` restricts the abscissae to a closed
    interval ``(lo, hi)``.
    """
    points = series.points if isinstance(series, BindingSeries) else series
    xy = [(float(p[0]), float(p[1])) for p in points]
    if window is not None:
        lo, hi = min(window), max(window)
        xy = [(x, y) for x, y in xy if lo <= x <= hi]
    if len(xy) < 2:
        raise FitError("at least two points are required for a linear fit")
    x = np.array([p[0] for p in xy])
    y = np.array([p[1] for p in xy])
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise FitError("all abscissae are identical")
    slope = float(np.sum((x - xm) * (y - ym))) / sxx
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((y - (intercept + slope * x)) ** 2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    fit = LinearFit(slope=slope, intercept=intercept, r_squared=r2)
    if isinstance(series, BindingSeries):
        series.fit = fit
    return fit


# -- config files ------------------------------------------------------------

_INT_KEYS = {"nv", "nc", "seed", "rank", "coupling_seed"}
_FLOAT_KEYS = {"gap", "valence_width", "conduction_width", "exchange_strength",
               "screened_strength", "decay_length"}
_KEYS = _INT_KEYS | _FLOAT_KEYS | {"nk", "band_offsets"}


def _parse_floats(text):
    return [float(x) for x in text.replace(",", " ").split()]


def load_model_config(path):
    """Read a ``key = value`` model file into a dict of typed values.

    ``nk`` is three integers, ``band_offsets`` the valence offsets and the
    conduction offsets separated by ``;``.  ``#`` starts a comment.
    """
    cfg = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        if key in _INT_KEYS:
            cfg[key] = int(value)
        elif key in _FLOAT_KEYS:
            cfg[key] = float(value)
        elif key == "nk":
            cfg[key] = tuple(int(x) for x in _parse_floats(value))
        else:
            parts = value.split(";")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: band_offsets needs "
                                 "'valence ; conduction'")
            cfg[key] = tuple(_parse_floats(p) for p in parts)
    return cfg


def write_model_config(path, model, coupling):
    off_v, off_c = model.band_offsets
    lines = [
        f"nk = {', '.join(str(n) for n in model.nk)}",
        f"nv = {model.nv}",
        f"nc = {model.nc}",
        f"gap = {model.gap!r}",
        f"valence_width = {model.valence_width!r}",
        f"conduction_width = {model.conduction_width!r}",
        "band_offsets = " + ", ".join(repr(float(x)) for x in off_v)
        + " ; " + ", ".join(repr(float(x)) for x in off_c),
        f"seed = {model.seed}",
        f"exchange_strength = {coupling.exchange_strength!r}",
        f"screened_strength = {coupling.screened_strength!r}",
        f"decay_length = {coupling.decay_length!r}",
        f"coupling_seed = {coupling.seed}",
        f"rank = {coupling.rank}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def model_from_config(cfg):
    """Split a config dict into ``(BandModel, CouplingModel)``."""
    model = build_band_model(cfg)
    coupling = CouplingModel(
        exchange_strength=cfg.get("exchange_strength", 0.0),
        screened_strength=cfg.get("screened_strength", 0.0),
        decay_length=cfg.get("decay_length", 0.2),
        seed=cfg.get("coupling_seed", cfg.get("seed", 0)),
        rank=cfg.get("rank", 4),
    )
    return model, coupling
