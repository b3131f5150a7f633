"""Spectral core: Green operator, charge density, potential, energy, charge, metric.

Electron fields are stored as series coefficients in ModeSet order.  The
charge density and the potential have a wider band (the square of the
electron field and the ion density band), so they are stored as dense
spectra on the collocation grid returned by :func:`discretization`, on which
every product needed here is alias-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .density import IonDensity
from .errors import DomainError, IncompatibleModeSetError, OutOfBandError
from .lattice import LatticeSpec, ModeSet, torus_delta


@dataclass(frozen=True)
class ModelParams:
    """Physical constants in units hbar = c = m_electron = 1."""

    e: float
    Z: float
    M: float
    N: int

    def __post_init__(self):
        for name in ("e", "Z", "M"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        LatticeSpec(self.N)


@dataclass(frozen=True, eq=False)
class State:
    """Phase-space point X = (psi, q, p).

    ``psi`` holds series coefficients in ModeSet order; ``q`` and ``p`` have
    shape (N^3, 3) with ions in lexicographic order of their site n.  ``q`` is
    the displacement from n and is reduced mod N on construction.
    """

    mode_set: ModeSet
    psi: np.ndarray
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        N = self.mode_set.N
        psi = np.array(self.psi, dtype=complex).reshape(-1)
        if psi.shape[0] != self.mode_set.n_modes:
            raise IncompatibleModeSetError("psi coefficient count does not match the ModeSet")
        q = np.array(self.q, dtype=float).reshape(N**3, 3) % N
        p = np.array(self.p, dtype=float).reshape(N**3, 3)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def N(self) -> int:
        return self.mode_set.N

    def replace(self, psi=None, q=None, p=None) -> "State":
        return State(
            self.mode_set,
            self.psi if psi is None else psi,
            self.q if q is None else q,
            self.p if p is None else p,
        )


@lru_cache(maxsize=16)
def _kgrid(N: int, shape: tuple[int, int, int]):
    axes = [np.rint(np.fft.fftfreq(g) * g).astype(np.int64) for g in shape]
    K = np.stack(np.meshgrid(*axes, indexing="ij"))
    xi2 = (2 * np.pi / N) ** 2 * (K**2).sum(axis=0)
    inv = np.zeros_like(xi2)
    np.divide(1.0, xi2, out=inv, where=xi2 > 0)
    for a in (K, xi2, inv):
        a.setflags(write=False)
    return K, xi2, inv


@dataclass(frozen=True)
class SpectralField:
    """Dense spectrum of a field on T_N, indexed like ``numpy.fft.fftn``."""

    N: int
    spec: np.ndarray
    real: bool = True

    @property
    def shape(self):
        return self.spec.shape

    def coef(self, k) -> complex:
        k = tuple(int(v) for v in k)
        for kv, g in zip(k, self.shape):
            if abs(kv) >= g / 2:
                raise OutOfBandError(f"mode {k} is outside the grid band {self.shape}")
        return complex(self.spec[tuple(kv % g for kv, g in zip(k, self.shape))])

    def values(self) -> np.ndarray:
        v = np.fft.ifftn(self.spec) * self.spec.size
        return v.real if self.real else v

    @classmethod
    def from_modes(cls, mode_set: ModeSet, coeffs, real: bool = True, shape=None) -> "SpectralField":
        shape = tuple(mode_set.grid_dims) if shape is None else tuple(shape)
        spec = np.zeros(shape, dtype=complex)
        spec[_grid_index(mode_set.ks, shape)] = coeffs
        return cls(mode_set.N, spec, real)


def _grid_index(ks: np.ndarray, shape) -> tuple:
    return tuple(ks[:, a] % shape[a] for a in range(3))


@dataclass(frozen=True, eq=False)
class Discretization:
    """Everything needed to evaluate the model for one (ModeSet, density) pair."""

    mode_set: ModeSet
    sigma_modes: ModeSet
    sigma_c: np.ndarray
    shape: tuple[int, int, int]
    psi_idx: tuple
    sig_idx: tuple
    sig_xi: np.ndarray
    sig_nonzero: np.ndarray

    @property
    def N(self) -> int:
        return self.mode_set.N

    def kgrid(self):
        return _kgrid(self.N, self.shape)


@lru_cache(maxsize=32)
def discretization(mode_set: ModeSet, sigma: IonDensity) -> Discretization:
    N = mode_set.N
    sig_ms, sig_c = sigma.spectrum(N)
    ks_min = 2 * sig_ms.kmax + 2
    shape = tuple(max(g, ks_min) for g in mode_set.grid_dims)
    nz = np.abs(sig_c) > 0
    return Discretization(
        mode_set, sig_ms, sig_c, shape,
        _grid_index(mode_set.ks, shape), _grid_index(sig_ms.ks, shape),
        sig_ms.xi, nz,
    )


def psi_to_grid(disc: Discretization, psi: np.ndarray) -> np.ndarray:
    spec = np.zeros(disc.shape, dtype=complex)
    spec[disc.psi_idx] = psi
    return np.fft.ifftn(spec) * spec.size


def grid_to_spec(values: np.ndarray) -> np.ndarray:
    return np.fft.fftn(values) / values.size


def structure_conj(positions: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """conj S(xi) = sum_n exp(-i xi . (n + q(n))) for absolute ion positions."""
    return np.exp(-1j * xi @ positions.T).sum(axis=1)


def ion_positions(X: State) -> np.ndarray:
    return X.mode_set.lattice.ion_sites() + X.q


def _rho_spec(disc: Discretization, psi, positions, e: float) -> np.ndarray:
    dens = np.abs(psi_to_grid(disc, psi)) ** 2
    spec = -e * grid_to_spec(dens)
    xi = disc.sig_xi[disc.sig_nonzero]
    ion = disc.sigma_c[disc.sig_nonzero] * structure_conj(positions, xi)
    idx = tuple(i[disc.sig_nonzero] for i in disc.sig_idx)
    spec[idx] += ion
    return spec


def apply_green(rho: SpectralField) -> SpectralField:
    """(G rho)(xi) = rho(xi) / |xi|^2, zero at xi = 0."""
    _, _, inv = _kgrid(rho.N, rho.shape)
    return SpectralField(rho.N, rho.spec * inv, rho.real)


def apply_sqrt_green(rho: SpectralField) -> SpectralField:
    """(sqrt(G) rho)(xi) = rho(xi) / |xi|, zero at xi = 0."""
    _, _, inv = _kgrid(rho.N, rho.shape)
    return SpectralField(rho.N, rho.spec * np.sqrt(inv), rho.real)


def l2_norm2(f: SpectralField) -> float:
    """\\int |f|^2 over T_N by Parseval."""
    return float(f.N**3 * np.sum(np.abs(f.spec) ** 2))


def l2_inner(f: SpectralField, g: SpectralField) -> float:
    """Real L^2 scalar product Re \\int f conj(g)."""
    return float(f.N**3 * np.real(np.vdot(g.spec, f.spec)))


def assemble_rho(X: State, sigma: IonDensity, params: ModelParams) -> SpectralField:
    """Total charge density rho = sum_n sigma(x - n - q(n)) - e |psi|^2."""
    disc = discretization(X.mode_set, sigma)
    return SpectralField(X.N, _rho_spec(disc, X.psi, ion_positions(X), params.e), True)


def potential(X: State, sigma: IonDensity, params: ModelParams) -> SpectralField:
    return apply_green(assemble_rho(X, sigma, params))


def energy_terms(X: State, sigma: IonDensity, params: ModelParams) -> tuple[float, float, float]:
    """(kinetic, Coulomb, ionic kinetic) parts of the energy; each is >= 0."""
    N3 = X.N**3
    kin = 0.5 * N3 * float(np.sum(X.mode_set.xi2 * np.abs(X.psi) ** 2))
    rho = assemble_rho(X, sigma, params)
    _, _, inv = _kgrid(X.N, rho.shape)
    coul = 0.5 * N3 * float(np.sum(inv * np.abs(rho.spec) ** 2))
    ions = float(np.sum(X.p**2)) / (2 * params.M)
    return kin, coul, ions


def energy(X: State, sigma: IonDensity, params: ModelParams) -> float:
    return sum(energy_terms(X, sigma, params))


def charge(X: State) -> float:
    """Q = \\int |psi|^2 = N^3 sum |c(xi)|^2."""
    return float(X.N**3 * np.sum(np.abs(X.psi) ** 2))


def h1_norm(mode_set: ModeSet, coeffs) -> float:
    c = np.asarray(coeffs)
    return float(np.sqrt(mode_set.N**3 * np.sum((1 + mode_set.xi2) * np.abs(c) ** 2)))


def quasinorm(X: State) -> float:
    """|X| = ||psi||_{H^1} + |p|."""
    return h1_norm(X.mode_set, X.psi) + float(np.linalg.norm(X.p))


def torus_distance(q, q2, N: int) -> float:
    """Euclidean aggregate of per-component circular distances on [0, N)."""
    return float(np.linalg.norm(torus_delta(q, q2, N)))


def metric(X: State, Y: State) -> float:
    """d(X, Y) = ||psi - psi'||_{H^1} + |q - q'|_torus + |p - p'|."""
    if not X.mode_set.same_as(Y.mode_set):
        raise IncompatibleModeSetError("states live on different ModeSets")
    return (
        h1_norm(X.mode_set, X.psi - Y.psi)
        + torus_distance(X.q, Y.q, X.N)
        + float(np.linalg.norm(X.p - Y.p))
    )


def conjugate_field(mode_set: ModeSet, psi: np.ndarray) -> np.ndarray:
    """Coefficients of conj(psi(x)): c'(xi) = conj(c(-xi))."""
    return np.conj(np.asarray(psi)[mode_set.neg])


def translate_field(mode_set: ModeSet, psi: np.ndarray, shift) -> np.ndarray:
    """Coefficients of psi(x - shift)."""
    return np.asarray(psi) * np.exp(-1j * mode_set.xi @ np.asarray(shift, dtype=float))
