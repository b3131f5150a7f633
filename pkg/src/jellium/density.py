"""Ion charge densities and the Jellium / Wiener audits.

Two Fourier conventions are used side by side:

* series coefficients ``c(xi) = N^-3 \\int f(x) exp(-i xi x) dx`` so that
  ``f = sum_xi c(xi) exp(i xi x)``;
* the transform ``sigma_hat(xi) = \\int exp(i xi x) sigma(x) dx``.

For a real density ``sigma_hat(xi) = N^3 conj(c(xi))``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, IncompatibleModeSetError, OutOfBandError
from .lattice import ModeSet, brillouin_points, build_mode_set, canonical_mask

BAND_LIMITED = "band_limited"
CHAR_CUBE_POWER = "char_cube_power"


@dataclass(frozen=True, eq=False)
class IonDensity:
    """Charge density of one ion.

    ``band_limited`` densities carry series coefficients on their own
    ModeSet.  ``char_cube_power`` densities are the analytic family
    sigma_k (k-fold self-convolution of the unit-cube indicator) and are
    projected onto a ModeSet only when a field computation needs them.
    """

    kind: str
    e: float
    Z: float
    mode_set: ModeSet | None = None
    coeffs: np.ndarray | None = None
    power: int | None = None
    beta: float | None = None
    seed: int | None = None
    N: int | None = None

    @property
    def eZ(self) -> float:
        return self.e * self.Z

    @property
    def is_band_limited(self) -> bool:
        return self.kind == BAND_LIMITED

    def spectrum(self, N: int) -> tuple[ModeSet, np.ndarray]:
        """ModeSet and series coefficients used by field computations on T_N."""
        return _spectrum(self, N)


def default_density_cutoff(N: int) -> int:
    """Smallest ball radius^2 guaranteeing every Brillouin class has three
    independent dual vectors in the band (centered representative plus one
    shift by N along each axis)."""
    return N**2 + 2 * (N // 2) ** 2


@lru_cache(maxsize=32)
def _spectrum(sigma: IonDensity, N: int) -> tuple[ModeSet, np.ndarray]:
    if sigma.is_band_limited:
        if sigma.mode_set.N != N:
            raise IncompatibleModeSetError(
                f"density lives on N={sigma.mode_set.N}, requested N={N}"
            )
        return sigma.mode_set, sigma.coeffs
    ms = build_mode_set(N, default_density_cutoff(N))
    hat = _char_cube_hat(ms.xi, sigma.power, sigma.eZ)
    return ms, np.conj(hat) / N**3


def _chi_hat(s: np.ndarray, power: int) -> np.ndarray:
    """[2 sin(s/2)/s]^power, exactly zero at nonzero multiples of 2 pi."""
    s = np.asarray(s, dtype=float)
    t = s / (2 * np.pi)
    base = np.sinc(t)
    near = np.abs(t - np.round(t)) <= 1e-12 * np.maximum(1.0, np.abs(t))
    base = np.where(near & (np.round(t) != 0), 0.0, base)
    return base**power


def _char_cube_hat(xi: np.ndarray, power: int, eZ: float) -> np.ndarray:
    xi = np.atleast_2d(xi)
    return eZ * _chi_hat(xi[:, 0], power) * _chi_hat(xi[:, 1], power) * _chi_hat(xi[:, 2], power)


def make_band_limited_jellium(
    mode_set: ModeSet,
    e: float,
    Z: float,
    beta: float = 0.01,
    seed: int = 0,
    amplitude: float | None = None,
) -> IonDensity:
    """Trigonometric-polynomial density satisfying Jellium with no other zeros.

    ``c(0) = eZ/N^3``; ``c(xi) = 0`` on Gamma*_1 \\ 0; elsewhere
    ``c(xi) = A exp(-beta |xi|^2) exp(i phi)`` with phases drawn from
    ``seed`` on one member of each +-xi pair and mirrored by conjugation.
    """
    if e <= 0 or Z <= 0 or beta <= 0:
        raise DomainError("e, Z and beta must be positive")
    N = mode_set.N
    A = e * Z / N**3 if amplitude is None else amplitude
    ks = mode_set.ks
    rng = np.random.default_rng(seed)
    canon = canonical_mask(ks)
    phases = np.zeros(len(ks))
    phases[canon] = rng.uniform(0.0, 2 * np.pi, size=int(canon.sum()))
    phases[mode_set.neg[canon]] = -phases[canon]
    c = A * np.exp(-beta * mode_set.xi2) * np.exp(1j * phases)
    jell = np.all(ks % N == 0, axis=1)
    c[jell] = 0.0
    c[mode_set.zero] = e * Z / N**3
    c.setflags(write=False)
    return IonDensity(
        BAND_LIMITED, float(e), float(Z), mode_set=mode_set, coeffs=c,
        beta=float(beta), seed=int(seed), N=N,
    )


def make_char_cube_power(k: int, e: float, Z: float, N: int | None = None) -> IonDensity:
    """The analytic family sigma_k with sigma_hat_k(xi) = eZ prod_j [2 sin(xi_j/2)/xi_j]^k."""
    if int(k) != k or k < 1:
        raise DomainError(f"power k must be a positive integer, got {k!r}")
    if e <= 0 or Z <= 0:
        raise DomainError("e and Z must be positive")
    return IonDensity(CHAR_CUBE_POWER, float(e), float(Z), power=int(k), N=N)


def band_limited_from_coefficients(mode_set: ModeSet, coeffs, e: float, Z: float, **meta) -> IonDensity:
    """Wrap explicit series coefficients; Hermitian symmetry is checked, not imposed."""
    c = np.asarray(coeffs, dtype=complex).copy()
    if c.shape != (mode_set.n_modes,):
        raise IncompatibleModeSetError("coefficient count does not match the ModeSet")
    if not np.allclose(c[mode_set.neg], np.conj(c), rtol=0, atol=1e-14 * max(1.0, np.abs(c).max())):
        raise DomainError("coefficients are not Hermitian symmetric (density would be complex)")
    c.setflags(write=False)
    return IonDensity(BAND_LIMITED, float(e), float(Z), mode_set=mode_set, coeffs=c, N=mode_set.N, **meta)


def sigma_hat_k(sigma: IonDensity, ks, N: int) -> np.ndarray:
    """Transform values at integer dual indices ``ks`` (xi = 2 pi k / N)."""
    ks = np.atleast_2d(np.asarray(ks, dtype=np.int64))
    if sigma.is_band_limited:
        ms, c = sigma.spectrum(N)
        try:
            idx = np.array([ms.position(k) for k in ks])
        except KeyError as exc:
            raise OutOfBandError(f"mode {exc.args[0]} is outside the density band") from None
        return N**3 * np.conj(c[idx])
    return _char_cube_hat((2 * np.pi / N) * ks, sigma.power, sigma.eZ).astype(complex)


def eval_sigma_hat(sigma: IonDensity, xi) -> complex:
    """sigma_hat at one dual vector.  Band-limited densities accept only
    points of their own band; the analytic family accepts any xi in R^3."""
    xi = np.asarray(xi, dtype=float)
    if sigma.is_band_limited:
        N = sigma.mode_set.N
        kf = xi * N / (2 * np.pi)
        k = np.round(kf)
        if np.any(np.abs(kf - k) > 1e-9):
            raise OutOfBandError(f"xi={xi.tolist()} is not a point of Gamma*_{N}")
        return complex(sigma_hat_k(sigma, k.astype(np.int64), N)[0])
    return complex(_char_cube_hat(xi, sigma.power, sigma.eZ)[0])


@dataclass(frozen=True)
class JelliumReport:
    passed: bool
    worst_violation: float
    worst_k: tuple | None
    periodization_error: float


def check_jellium(sigma: IonDensity, tol: float = 1e-10, bound: int = 4, grid: int = 8) -> JelliumReport:
    """Audit sigma_hat = 0 on 2 pi Z^3 \\ 0 and the flatness of sum_n sigma(x - n).

    ``worst_violation`` is max |sigma_hat| / eZ over the tested points of
    Gamma*_1 \\ 0 (the band for band-limited densities, |m_j| <= bound for
    the analytic family).  ``periodization_error`` is the relative sup
    deviation of the periodized density from eZ on a ``grid``^3 sampling
    of the unit cell, summed spectrally over the same points.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    if sigma.is_band_limited:
        ms = sigma.mode_set
        N = ms.N
        mask = np.all(ms.ks % N == 0, axis=1)
        ms_k = ms.ks[mask]
        m_vec = ms_k // N
    else:
        N = 1
        r = np.arange(-bound, bound + 1)
        m_vec = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3)
        ms_k = m_vec
    hats = sigma_hat_k(sigma, ms_k, N)
    nonzero = np.any(m_vec != 0, axis=1)
    eZ = sigma.eZ
    if nonzero.any():
        viol = np.abs(hats[nonzero]) / eZ
        i = int(np.argmax(viol))
        worst = float(viol[i])
        worst_k = tuple(int(v) for v in ms_k[nonzero][i]) if worst > 0 else None
    else:
        worst, worst_k = 0.0, None
    # sum_n sigma(x - n) = sum_{m} sigma_hat(-2 pi m) exp(2 pi i m x)
    x = np.arange(grid) / grid
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1).reshape(-1, 3)
    hat_neg = sigma_hat_k(sigma, -ms_k, N)
    values = np.exp(2j * np.pi * X @ m_vec.T.astype(float)) @ hat_neg
    per_err = float(np.max(np.abs(values - eZ)) / eZ)
    return JelliumReport(worst <= tol, worst, worst_k, per_err)


@dataclass(frozen=True)
class SigmaMatrix:
    theta: np.ndarray
    matrix: np.ndarray
    m_cut: int | None
    exact: bool


def _theta_class(theta, N: int) -> np.ndarray:
    kf = np.asarray(theta, dtype=float) * N / (2 * np.pi)
    k = np.round(kf)
    if np.any(np.abs(kf - k) > 1e-9):
        raise DomainError(f"theta={np.asarray(theta).tolist()} is not a point of Gamma*_{N}")
    return k.astype(np.int64)


def _in_unit_dual(theta) -> bool:
    t = np.asarray(theta, dtype=float) / (2 * np.pi)
    return bool(np.all(np.abs(t - np.round(t)) <= 1e-12 * np.maximum(1.0, np.abs(t))))


def sigma_matrix(sigma: IonDensity, theta, m_cut: int = 16) -> SigmaMatrix:
    """Sigma(theta) = sum_m [xi xi^T / |xi|^2 |sigma_hat(xi)|^2] at xi = theta + 2 pi m.

    Exact (a finite sum over the band) for band-limited densities; the
    analytic family is truncated to |m_j| <= m_cut.
    """
    theta = np.asarray(theta, dtype=float)
    if _in_unit_dual(theta):
        raise DomainError("Sigma(theta) is defined only for theta outside 2 pi Z^3")
    if sigma.is_band_limited:
        ms = sigma.mode_set
        N = ms.N
        kt = _theta_class(theta, N)
        sel = np.all((ms.ks - kt) % N == 0, axis=1)
        xi = ms.xi[sel]
        w = np.abs(N**3 * sigma.coeffs[sel]) ** 2
        exact, cut = True, None
    else:
        if m_cut < 1:
            raise DomainError("m_cut must be >= 1 for analytic densities")
        r = np.arange(-m_cut, m_cut + 1)
        m = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3)
        xi = theta + 2 * np.pi * m
        w = _char_cube_hat(xi, sigma.power, sigma.eZ) ** 2
        exact, cut = False, int(m_cut)
    xi2 = (xi**2).sum(axis=1)
    mat = np.einsum("i,ia,ib->ab", w / xi2, xi, xi)
    return SigmaMatrix(theta, 0.5 * (mat + mat.T), cut, exact)


@dataclass(frozen=True)
class WienerReport:
    passed: bool
    thetas: np.ndarray
    min_eigenvalues: np.ndarray
    global_min: float
    kernel_dims: np.ndarray
    kernel_dim: int
    threshold: float


def check_wiener(
    sigma: IonDensity, N: int, m_cut: int = 16, tol: float = 1e-10, threads: int = 1
) -> WienerReport:
    """Scan Sigma(theta) over the Brillouin representatives outside Gamma*_1.

    An eigenvalue counts as zero when it is below ``tol * (eZ)^2``.  The
    reported ``kernel_dim`` is the sum of the kernel dimensions over the
    scanned representatives, i.e. the real dimension of the space of ion
    displacement patterns invisible to the Coulomb energy.
    """
    ks = brillouin_points(N).outside()
    thetas = (2 * np.pi / N) * ks

    def eig(theta):
        return np.linalg.eigvalsh(sigma_matrix(sigma, theta, m_cut).matrix)

    if threads > 1 and len(thetas) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            spectra = list(pool.map(eig, thetas))
    else:
        spectra = [eig(t) for t in thetas]
    threshold = tol * sigma.eZ**2
    if spectra:
        mins = np.array([s[0] for s in spectra])
        kdims = np.array([int(np.sum(s <= threshold)) for s in spectra])
        gmin = float(mins.min())
    else:
        mins = np.zeros(0)
        kdims = np.zeros(0, dtype=int)
        gmin = math.inf
    return WienerReport(
        bool(gmin > threshold), thetas, mins, gmin, kdims, int(kdims.sum()), threshold
    )


def check_spectral_condition(sigma: IonDensity, bound: int = 4, N: int | None = None, tol: float = 1e-12) -> bool:
    """Zeros needed for staircase (non-periodic) ground states.

    sigma_hat must vanish for xi_3 in 2 pi Z \\ 0 and for xi_3 = 0 with
    (xi_1, xi_2) in 2 pi Z^2 \\ 0.  Band-limited densities are tested on their
    band; the analytic family on xi = 2 pi k / N with |k_j| <= bound * N.
    """
    if sigma.is_band_limited:
        N = sigma.mode_set.N
        ks = sigma.mode_set.ks
    else:
        N = 2 if N is None else N
        r = np.arange(-bound * N, bound * N + 1)
        ks = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3)
    k3_unit = (ks[:, 2] % N == 0) & (ks[:, 2] != 0)
    plane = (ks[:, 2] == 0) & (ks[:, 0] % N == 0) & (ks[:, 1] % N == 0) & np.any(ks[:, :2] != 0, axis=1)
    sel = ks[k3_unit | plane]
    if len(sel) == 0:
        return True
    return bool(np.all(np.abs(sigma_hat_k(sigma, sel, N)) <= tol * sigma.eZ))
