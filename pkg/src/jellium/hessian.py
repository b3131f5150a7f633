"""Second variation of the energy at a periodic ground state.

Tangent vectors Y = (phi, kappa, pi) are written in real coordinates

    [ y1 (n_modes) | y2 (n_modes) | kappa (3 N^3) | pi (3 N^3) ]

where phi = phi_1 + i phi_2 and phi_1, phi_2 are real fields expanded in
the L^2-orthonormal basis  N^{-3/2},  sqrt(2/N^3) cos(xi x),
sqrt(2/N^3) sin(xi x)  (one cos/sin pair per +-xi).  In these coordinates
E(S + Y) = 1/2 Y^T H Y + O(|Y|^3) and H is a real symmetric matrix.

The expansion is carried out at S_0 = (sqrt(Z), 0, 0); a general ground
state S_{alpha,r} is reduced to S_0 by the symmetry map
phi -> e^{-i alpha} phi(. + r), which is orthogonal in these coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .density import IonDensity, sigma_matrix
from .errors import DomainError, EigenSolverError, InvalidExpansionPointError
from .field import ModelParams, State, discretization, energy
from .lattice import LatticeSpec, ModeSet, brillouin_points, canonical_mask, torus_delta


@lru_cache(maxsize=16)
def real_basis(mode_set: ModeSet) -> np.ndarray:
    """Complex matrix W with  coefficients(phi_1) = W @ y1.

    The columns are the coefficient vectors of the orthonormal real basis;
    W^{-1} = N^3 W^H.
    """
    n = mode_set.n_modes
    N3 = mode_set.N**3
    W = np.zeros((n, n), dtype=complex)
    W[mode_set.zero, mode_set.zero] = N3**-0.5
    a = math.sqrt(2 / N3) / 2
    for i in np.flatnonzero(canonical_mask(mode_set.ks)):
        j = mode_set.neg[i]
        W[i, i] = W[j, i] = a
        W[i, j] = -1j * a
        W[j, j] = 1j * a
    W.setflags(write=False)
    return W


@dataclass(frozen=True)
class Tangent:
    """Tangent vector: field coefficients phi, ion displacements kappa, momenta pi."""

    phi: np.ndarray
    kappa: np.ndarray
    pi: np.ndarray


def _layout(mode_set: ModeSet) -> tuple[int, int]:
    return mode_set.n_modes, 3 * mode_set.N**3


def coords_to_tangent(mode_set: ModeSet, y) -> Tangent:
    n, n_ion = _layout(mode_set)
    y = np.asarray(y, dtype=float)
    if y.shape != (2 * n + 2 * n_ion,):
        raise DomainError(f"coordinate vector has length {y.shape}, expected {2 * n + 2 * n_ion}")
    W = real_basis(mode_set)
    phi = W @ y[:n] + 1j * (W @ y[n : 2 * n])
    kappa = y[2 * n : 2 * n + n_ion].reshape(-1, 3)
    pi = y[2 * n + n_ion :].reshape(-1, 3)
    return Tangent(phi, kappa.copy(), pi.copy())


def tangent_to_coords(mode_set: ModeSet, Y: Tangent) -> np.ndarray:
    W = real_basis(mode_set)
    N3 = mode_set.N**3
    phi = np.asarray(Y.phi, dtype=complex)
    # real and imaginary parts of phi(x) as fields
    re = 0.5 * (phi + np.conj(phi[mode_set.neg]))
    im = -0.5j * (phi - np.conj(phi[mode_set.neg]))
    y1 = np.real(N3 * (W.conj().T @ re))
    y2 = np.real(N3 * (W.conj().T @ im))
    return np.concatenate([y1, y2, np.ravel(Y.kappa), np.ravel(Y.pi)])


def displaced_state(S: State, Y, t: float = 1.0) -> State:
    """S + t Y for a Tangent or a coordinate vector Y."""
    if not isinstance(Y, Tangent):
        Y = coords_to_tangent(S.mode_set, Y)
    return State(S.mode_set, S.psi + t * Y.phi, S.q + t * Y.kappa, S.p + t * Y.pi)


@dataclass(frozen=True)
class ExpansionPoint:
    alpha: float
    r: np.ndarray


def ground_state_parameters(S: State, sigma: IonDensity, params: ModelParams, tol: float = 1e-10) -> ExpansionPoint:
    """(alpha, r) of a periodic ground state; raises InvalidExpansionPointError otherwise."""
    ms = S.mode_set
    c0 = S.psi[ms.zero]
    others = np.delete(S.psi, ms.zero)
    scale = math.sqrt(params.Z)
    if abs(abs(c0) - scale) > tol * scale or (others.size and np.abs(others).max() > tol * scale):
        raise InvalidExpansionPointError("electron field is not a constant of modulus sqrt(Z)")
    if np.abs(S.p).max() > tol:
        raise InvalidExpansionPointError("ion momenta are not zero")
    r = S.q[0]
    if np.abs(torus_delta(S.q, r, S.N)).max() > tol:
        raise InvalidExpansionPointError("ion arrangement is not periodic")
    E = energy(S, sigma, params)
    if E > tol * max(1.0, params.Z * S.N**3):
        raise InvalidExpansionPointError(f"energy {E:.3e} is not zero (sigma fails the Jellium condition?)")
    alpha = math.atan2(c0.imag, c0.real) % (2 * math.pi)
    return ExpansionPoint(alpha, r.copy())


def _sigma_on(mode_set: ModeSet, sigma: IonDensity) -> np.ndarray:
    """Density coefficients at the modes of ``mode_set`` (zero outside sigma's band)."""
    sig_ms, c = sigma.spectrum(mode_set.N)
    out = np.zeros(mode_set.n_modes, dtype=complex)
    for i, k in enumerate(map(tuple, mode_set.ks)):
        j = sig_ms.index.get(k)
        if j is not None:
            out[i] = c[j]
    return out


@dataclass(frozen=True, eq=False)
class HessianOperator:
    """E''(S) in the real coordinates described in the module docstring."""

    matrix: np.ndarray
    mode_set: ModeSet
    alpha: float
    r: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def slices(self) -> dict:
        n, n_ion = _layout(self.mode_set)
        return {
            "psi1": slice(0, n),
            "psi2": slice(n, 2 * n),
            "q": slice(2 * n, 2 * n + n_ion),
            "p": slice(2 * n + n_ion, 2 * n + 2 * n_ion),
        }

    def block(self, row: str, col: str) -> np.ndarray:
        s = self.slices
        return self.matrix[s[row], s[col]]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


def _hessian_at_origin(mode_set: ModeSet, sigma: IonDensity, params: ModelParams) -> np.ndarray:
    N = mode_set.N
    N3 = N**3
    n, n_ion = _layout(mode_set)
    e, Z, M = params.e, params.Z, params.M
    W = real_basis(mode_set)
    xi2 = mode_set.xi2
    inv = np.zeros_like(xi2)
    np.divide(1.0, xi2, out=inv, where=xi2 > 0)

    def diag_block(symbol):
        return N3 * np.real(W.conj().T @ (symbol[:, None] * W))

    H = np.zeros((2 * n + 2 * n_ion,) * 2)
    H[:n, :n] = diag_block(xi2 + 4 * e**2 * Z * inv)
    H[n : 2 * n, n : 2 * n] = diag_block(xi2)

    # psi_1 / q coupling: 2 L with L(x, n) = e sqrt(Z) (G grad sigma)(x - n)
    sites = LatticeSpec(N).ion_sites()
    c_sig = _sigma_on(mode_set, sigma)
    g = (1j * c_sig * inv)[:, None, None] * mode_set.xi[:, None, :]  # (mode, 1, a)
    g = g * np.exp(-1j * mode_set.xi @ sites.T)[:, :, None]  # (mode, n, a)
    L = N3 * np.real(W.T @ np.conj(g).reshape(n, n_ion))
    H[:n, 2 * n : 2 * n + n_ion] = 2 * e * math.sqrt(Z) * L
    H[2 * n : 2 * n + n_ion, :n] = H[:n, 2 * n : 2 * n + n_ion].T

    # q / q block: T(n, n')_ab = N^3 sum xi_a xi_b |c_sigma|^2 / |xi|^2 e^{i xi (n - n')}
    sig_ms, cs = sigma.spectrum(N)
    s_inv = np.zeros(sig_ms.n_modes)
    np.divide(1.0, sig_ms.xi2, out=s_inv, where=sig_ms.xi2 > 0)
    w = N3 * np.abs(cs) ** 2 * s_inv
    A = np.exp(1j * sig_ms.xi @ sites.T)[:, :, None] * sig_ms.xi[:, None, :]  # (mode, n, a)
    A = A.reshape(sig_ms.n_modes, n_ion)
    T = np.real(A.conj().T @ (w[:, None] * A))
    H[2 * n : 2 * n + n_ion, 2 * n : 2 * n + n_ion] = T

    H[2 * n + n_ion :, 2 * n + n_ion :] = np.eye(n_ion) / M
    return 0.5 * (H + H.T)


def symmetry_matrix(mode_set: ModeSet, alpha: float, r) -> np.ndarray:
    """Real matrix U of the map Y at S_{alpha,r} -> Y at S_{0,0}."""
    n, n_ion = _layout(mode_set)
    phase = np.exp(1j * (mode_set.xi @ np.asarray(r, dtype=float)) - 1j * alpha)
    U = np.eye(2 * n + 2 * n_ion)
    for j in range(2 * n):
        col = np.zeros(2 * n + 2 * n_ion)
        col[j] = 1.0
        Y = coords_to_tangent(mode_set, col)
        U[:, j] = tangent_to_coords(mode_set, Tangent(phase * Y.phi, Y.kappa, Y.pi))
    return U


def assemble_hessian(S: State, sigma: IonDensity, params: ModelParams, tol: float = 1e-10) -> HessianOperator:
    """Blockwise E''(S) at a periodic ground state, evaluated exactly in Fourier."""
    point = ground_state_parameters(S, sigma, params, tol)
    H0 = _hessian_at_origin(S.mode_set, sigma, params)
    if point.alpha == 0.0 and not np.any(point.r):
        H = H0
    else:
        U = symmetry_matrix(S.mode_set, point.alpha, point.r)
        H = U.T @ H0 @ U
        H = 0.5 * (H + H.T)
    H.setflags(write=False)
    return HessianOperator(H, S.mode_set, point.alpha, point.r)


def _sigma1_coefficients(sig_ms: ModeSet, cs, kappa, r) -> np.ndarray:
    """Series coefficients of sigma^(1) = -sum_n kappa(n) . grad sigma(x - n - r)."""
    sites = LatticeSpec(sig_ms.N).ion_sites()
    K = np.exp(-1j * sig_ms.xi @ sites.T) @ np.asarray(kappa, dtype=float)  # (mode, 3)
    return -1j * cs * np.exp(-1j * sig_ms.xi @ np.asarray(r, dtype=float)) * np.einsum("ia,ia->i", sig_ms.xi, K)


def quadratic_form(S: State, Y, sigma: IonDensity, params: ModelParams) -> float:
    """1/2 <Y, E''(S) Y> from the linearized charge density.

    Q(Y) = 1/2 \\int |grad phi|^2 + 1/2 (rho1, G rho1) + |pi|^2 / (2M),
    rho1 = sigma1 - 2 e Re(conj(psi_S) phi).
    """
    ms = S.mode_set
    if not isinstance(Y, Tangent):
        Y = coords_to_tangent(ms, Y)
    N3 = ms.N**3
    disc = discretization(ms, sigma)
    _, _, inv = disc.kgrid()
    point = ExpansionPoint(float(np.angle(S.psi[ms.zero])), S.q[0])
    psi_s = S.psi[ms.zero]
    phi = np.asarray(Y.phi, dtype=complex)
    # coefficients of Re(conj(psi_S) phi)
    re = 0.5 * (np.conj(psi_s) * phi + psi_s * np.conj(phi[ms.neg]))
    rho = np.zeros(disc.shape, dtype=complex)
    rho[disc.psi_idx] -= 2 * params.e * re
    rho[disc.sig_idx] += _sigma1_coefficients(disc.sigma_modes, disc.sigma_c, Y.kappa, point.r)
    kin = 0.5 * N3 * float(np.sum(ms.xi2 * np.abs(phi) ** 2))
    coul = 0.5 * N3 * float(np.sum(inv * np.abs(rho) ** 2))
    ions = float(np.sum(np.asarray(Y.pi) ** 2)) / (2 * params.M)
    return kin + coul + ions


def energy_second_difference(S: State, Y, sigma: IonDensity, params: ModelParams, h: float = 1e-4) -> float:
    """Central second difference (E(S+hY) - 2E(S) + E(S-hY)) / h^2 ~ <Y, E'' Y>."""
    Ep = energy(displaced_state(S, Y, h), sigma, params)
    Em = energy(displaced_state(S, Y, -h), sigma, params)
    E0 = energy(S, sigma, params)
    return (Ep - 2 * E0 + Em) / h**2


def wiener_identity_check(sigma: IonDensity, kappa, r=(0.0, 0.0, 0.0), N: int | None = None, m_cut: int = 16):
    """Both sides of  ||sqrt(G) sigma1||^2 = N^-3 sum_theta <khat, Sigma(theta) khat>.

    The left side is summed over the Fourier band of sigma; the right side
    uses Sigma(theta) at the Brillouin points outside 2 pi Z^3 with
    khat(theta) = sum_n e^{i theta n} kappa(n).
    """
    kappa = np.asarray(kappa, dtype=float)
    if N is None:
        N = sigma.mode_set.N if sigma.is_band_limited else round((kappa.size / 3) ** (1 / 3))
    kappa = kappa.reshape(N**3, 3)
    sig_ms, cs = sigma.spectrum(N)
    c1 = _sigma1_coefficients(sig_ms, cs, kappa, r)
    inv = np.zeros(sig_ms.n_modes)
    np.divide(1.0, sig_ms.xi2, out=inv, where=sig_ms.xi2 > 0)
    lhs = float(N**3 * np.sum(inv * np.abs(c1) ** 2))
    sites = LatticeSpec(N).ion_sites()
    rhs = 0.0
    for k in brillouin_points(N).outside():
        theta = (2 * np.pi / N) * k
        khat = np.exp(1j * sites @ theta) @ kappa
        Sig = sigma_matrix(sigma, theta, m_cut).matrix
        rhs += float(np.real(np.conj(khat) @ Sig @ khat))
    return lhs, rhs / N**3


@dataclass(frozen=True)
class HessianSpectrum:
    eigenvalues: np.ndarray
    kernel_dim: int
    min_positive: float
    norm: float
    threshold: float


def spectrum(H: HessianOperator, kernel_tol: float = 1e-9) -> HessianSpectrum:
    """Full symmetric eigendecomposition; |lambda| <= kernel_tol ||H|| counts as kernel."""
    try:
        lam = np.linalg.eigvalsh(H.matrix)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"symmetric eigensolver failed: {exc}") from None
    norm = float(np.abs(lam).max())
    thr = kernel_tol * norm
    ker = int(np.sum(np.abs(lam) <= thr))
    pos = lam[lam > thr]
    return HessianSpectrum(lam, ker, float(pos.min()) if pos.size else math.nan, norm, thr)


def symmetry_directions(H: HessianOperator, params: ModelParams) -> np.ndarray:
    """Orthonormal rows spanning psi_S, i psi_S and the three uniform shifts."""
    ms = H.mode_set
    n, n_ion = _layout(ms)
    psi = np.zeros(ms.n_modes, dtype=complex)
    psi[ms.zero] = np.exp(1j * H.alpha) * math.sqrt(params.Z)
    zeros = np.zeros((ms.N**3, 3))
    rows = [
        tangent_to_coords(ms, Tangent(psi, zeros, zeros)),
        tangent_to_coords(ms, Tangent(1j * psi, zeros, zeros)),
    ]
    for a in range(3):
        k = zeros.copy()
        k[:, a] = 1.0
        rows.append(tangent_to_coords(ms, Tangent(np.zeros_like(psi), k, zeros)))
    V = np.array(rows)
    return V / np.linalg.norm(V, axis=1, keepdims=True)


def constrained_basis(H: HessianOperator, params: ModelParams) -> np.ndarray:
    """Columns: orthonormal basis of the complement of the symmetry directions."""
    V = symmetry_directions(H, params)
    # the last rows of Vt from a full SVD span the orthogonal complement
    _, _, Vt = np.linalg.svd(V, full_matrices=True)
    return Vt[V.shape[0] :].T


def constrained_min_eig(H: HessianOperator, S: State | None = None, params: ModelParams | None = None) -> float:
    """Smallest eigenvalue of H restricted to the normal directions of the
    solitary manifold inside the constant-charge manifold."""
    if params is None:
        raise DomainError("params are required")
    B = constrained_basis(H, params)
    try:
        lam = np.linalg.eigvalsh(B.T @ H.matrix @ B)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"symmetric eigensolver failed: {exc}") from None
    return float(lam[0])


def constrained_eigenvector(H: HessianOperator, params: ModelParams) -> tuple[float, np.ndarray]:
    """(nu, unit coordinate vector) of the lowest constrained eigenpair."""
    B = constrained_basis(H, params)
    lam, vec = np.linalg.eigh(B.T @ H.matrix @ B)
    return float(lam[0]), B @ vec[:, 0]
