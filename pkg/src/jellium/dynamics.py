"""Time evolution of the Galerkin-truncated Schrodinger-Poisson-Newton system.

The electron field obeys  i psi_t = -1/2 Lap psi - e P_m(Phi psi),
the ions  q_t = p / M,  p_t = f(n) = -(grad Phi, sigma(. - n - q(n))).

Two integrators are provided:

* ``strang`` -- kinetic/drift flow (exact in Fourier) sandwiched between two
  Coulomb half steps.  A Coulomb step freezes the ions, evaluates Phi at the
  midpoint field and applies the unitary exp(i e h P_m Phi P_m) to psi, so
  the charge is conserved to round-off and the scheme is symmetric.
* ``picard`` -- the Duhamel (integral) form in the interaction picture,
  discretized by the two-point Gauss rule and solved by fixed-point
  iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .density import IonDensity
from .errors import BlowUpError, DomainError, StepSizeError
from .field import (
    Discretization,
    ModelParams,
    State,
    charge,
    discretization,
    energy,
    grid_to_spec,
    metric,
    psi_to_grid,
    structure_conj,
)


class Nonlinearity(NamedTuple):
    field: np.ndarray
    velocity: np.ndarray
    force: np.ndarray


@lru_cache(maxsize=32)
def _diff_index(disc: Discretization):
    ks = disc.mode_set.ks
    d = ks[:, None, :] - ks[None, :, :]
    return tuple(d[..., a] % disc.shape[a] for a in range(3))


def _phi_spec(disc: Discretization, psi, positions, e: float) -> np.ndarray:
    _, _, inv = disc.kgrid()
    dens = np.abs(psi_to_grid(disc, psi)) ** 2
    spec = -e * grid_to_spec(dens)
    nz = disc.sig_nonzero
    idx = tuple(i[nz] for i in disc.sig_idx)
    spec[idx] += disc.sigma_c[nz] * structure_conj(positions, disc.sig_xi[nz])
    return spec * inv


def _forces(disc: Discretization, phi_spec, positions) -> np.ndarray:
    nz = disc.sig_nonzero
    xi = disc.sig_xi[nz]
    idx = tuple(i[nz] for i in disc.sig_idx)
    w = 1j * phi_spec[idx] * np.conj(disc.sigma_c[nz])
    phase = np.exp(1j * positions @ xi.T)
    return -disc.N**3 * np.real((phase * w) @ xi)


def _project_product(disc: Discretization, phi_spec, psi) -> np.ndarray:
    phi = np.real(np.fft.ifftn(phi_spec) * phi_spec.size)
    prod = grid_to_spec(phi * psi_to_grid(disc, psi))
    return prod[disc.psi_idx]


def nonlinearity(X: State, sigma: IonDensity, params: ModelParams) -> Nonlinearity:
    """N(X) = (i e P_m(Phi psi), p / M, f)."""
    disc = discretization(X.mode_set, sigma)
    pos = X.mode_set.lattice.ion_sites() + X.q
    phi = _phi_spec(disc, X.psi, pos, params.e)
    return Nonlinearity(
        1j * params.e * _project_product(disc, phi, X.psi),
        X.p / params.M,
        _forces(disc, phi, pos),
    )


def _coulomb_step(disc, psi, positions, p, h, e, tol, max_iters):
    """Exponential-midpoint step of the Coulomb flow with frozen ions."""
    diff = _diff_index(disc)
    scale = 1.0 + np.abs(psi).max()
    psi1 = psi
    for _ in range(max_iters):
        phi = _phi_spec(disc, 0.5 * (psi + psi1), positions, e)
        w, V = np.linalg.eigh(phi[diff])
        new = V @ (np.exp(1j * e * h * w) * (V.conj().T @ psi))
        change = np.abs(new - psi1).max()
        psi1 = new
        if change <= tol * scale:
            break
    else:
        raise StepSizeError(f"Coulomb substep did not converge in {max_iters} iterations (h={h})")
    return psi1, p + h * _forces(disc, phi, positions)


def step_strang(
    X: State,
    dt: float,
    sigma: IonDensity,
    params: ModelParams,
    tol: float = 1e-13,
    max_iters: int = 50,
) -> State:
    """One symmetric split step: Coulomb(dt/2), kinetic + drift(dt), Coulomb(dt/2)."""
    if not dt > 0:
        raise DomainError("dt must be positive")
    disc = discretization(X.mode_set, sigma)
    sites = X.mode_set.lattice.ion_sites()
    q = X.q
    psi, p = _coulomb_step(disc, X.psi, sites + q, X.p, 0.5 * dt, params.e, tol, max_iters)
    psi = psi * np.exp(-0.5j * X.mode_set.xi2 * dt)
    q = q + p * (dt / params.M)
    psi, p = _coulomb_step(disc, psi, sites + q, p, 0.5 * dt, params.e, tol, max_iters)
    return State(X.mode_set, psi, q, p)


_GAUSS_C = np.array([0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6])
_GAUSS_A = np.array([[0.25, 0.25 - math.sqrt(3) / 6], [0.25 + math.sqrt(3) / 6, 0.25]])
_GAUSS_B = np.array([0.5, 0.5])


def step_picard(
    X: State,
    dt: float,
    sigma: IonDensity,
    params: ModelParams,
    tol: float = 1e-12,
    max_iters: int = 50,
    return_iterations: bool = False,
):
    """One step of the Duhamel form solved by fixed-point iteration.

    In the interaction picture v(s) = exp(i H0 s) psi(t + s) the integral
    over the step is replaced by the two-point Gauss rule; the stage values
    are iterated until two successive end states are closer than ``tol`` in
    the phase-space metric.  Raises StepSizeError if that does not happen
    within ``max_iters`` sweeps (the caller should halve ``dt``).
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    ms = X.mode_set
    disc = discretization(ms, sigma)
    sites = ms.lattice.ion_sites()
    half_kin = 0.5 * ms.xi2
    e, M = params.e, params.M

    v = np.array([X.psi, X.psi])
    Q = np.array([X.q, X.q])
    P = np.array([X.p, X.p])
    prev = State(ms, X.psi * np.exp(-1j * half_kin * dt), X.q + X.p * (dt / M), X.p)
    for it in range(1, max_iters + 1):
        kv = np.empty_like(v)
        kq = np.empty_like(Q)
        kp = np.empty_like(P)
        for i, c in enumerate(_GAUSS_C):
            s = c * dt
            psi = v[i] * np.exp(-1j * half_kin * s)
            pos = sites + Q[i]
            phi = _phi_spec(disc, psi, pos, e)
            kv[i] = np.exp(1j * half_kin * s) * (1j * e * _project_product(disc, phi, psi))
            kq[i] = P[i] / M
            kp[i] = _forces(disc, phi, pos)
        v1 = X.psi + dt * (_GAUSS_B @ kv.reshape(2, -1)).reshape(X.psi.shape)
        q1 = X.q + dt * np.tensordot(_GAUSS_B, kq, axes=1)
        p1 = X.p + dt * np.tensordot(_GAUSS_B, kp, axes=1)
        new = State(ms, v1 * np.exp(-1j * half_kin * dt), q1, p1)
        converged = metric(new, prev) < tol
        prev = new
        if converged:
            return (new, it) if return_iterations else new
        v = X.psi + dt * np.tensordot(_GAUSS_A, kv, axes=1)
        Q = X.q + dt * np.tensordot(_GAUSS_A, kq, axes=1)
        P = X.p + dt * np.tensordot(_GAUSS_A, kp, axes=1)
    raise StepSizeError(f"Picard iteration did not converge in {max_iters} sweeps (dt={dt})")


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "strang"
    dt: float = 1e-3
    t_end: float = 1.0
    picard_tol: float = 1e-12
    picard_max_iters: int = 50
    sample_every: int = 1
    max_energy_drift: float = 0.5
    track_manifold: bool = False
    max_halvings: int = 8

    def __post_init__(self):
        if self.scheme not in ("strang", "picard"):
            raise DomainError(f"unknown scheme {self.scheme!r}")
        if not (0 < self.dt <= self.t_end):
            raise DomainError("need 0 < dt <= t_end")
        if self.picard_max_iters < 1 or self.sample_every < 1:
            raise DomainError("picard_max_iters and sample_every must be >= 1")


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    charges: list = field(default_factory=list)
    fits: list = field(default_factory=list)

    @property
    def energy_drift(self) -> np.ndarray:
        E = np.asarray(self.energies)
        return np.abs(E - E[0])

    @property
    def charge_drift(self) -> np.ndarray:
        Q = np.asarray(self.charges)
        return np.abs(Q - Q[0])

    @property
    def max_energy_drift(self) -> float:
        return float(self.energy_drift.max())

    @property
    def max_charge_drift(self) -> float:
        return float(self.charge_drift.max())

    @property
    def final(self) -> State:
        return self.states[-1]


def _advance(X, dt, sigma, params, cfg, depth=0):
    try:
        if cfg.scheme == "strang":
            return step_strang(X, dt, sigma, params)
        return step_picard(X, dt, sigma, params, cfg.picard_tol, cfg.picard_max_iters)
    except StepSizeError:
        if depth >= cfg.max_halvings:
            raise
        half = _advance(X, dt / 2, sigma, params, cfg, depth + 1)
        return _advance(half, dt / 2, sigma, params, cfg, depth + 1)


def evolve(X0: State, sigma: IonDensity, params: ModelParams, cfg: IntegratorConfig) -> Trajectory:
    """Integrate to ``cfg.t_end`` sampling energy, charge and (optionally)
    the fit to the ground-state manifold every ``cfg.sample_every`` steps."""
    fit = None
    if cfg.track_manifold:
        from .stability import distance_to_manifold

        fit = distance_to_manifold
    n_steps = max(1, int(round(cfg.t_end / cfg.dt)))
    dt = cfg.t_end / n_steps
    traj = Trajectory()
    E0 = energy(X0, sigma, params)
    limit = cfg.max_energy_drift * abs(E0) + 1e-9

    def record(t, X, E):
        traj.times.append(t)
        traj.states.append(X)
        traj.energies.append(E)
        traj.charges.append(charge(X))
        if fit is not None:
            traj.fits.append(fit(X, params))

    record(0.0, X0, E0)
    X = X0
    for step in range(1, n_steps + 1):
        X = _advance(X, dt, sigma, params, cfg)
        if step % cfg.sample_every == 0 or step == n_steps:
            E = energy(X, sigma, params)
            if not abs(E - E0) <= limit:
                raise BlowUpError(
                    f"energy drift {abs(E - E0):.3e} exceeds safety bound {limit:.3e} at t={step * dt:.6g}"
                )
            record(step * dt, X, E)
    return traj
