"""Distance to the solitary manifold, the lower energy estimate and orbital stability runs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .density import IonDensity, check_wiener
from .dynamics import IntegratorConfig, evolve
from .errors import DomainError
from .field import ModelParams, State, charge, energy
from .groundstate import IonArrangement, make_ground_state
from .hessian import (
    HessianOperator,
    assemble_hessian,
    constrained_basis,
    constrained_min_eig,
    displaced_state,
)
from .lattice import ModeSet, torus_delta


@dataclass(frozen=True)
class ManifoldFit:
    """Closest ground state S_{alpha*, r*} and the metric distance to it."""

    alpha: float
    r: np.ndarray
    distance: float
    psi_part: float
    q_part: float
    p_part: float


def _circular_fit(x: np.ndarray, N: float) -> tuple[float, float]:
    """argmin_r sum_i delta(x_i - r)^2 on the circle R / N Z, and the minimum.

    Initialized at the circular mean; every optimum is the plain mean of
    some unwrapping of the points cut at a gap, so all N^3 cuts are tried
    and the best candidate is polished by a few Newton sweeps.
    """
    x = np.sort(np.asarray(x, dtype=float) % N)
    ang = 2 * np.pi * x / N
    cm = (math.atan2(np.sin(ang).mean(), np.cos(ang).mean()) * N / (2 * np.pi)) % N

    def cost(r):
        return float(np.sum(torus_delta(x, r, N) ** 2))

    best_r, best = cm, cost(cm)
    for i in range(len(x)):
        unwrapped = np.concatenate([x[i:], x[:i] + N])
        r = unwrapped.mean() % N
        c = cost(r)
        if c < best:
            best_r, best = r, c
    # coordinate descent: the objective is piecewise quadratic, so a mean
    # of the wrapped residuals is an exact local step
    for _ in range(5):
        r = (best_r + torus_delta(x, best_r, N).mean()) % N
        c = cost(r)
        if c >= best:
            break
        best_r, best = r, c
    return float(best_r), best


def distance_to_manifold(X: State, params: ModelParams) -> ManifoldFit:
    """min over (alpha, r) of d(X, S_{alpha,r})."""
    ms = X.mode_set
    N = X.N
    c0 = X.psi[ms.zero]
    alpha = math.atan2(c0.imag, c0.real) % (2 * math.pi) if c0 != 0 else 0.0
    w = 1 + ms.xi2
    rest = np.abs(X.psi) ** 2 * w
    rest[ms.zero] = 0.0
    psi_part = math.sqrt(N**3 * (float(rest.sum()) + (abs(c0) - math.sqrt(params.Z)) ** 2))
    r = np.zeros(3)
    sq = 0.0
    for a in range(3):
        r[a], c = _circular_fit(X.q[:, a], N)
        sq += c
    q_part = math.sqrt(sq)
    p_part = float(np.linalg.norm(X.p))
    return ManifoldFit(alpha, r, psi_part + q_part + p_part, psi_part, q_part, p_part)


def normalize_charge(X: State, params: ModelParams) -> State:
    """Rescale psi radially so that the charge equals Z N^3."""
    Q = charge(X)
    if Q <= 0:
        raise DomainError("cannot normalize a vanishing electron field")
    return X.replace(psi=X.psi * math.sqrt(params.Z * X.N**3 / Q))


@dataclass
class LowerBoundReport:
    nu_empirical: float
    nu_hessian: float
    margin: float
    violations: int
    ratios: np.ndarray = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.nu_empirical >= self.margin * self.nu_hessian


def energy_ratio(S: State, y: np.ndarray, sigma: IonDensity, params: ModelParams) -> float:
    """E(X) / d(X, manifold)^2 for X the charge-normalized S + y."""
    X = normalize_charge(displaced_state(S, y), params)
    d = distance_to_manifold(X, params).distance
    if d == 0:
        raise DomainError("the perturbed state lies on the solitary manifold")
    return energy(X, sigma, params) / d**2


def lower_bound_scan(
    S: State,
    sigma: IonDensity,
    params: ModelParams,
    delta: float = 1e-3,
    samples: int = 200,
    seed: int = 0,
    margin: float = 0.4,
    H: HessianOperator | None = None,
) -> LowerBoundReport:
    """Sample normal directions of size delta and record E / d^2."""
    if not delta > 0:
        raise DomainError("delta must be positive")
    if samples < 1:
        raise DomainError("samples must be >= 1")
    if H is None:
        H = assemble_hessian(S, sigma, params)
    nu_h = constrained_min_eig(H, S, params)
    B = constrained_basis(H, params)
    rng = np.random.default_rng(seed)
    ratios = np.empty(samples)
    for i in range(samples):
        z = rng.standard_normal(B.shape[1])
        ratios[i] = energy_ratio(S, delta * (B @ z) / np.linalg.norm(z), sigma, params)
    nu_emp = float(ratios.min())
    return LowerBoundReport(nu_emp, nu_h, margin, int(np.sum(ratios < margin * nu_h)), ratios)


@dataclass
class StabilityReport:
    sup_d: float
    bound: float
    passed: bool | None
    E0: float
    nu_empirical: float
    times: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)
    fits: list = field(repr=False)
    energies: np.ndarray = field(repr=False)
    charges: np.ndarray = field(repr=False)


#: d(t) below this counts as zero (the exact ground state stays put to round-off)
DISTANCE_FLOOR = 1e-10


def perturbed_ground_state(
    S: State, sigma: IonDensity, params: ModelParams, delta: float, seed: int = 0, direction=None, H=None
) -> State:
    """normalize(S + Y) with |Y| = delta, Y random in the constrained normal space
    unless an explicit coordinate ``direction`` is given."""
    if delta < 0:
        raise DomainError("delta must be non-negative")
    if delta == 0:
        return S
    if direction is None:
        if H is None:
            H = assemble_hessian(S, sigma, params)
        B = constrained_basis(H, params)
        z = np.random.default_rng(seed).standard_normal(B.shape[1])
        direction = B @ z
    y = np.asarray(direction, dtype=float)
    return normalize_charge(displaced_state(S, delta * y / np.linalg.norm(y)), params)


def stability_experiment(
    sigma: IonDensity,
    params: ModelParams,
    mode_set: ModeSet,
    delta: float = 1e-3,
    t_end: float = 50.0,
    cfg: IntegratorConfig | None = None,
    seed: int = 0,
    samples: int = 200,
    direction=None,
    nu_empirical: float | None = None,
) -> StabilityReport:
    """Evolve a perturbed ground state and compare sup_t d(t) with
    3 sqrt(E(X0) / nu_emp).

    The comparison is made only when sigma satisfies the Wiener condition;
    otherwise there is no uniform lower bound and ``passed`` is None.
    """
    if cfg is None:
        cfg = IntegratorConfig(dt=5e-3, t_end=t_end, sample_every=10)
    cfg = IntegratorConfig(
        scheme=cfg.scheme, dt=cfg.dt, t_end=t_end, picard_tol=cfg.picard_tol,
        picard_max_iters=cfg.picard_max_iters, sample_every=cfg.sample_every,
        max_energy_drift=cfg.max_energy_drift, track_manifold=True, max_halvings=cfg.max_halvings,
    )
    S = make_ground_state(0.0, IonArrangement.periodic(params.N), sigma, params, mode_set)
    H = assemble_hessian(S, sigma, params)
    wiener = check_wiener(sigma, params.N).passed
    X0 = perturbed_ground_state(S, sigma, params, delta, seed, direction, H)
    E0 = energy(X0, sigma, params)
    if wiener:
        if nu_empirical is None:
            nu_empirical = lower_bound_scan(
                S, sigma, params, max(delta, 1e-6), samples, seed, H=H
            ).nu_empirical
    traj = evolve(X0, sigma, params, cfg)
    dist = np.array([f.distance for f in traj.fits])
    sup_d = float(dist.max())
    if wiener and nu_empirical and nu_empirical > 0:
        bound = 3 * math.sqrt(max(E0, 0.0) / nu_empirical)
        passed = sup_d <= max(bound, DISTANCE_FLOOR)
    else:
        bound, passed = math.nan, None
    return StabilityReport(
        sup_d, bound, passed, E0, math.nan if nu_empirical is None else nu_empirical,
        np.array(traj.times), dist, traj.fits, np.array(traj.energies), np.array(traj.charges),
    )
