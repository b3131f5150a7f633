"""Ground states S = (e^{i alpha} sqrt(Z), q*, 0) and the ion arrangements behind them."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .density import IonDensity, check_spectral_condition
from .errors import DomainError, NotAGroundStateError
from .field import ModelParams, State
from .lattice import LatticeSpec, ModeSet

__all__ = [
    "IonArrangement",
    "FlatDensityReport",
    "make_ground_state",
    "structure_factor",
    "verify_flat_density",
    "check_spectral_condition",
]

_KINDS = ("periodic", "staircase", "custom")


@dataclass(frozen=True, eq=False)
class IonArrangement:
    """Displacements q*(n) of the N^3 ions from their reference sites.

    periodic:  q*(n) = r
    staircase: q*(n) = (r1, r2, r3 + tau[n1, n2])
    custom:    q*(n) given explicitly, shape (N^3, 3) in lexicographic n order
    """

    kind: str
    N: int
    r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    tau: np.ndarray | None = None
    q: np.ndarray | None = None

    def __post_init__(self):
        LatticeSpec(self.N)
        if self.kind not in _KINDS:
            raise DomainError(f"unknown arrangement kind {self.kind!r}")
        N = self.N
        r = np.asarray(self.r, dtype=float).reshape(3) % N
        object.__setattr__(self, "r", r)
        if self.kind == "staircase":
            if self.tau is None:
                raise DomainError("staircase arrangement needs tau")
            tau = np.asarray(self.tau, dtype=float).reshape(N, N) % N
            object.__setattr__(self, "tau", tau)
        if self.kind == "custom":
            if self.q is None:
                raise DomainError("custom arrangement needs q")
            q = np.asarray(self.q, dtype=float).reshape(N**3, 3) % N
            object.__setattr__(self, "q", q)

    @classmethod
    def periodic(cls, N: int, r=(0.0, 0.0, 0.0)) -> "IonArrangement":
        return cls("periodic", N, r=r)

    @classmethod
    def staircase(cls, N: int, r, tau) -> "IonArrangement":
        return cls("staircase", N, r=r, tau=tau)

    @classmethod
    def custom(cls, N: int, q) -> "IonArrangement":
        return cls("custom", N, q=q)

    def displacements(self) -> np.ndarray:
        N = self.N
        if self.kind == "custom":
            return self.q.copy()
        q = np.tile(self.r, (N**3, 1))
        if self.kind == "staircase":
            sites = LatticeSpec(N).ion_sites()
            q[:, 2] += self.tau[sites[:, 0], sites[:, 1]]
        return q % N


def _geometric(k: int, N: int) -> int:
    """sum_{n=0}^{N-1} exp(2 pi i k n / N), exactly."""
    return N if k % N == 0 else 0


def _clean(z: complex) -> complex:
    return complex(z.real + 0.0, z.imag + 0.0)


def structure_factor(arrangement: IonArrangement, k) -> complex:
    """S(xi) = sum_n exp(i xi (n + q*(n))) for xi = (2 pi / N) k."""
    N = arrangement.N
    k = np.asarray(k, dtype=np.int64).reshape(3)
    xi = (2 * np.pi / N) * k
    if arrangement.kind == "periodic":
        g = math.prod(_geometric(int(v), N) for v in k)
        if g == 0:
            return 0j
        return _clean(g * cmath.exp(1j * float(xi @ arrangement.r)))
    if arrangement.kind == "staircase":
        g3 = _geometric(int(k[2]), N)
        if g3 == 0:
            return 0j
        n = np.arange(N)
        n1, n2 = np.meshgrid(n, n, indexing="ij")
        phase = xi[0] * n1 + xi[1] * n2 + xi[2] * arrangement.tau
        inner = np.exp(1j * phase).sum()
        return _clean(g3 * inner * cmath.exp(1j * float(xi @ arrangement.r)))
    pos = LatticeSpec(N).ion_sites() + arrangement.q
    return _clean(complex(np.exp(1j * pos @ xi).sum()))


@dataclass(frozen=True)
class FlatDensityReport:
    passed: bool
    worst_k: tuple | None
    residual: float
    zero_mode_error: float


def verify_flat_density(sigma: IonDensity, arrangement: IonArrangement, tol: float = 1e-10) -> FlatDensityReport:
    """Check sum_n sigma(x - n - q*(n)) == eZ over the band carried by sigma.

    Equivalent to |c_sigma(xi) conj S(xi)| <= tol eZ for xi != 0 and
    c_sigma(0) S(0) = eZ.
    """
    N = arrangement.N
    modes, c = sigma.spectrum(N)
    pos = LatticeSpec(N).ion_sites() + arrangement.displacements()
    S_conj = np.exp(-1j * modes.xi @ pos.T).sum(axis=1)
    prod = np.abs(c * S_conj)
    prod[modes.zero] = 0.0
    i = int(np.argmax(prod))
    residual = float(prod[i]) / sigma.eZ
    zero_err = abs(c[modes.zero] * N**3 - sigma.eZ) / sigma.eZ
    passed = residual <= tol and zero_err <= tol
    worst = tuple(int(v) for v in modes.ks[i]) if residual > 0 else None
    return FlatDensityReport(bool(passed), worst, residual, float(zero_err))


def make_ground_state(
    alpha: float,
    arrangement: IonArrangement,
    sigma: IonDensity,
    params: ModelParams,
    mode_set: ModeSet,
    tol: float = 1e-10,
) -> State:
    """The zero-energy stationary state psi = e^{i alpha} sqrt(Z), q = q*, p = 0."""
    if arrangement.N != params.N or mode_set.N != params.N:
        raise DomainError("arrangement, ModeSet and parameters disagree on N")
    rep = verify_flat_density(sigma, arrangement, tol)
    if not rep.passed:
        raise NotAGroundStateError(
            f"arrangement is not a ground state: residual {rep.residual:.3e} at k={rep.worst_k}",
            worst_k=rep.worst_k,
            residual=rep.residual,
        )
    psi = np.zeros(mode_set.n_modes, dtype=complex)
    psi[mode_set.zero] = cmath.exp(1j * alpha) * math.sqrt(params.Z)
    n = params.N**3
    return State(mode_set, psi, arrangement.displacements(), np.zeros((n, 3)))
