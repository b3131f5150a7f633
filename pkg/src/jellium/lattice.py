"""Cubic lattice on the torus T_N = R^3 / N Z^3, its dual lattices and mode sets.

Dual vectors are always carried as integer triples ``k`` with
``xi = (2 pi / N) k``; every lattice-membership question is answered with
integer arithmetic on ``k``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, ResourceError

#: Upper bound on the number of Fourier modes a single ModeSet may hold.
MAX_MODES = 200_000


@dataclass(frozen=True)
class LatticeSpec:
    """The torus period ``N``; the crystal has ``N**3`` cells."""

    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N!r}")

    @property
    def cell_count(self) -> int:
        return self.N**3

    def ion_sites(self) -> np.ndarray:
        """Reference positions n in Gamma_N, lexicographic, shape (N**3, 3)."""
        return _ion_sites(self.N)


@lru_cache(maxsize=None)
def _ion_sites(N: int) -> np.ndarray:
    r = np.arange(N)
    sites = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    sites.setflags(write=False)
    return sites


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Galerkin basis: dual vectors (2 pi/N) k with k.k <= cutoff.

    Modes are listed in lexicographic order of k.  ``grid_dims`` is the
    collocation grid used for quadratic products of fields on this set.
    """

    lattice: LatticeSpec
    cutoff: int
    ks: np.ndarray
    grid_dims: tuple[int, int, int]
    index: dict = field(repr=False)
    neg: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.lattice.N

    @property
    def n_modes(self) -> int:
        return len(self.ks)

    @property
    def kmax(self) -> int:
        """Largest |k_j| over all modes."""
        return int(np.abs(self.ks).max())

    @property
    def xi(self) -> np.ndarray:
        return (2 * np.pi / self.N) * self.ks

    @property
    def xi2(self) -> np.ndarray:
        return (2 * np.pi / self.N) ** 2 * (self.ks**2).sum(axis=1)

    @property
    def zero(self) -> int:
        return self.index[(0, 0, 0)]

    def position(self, k) -> int:
        return self.index[tuple(int(v) for v in k)]

    def __contains__(self, k) -> bool:
        return tuple(int(v) for v in k) in self.index

    def __len__(self) -> int:
        return len(self.ks)

    def same_as(self, other: "ModeSet") -> bool:
        return (
            self is other
            or (self.N == other.N and self.cutoff == other.cutoff and self.grid_dims == other.grid_dims)
        )


def dealias_grid_size(kmax: int) -> int:
    """Even grid size resolving products of two fields of band ``2*kmax``.

    With ``G >= 4*kmax + 1`` the square of a field with |k_j| <= kmax is
    represented without aliasing, and so is the product of that square with
    the field itself once truncated back to the band.  This also satisfies
    ``G >= 2*kmax + 2``.
    """
    return 4 * kmax + 2


@lru_cache(maxsize=64)
def build_mode_set(N: int, m: int, grid_dims: tuple[int, int, int] | None = None) -> ModeSet:
    """All k in Z^3 with k.k <= m, negation closed and lexicographically ordered."""
    lattice = LatticeSpec(N)
    if int(m) != m or m < 1:
        raise DomainError(f"cutoff m must be a positive integer, got {m!r}")
    kmax = math.isqrt(m)
    if (2 * kmax + 1) ** 3 > 8 * MAX_MODES:
        raise ResourceError(f"cutoff m={m} exceeds the mode budget ({MAX_MODES} modes)")
    r = range(-kmax, kmax + 1)
    ks = [k for k in itertools.product(r, r, r) if k[0] ** 2 + k[1] ** 2 + k[2] ** 2 <= m]
    if len(ks) > MAX_MODES:
        raise ResourceError(f"cutoff m={m} gives {len(ks)} modes, budget is {MAX_MODES}")
    arr = np.array(ks, dtype=np.int64)
    arr.setflags(write=False)
    index = {k: i for i, k in enumerate(ks)}
    neg = np.array([index[(-a, -b, -c)] for a, b, c in ks], dtype=np.int64)
    neg.setflags(write=False)
    need = dealias_grid_size(kmax)
    if grid_dims is None:
        grid_dims = (need, need, need)
    else:
        grid_dims = tuple(int(g) for g in grid_dims)
        if len(grid_dims) != 3 or min(grid_dims) < need:
            raise DomainError(f"grid_dims {grid_dims} below the dealiasing bound {need}")
    return ModeSet(lattice, int(m), arr, grid_dims, index, neg)


def in_gamma1(k, N: int) -> bool:
    """True iff (2 pi/N) k lies in 2 pi Z^3, i.e. every k_j is divisible by N."""
    return all(int(v) % N == 0 for v in k)


@dataclass(frozen=True)
class BrillouinSet:
    """Half-open representatives (2 pi/N) k, k_j in {0..N-1}, of Gamma*_N / Gamma*_1."""

    N: int
    ks: np.ndarray
    in_gamma1: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return (2 * np.pi / self.N) * self.ks

    def outside(self) -> np.ndarray:
        """Integer representatives of the points not in Gamma*_1."""
        return self.ks[~self.in_gamma1]

    def __len__(self) -> int:
        return len(self.ks)


def brillouin_points(N: int) -> BrillouinSet:
    ks = LatticeSpec(N).ion_sites().copy()
    flags = np.array([in_gamma1(k, N) for k in ks])
    return BrillouinSet(N, ks, flags)


def canonical_mask(ks: np.ndarray) -> np.ndarray:
    """True for k whose first nonzero component is positive (one of each +-k pair)."""
    first = np.where(ks[:, 0] != 0, ks[:, 0], np.where(ks[:, 1] != 0, ks[:, 1], ks[:, 2]))
    return first > 0


def torus_delta(a, b, N: float) -> np.ndarray:
    """Componentwise signed circular difference a - b on [0, N), in [-N/2, N/2)."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return (d + N / 2) % N - N / 2
