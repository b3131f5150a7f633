"""Spectral toolkit for a finite crystal of ions coupled to a Schrodinger electron field on a torus."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.1.0"

from .density import (
    IonDensity,
    check_jellium,
    check_spectral_condition,
    check_wiener,
    make_band_limited_jellium,
    make_char_cube_power,
    sigma_matrix,
)
from .dynamics import IntegratorConfig, Trajectory, evolve, nonlinearity, step_picard, step_strang
from .field import ModelParams, State, charge, energy, metric, potential
from .groundstate import IonArrangement, make_ground_state, structure_factor, verify_flat_density
from .hessian import (
    assemble_hessian,
    constrained_min_eig,
    quadratic_form,
    spectrum,
    wiener_identity_check,
)
from .lattice import LatticeSpec, ModeSet, build_mode_set
from .stability import distance_to_manifold, lower_bound_scan, stability_experiment

__all__ = [
    "IonDensity", "check_jellium", "check_spectral_condition", "check_wiener",
    "make_band_limited_jellium", "make_char_cube_power", "sigma_matrix",
    "IntegratorConfig", "Trajectory", "evolve", "nonlinearity", "step_picard", "step_strang",
    "ModelParams", "State", "charge", "energy", "metric", "potential",
    "IonArrangement", "make_ground_state", "structure_factor", "verify_flat_density",
    "assemble_hessian", "constrained_min_eig", "quadratic_form", "spectrum", "wiener_identity_check",
    "LatticeSpec", "ModeSet", "build_mode_set",
    "distance_to_manifold", "lower_bound_scan", "stability_experiment",
]
