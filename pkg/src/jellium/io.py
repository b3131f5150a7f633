"""JSON files for densities, states and arrangements; CSV writers for run outputs.

Floats are written with ``repr`` (the JSON default), which round-trips
exactly; CSV columns use 17 significant digits.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .density import BAND_LIMITED, CHAR_CUBE_POWER, IonDensity, band_limited_from_coefficients, make_char_cube_power
from .errors import DomainError
from .field import State
from .groundstate import IonArrangement
from .lattice import build_mode_set

FORMAT_VERSION = 1


def fmt(x) -> str:
    """17-significant-digit rendering; empty for None, nan kept literal."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return f"{x + 0.0:.17g}"


def _modes_to_list(ks: np.ndarray, coeffs: np.ndarray) -> list:
    return [[int(k[0]), int(k[1]), int(k[2]), float(c.real), float(c.imag)] for k, c in zip(ks, coeffs)]


def _coeffs_from_list(ms, rows) -> np.ndarray:
    c = np.zeros(ms.n_modes, dtype=complex)
    seen = set()
    for row in rows:
        if len(row) != 5:
            raise DomainError("coefficient rows must be [k1, k2, k3, re, im]")
        k = (int(row[0]), int(row[1]), int(row[2]))
        if k not in ms.index:
            raise DomainError(f"mode {k} is not in the ModeSet")
        if k in seen:
            raise DomainError(f"mode {k} listed twice")
        seen.add(k)
        c[ms.index[k]] = complex(float(row[3]), float(row[4]))
    return c


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def _read_json(path, kind: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != kind:
        raise DomainError(f"{path}: not a {kind} file")
    return doc


# densities


def density_to_dict(sigma: IonDensity) -> dict:
    doc = {"format": "density", "version": FORMAT_VERSION, "kind": sigma.kind, "e": sigma.e, "Z": sigma.Z}
    if sigma.kind == BAND_LIMITED:
        ms = sigma.mode_set
        doc.update(N=ms.N, m=ms.cutoff, beta=sigma.beta, seed=sigma.seed,
                   coefficients=_modes_to_list(ms.ks, sigma.coeffs))
    else:
        doc.update(k=sigma.power, N=sigma.N)
    return doc


def density_from_dict(doc: dict) -> IonDensity:
    kind = doc.get("kind")
    if kind == BAND_LIMITED:
        ms = build_mode_set(int(doc["N"]), int(doc["m"]))
        c = _coeffs_from_list(ms, doc["coefficients"])
        meta = {}
        if doc.get("beta") is not None:
            meta["beta"] = float(doc["beta"])
        if doc.get("seed") is not None:
            meta["seed"] = int(doc["seed"])
        return band_limited_from_coefficients(ms, c, float(doc["e"]), float(doc["Z"]), **meta)
    if kind == CHAR_CUBE_POWER:
        N = doc.get("N")
        return make_char_cube_power(int(doc["k"]), float(doc["e"]), float(doc["Z"]), None if N is None else int(N))
    raise DomainError(f"unknown density kind {kind!r}")


def save_density(path, sigma: IonDensity) -> None:
    _write_json(path, density_to_dict(sigma))


def load_density(path) -> IonDensity:
    return density_from_dict(_read_json(path, "density"))


# states


def save_state(path, X: State) -> None:
    ms = X.mode_set
    _write_json(path, {
        "format": "state", "version": FORMAT_VERSION, "N": ms.N, "m": ms.cutoff,
        "grid_dims": list(ms.grid_dims),
        "psi": _modes_to_list(ms.ks, X.psi),
        "q": X.q.tolist(), "p": X.p.tolist(),
    })


def load_state(path) -> State:
    doc = _read_json(path, "state")
    ms = build_mode_set(int(doc["N"]), int(doc["m"]), tuple(int(g) for g in doc["grid_dims"]))
    return State(ms, _coeffs_from_list(ms, doc["psi"]), np.array(doc["q"], dtype=float), np.array(doc["p"], dtype=float))


# arrangements


def arrangement_to_dict(a: IonArrangement) -> dict:
    doc = {"format": "arrangement", "version": FORMAT_VERSION, "kind": a.kind, "N": a.N, "r": a.r.tolist()}
    if a.kind == "staircase":
        doc["tau"] = a.tau.tolist()
    if a.kind == "custom":
        doc["q"] = a.q.tolist()
    return doc


def arrangement_from_dict(doc: dict) -> IonArrangement:
    return IonArrangement(
        str(doc["kind"]), int(doc["N"]), r=doc.get("r", [0.0, 0.0, 0.0]),
        tau=doc.get("tau"), q=doc.get("q"),
    )


def save_arrangement(path, a: IonArrangement) -> None:
    _write_json(path, arrangement_to_dict(a))


def load_arrangement(path) -> IonArrangement:
    return arrangement_from_dict(_read_json(path, "arrangement"))


# CSV


def write_csv(path, header: list[str], rows, summary: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
        if summary is not None:
            fh.write(f"# {summary}\n")


TRAJECTORY_HEADER = ["t", "E", "Q", "E_drift", "Q_drift", "d_manifold", "alpha_star", "r1", "r2", "r3"]
STABILITY_HEADER = ["t", "d", "alpha_star", "r1", "r2", "r3", "E", "Q"]
SPECTRUM_HEADER = ["index", "eigenvalue"]


def write_trajectory_csv(path, traj) -> None:
    E0, Q0 = traj.energies[0], traj.charges[0]
    rows = []
    for i, t in enumerate(traj.times):
        E, Q = traj.energies[i], traj.charges[i]
        if traj.fits:
            f = traj.fits[i]
            extra = [f.distance, f.alpha, *f.r]
        else:
            extra = [None] * 5
        rows.append([t, E, Q, abs(E - E0), abs(Q - Q0), *extra])
    write_csv(path, TRAJECTORY_HEADER, rows)


def write_stability_csv(path, rep) -> None:
    rows = [
        [t, d, f.alpha, *f.r, E, Q]
        for t, d, f, E, Q in zip(rep.times, rep.distances, rep.fits, rep.energies, rep.charges)
    ]
    verdict = "none" if rep.passed is None else ("true" if rep.passed else "false")
    bound = "nan" if math.isnan(rep.bound) else fmt(rep.bound)
    write_csv(path, STABILITY_HEADER, rows, f"sup_d={fmt(rep.sup_d)} bound={bound} pass={verdict}")


def write_spectrum_csv(path, eigenvalues, kernel_dim: int, nu: float, d: int) -> None:
    rows = [[i, lam] for i, lam in enumerate(eigenvalues)]
    write_csv(path, SPECTRUM_HEADER, rows, f"kernel_dim={kernel_dim} nu={fmt(nu)} d={d}")
