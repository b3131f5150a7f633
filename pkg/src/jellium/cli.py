"""Command-line driver: ``jellium <subcommand> ...``.

Every subcommand accepts ``--config run.json``; explicit flags override the
file.  Runs that write files also write ``<output>.provenance.json`` with the
resolved configuration and library versions.  Exit codes: 0 ok,
1 computational failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .density import (
    check_jellium,
    check_wiener,
    default_density_cutoff,
    make_band_limited_jellium,
    make_char_cube_power,
)
from .dynamics import IntegratorConfig, evolve
from .errors import JelliumError
from .field import ModelParams, charge, energy
from .groundstate import IonArrangement, make_ground_state, structure_factor, verify_flat_density
from .hessian import assemble_hessian, constrained_min_eig, spectrum
from .io import (
    density_from_dict,
    fmt,
    load_arrangement,
    load_density,
    load_state,
    save_density,
    save_state,
    write_spectrum_csv,
    write_stability_csv,
    write_trajectory_csv,
)
from .lattice import build_mode_set
from .stability import perturbed_ground_state, stability_experiment


@dataclass
class RunConfig:
    """Everything a run depends on.  Defaults equal the library defaults."""

    N: int | None = None
    Z: float = 1.0
    e: float = 1.0
    M_ion: float = 10.0
    cutoff: int = 2
    dt: float = 1e-3
    t_end: float = 1.0
    grid_dims: list | None = None
    seed: int = 0
    density: object = None
    scheme: str = "strang"
    picard_tol: float = 1e-12
    picard_max_iters: int = 50
    sample_every: int = 1
    kernel_tol: float = 1e-9
    jellium_tol: float = 1e-10
    m_cut: int = 16
    beta: float = 0.01
    delta: float = 0.0
    samples: int = 200
    alpha: float = 0.0
    r: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    arrangement: str | None = None
    state: str | None = None
    track_manifold: bool = False

    def validate(self) -> None:
        for name in ("Z", "e", "M_ion", "dt", "t_end", "picard_tol", "kernel_tol", "jellium_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.N is not None and (int(self.N) != self.N or self.N < 1):
            raise ValueError("N must be a positive integer")
        if self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        for name in ("density", "arrangement", "state"):
            ref = getattr(self, name)
            if isinstance(ref, str) and ref not in ("periodic",) and not Path(ref).is_file():
                raise ValueError(f"{name} file not found: {ref}")


class UsageError(Exception):
    pass


_FLAG_MAP = {
    "n": "N", "z": "Z", "e": "e", "mass": "M_ion", "cutoff": "cutoff", "dt": "dt", "t_end": "t_end",
    "seed": "seed", "density": "density", "scheme": "scheme", "picard_tol": "picard_tol",
    "picard_max_iters": "picard_max_iters", "sample_every": "sample_every", "kernel_tol": "kernel_tol",
    "tol": "jellium_tol", "m_cut": "m_cut", "beta": "beta", "delta": "delta", "samples": "samples",
    "alpha": "alpha", "r": "r", "arrangement": "arrangement", "state": "state",
    "track_manifold": "track_manifold", "grid": "grid_dims",
}


def _triple(text: str, kind=float) -> list:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated values, got {text!r}")
    try:
        return [kind(v) for v in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid triple {text!r}") from None


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        names = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(doc) - names
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg = dataclasses.replace(cfg, **doc)
    for flag, name in _FLAG_MAP.items():
        v = getattr(args, flag, None)
        if v is not None and v is not False:
            setattr(cfg, name, v)
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _params(cfg: RunConfig, N: int) -> ModelParams:
    return ModelParams(cfg.e, cfg.Z, cfg.M_ion, N)


def _density(cfg: RunConfig):
    if cfg.density is None:
        raise UsageError("a density is required (--density FILE)")
    if isinstance(cfg.density, dict):
        return density_from_dict(cfg.density)
    return load_density(cfg.density)


def _lattice_N(cfg: RunConfig, sigma) -> int:
    if sigma.is_band_limited:
        if cfg.N is not None and cfg.N != sigma.mode_set.N:
            raise UsageError(f"--n {cfg.N} disagrees with the density (N={sigma.mode_set.N})")
        return sigma.mode_set.N
    N = cfg.N if cfg.N is not None else sigma.N
    if N is None:
        raise UsageError("--n is required for analytic densities")
    return int(N)


def _mode_set(cfg: RunConfig, N: int):
    grid = None if cfg.grid_dims is None else tuple(int(g) for g in cfg.grid_dims)
    return build_mode_set(N, cfg.cutoff, grid)


def _arrangement(cfg: RunConfig, N: int) -> IonArrangement:
    if cfg.arrangement in (None, "periodic"):
        return IonArrangement.periodic(N, cfg.r)
    a = load_arrangement(cfg.arrangement)
    if a.N != N:
        raise UsageError(f"arrangement has N={a.N}, run has N={N}")
    return a


def _provenance(path: Path, command: str, cfg: RunConfig) -> Path:
    side = path.with_name(path.name + ".provenance.json")
    doc = {
        "command": command,
        "config": dataclasses.asdict(cfg),
        "versions": {"jellium": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }
    side.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return side


# subcommands


def cmd_design_density(args, cfg, outputs) -> int:
    if cfg.N is None:
        raise UsageError("--n is required")
    profile = args.profile
    N = cfg.N
    if profile == "jellium-wiener":
        m = args.m_density if args.m_density is not None else default_density_cutoff(N)
        sigma = make_band_limited_jellium(build_mode_set(N, m), cfg.e, cfg.Z, cfg.beta, cfg.seed)
    elif profile.startswith("char-cube:"):
        try:
            k = int(profile.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"invalid profile {profile!r}") from None
        sigma = make_char_cube_power(k, cfg.e, cfg.Z, N)
    else:
        raise UsageError(f"invalid profile {profile!r} (use jellium-wiener or char-cube:K)")
    out = Path(args.out)
    outputs.append(out)
    save_density(out, sigma)
    outputs.append(_provenance(out, "design-density", cfg))
    jr = check_jellium(sigma, cfg.jellium_tol)
    wr = check_wiener(sigma, N, cfg.m_cut, threads=args.threads)
    print(f"jellium: {'PASS' if jr.passed else 'FAIL'} worst={fmt(jr.worst_violation)}")
    print(f"wiener: {'PASS' if wr.passed else 'FAIL'} d={wr.kernel_dim} min={fmt(wr.global_min)}")
    if args.require_wiener and not wr.passed:
        print("error: density fails the Wiener condition", file=sys.stderr)
        return 1
    return 0


def cmd_check_jellium(args, cfg, outputs) -> int:
    sigma = _density(cfg)
    rep = check_jellium(sigma, cfg.jellium_tol)
    print(
        f"jellium: {'PASS' if rep.passed else 'FAIL'} worst={fmt(rep.worst_violation)} "
        f"worst_k={rep.worst_k} periodization_error={fmt(rep.periodization_error)}"
    )
    return 0 if rep.passed else 1


def cmd_check_wiener(args, cfg, outputs) -> int:
    sigma = _density(cfg)
    N = _lattice_N(cfg, sigma)
    rep = check_wiener(sigma, N, cfg.m_cut, threads=args.threads)
    for theta, lam, kd in zip(rep.thetas, rep.min_eigenvalues, rep.kernel_dims):
        k = np.rint(theta * N / (2 * np.pi)).astype(int)
        print(f"theta_k={k[0]},{k[1]},{k[2]} min_eig={fmt(lam)} kernel={kd}")
    print(f"wiener: {'PASS' if rep.passed else 'FAIL'} d={rep.kernel_dim} min={fmt(rep.global_min)}")
    return 0


def cmd_ground_state(args, cfg, outputs) -> int:
    sigma = _density(cfg)
    N = _lattice_N(cfg, sigma)
    params = _params(cfg, N)
    S = make_ground_state(cfg.alpha, _arrangement(cfg, N), sigma, params, _mode_set(cfg, N), cfg.jellium_tol)
    if args.out:
        out = Path(args.out)
        outputs.append(out)
        save_state(out, S)
        outputs.append(_provenance(out, "ground-state", cfg))
    print(f"E={fmt(energy(S, sigma, params))} Q={fmt(charge(S))}")
    return 0


def _complex_text(z: complex) -> str:
    re, im = z.real + 0.0, z.imag + 0.0
    return f"{re:.17g}{im:+.17g}i"


def cmd_structure_factor(args, cfg, outputs) -> int:
    N = cfg.N if cfg.N is not None else 2
    a = _arrangement(cfg, N)
    print(_complex_text(structure_factor(a, args.xi)))
    if cfg.density is not None:
        rep = verify_flat_density(_density(cfg), a, cfg.jellium_tol)
        print(f"flat_density: {'PASS' if rep.passed else 'FAIL'} residual={fmt(rep.residual)} worst_k={rep.worst_k}")
    return 0


def _initial_state(cfg, sigma, params, N):
    if cfg.state is not None:
        return load_state(cfg.state)
    ms = _mode_set(cfg, N)
    S = make_ground_state(cfg.alpha, _arrangement(cfg, N), sigma, params, ms, cfg.jellium_tol)
    if cfg.delta > 0:
        return perturbed_ground_state(S, sigma, params, cfg.delta, cfg.seed)
    return S


def _integrator(cfg: RunConfig, track: bool) -> IntegratorConfig:
    return IntegratorConfig(
        scheme=cfg.scheme, dt=cfg.dt, t_end=cfg.t_end, picard_tol=cfg.picard_tol,
        picard_max_iters=cfg.picard_max_iters, sample_every=cfg.sample_every, track_manifold=track,
    )


def cmd_evolve(args, cfg, outputs) -> int:
    sigma = _density(cfg)
    N = _lattice_N(cfg, sigma)
    params = _params(cfg, N)
    X0 = _initial_state(cfg, sigma, params, N)
    traj = evolve(X0, sigma, params, _integrator(cfg, cfg.track_manifold))
    out = Path(args.out)
    outputs.append(out)
    write_trajectory_csv(out, traj)
    if args.final_state:
        fs = Path(args.final_state)
        outputs.append(fs)
        save_state(fs, traj.final)
    outputs.append(_provenance(out, "evolve", cfg))
    print(f"max_E_drift={fmt(traj.max_energy_drift)} max_Q_drift={fmt(traj.max_charge_drift)}")
    return 0


def cmd_hessian(args, cfg, outputs) -> int:
    sigma = _density(cfg)
    N = _lattice_N(cfg, sigma)
    params = _params(cfg, N)
    S = make_ground_state(cfg.alpha, IonArrangement.periodic(N, cfg.r), sigma, params, _mode_set(cfg, N), cfg.jellium_tol)
    H = assemble_hessian(S, sigma, params)
    sp = spectrum(H, cfg.kernel_tol)
    nu = constrained_min_eig(H, S, params)
    d = sp.kernel_dim - 5
    summary = f"kernel_dim={sp.kernel_dim} nu={fmt(nu)} d={d}"
    if args.out:
        out = Path(args.out)
        outputs.append(out)
        write_spectrum_csv(out, sp.eigenvalues, sp.kernel_dim, nu, d)
        outputs.append(_provenance(out, "hessian", cfg))
    print(summary)
    return 0


def cmd_stability(args, cfg, outputs) -> int:
    sigma = _density(cfg)
    N = _lattice_N(cfg, sigma)
    params = _params(cfg, N)
    rep = stability_experiment(
        sigma, params, _mode_set(cfg, N), cfg.delta, cfg.t_end,
        _integrator(cfg, True), cfg.seed, cfg.samples,
    )
    out = Path(args.out)
    outputs.append(out)
    write_stability_csv(out, rep)
    outputs.append(_provenance(out, "stability", cfg))
    verdict = "none" if rep.passed is None else ("true" if rep.passed else "false")
    bound = "nan" if math.isnan(rep.bound) else fmt(rep.bound)
    print(f"sup_d={fmt(rep.sup_d)} bound={bound} pass={verdict}")
    return 0 if rep.passed is not False else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jellium", description="Crystal ground states, dynamics and stability on the torus.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, density=True):
        sp.add_argument("--config", help="JSON run configuration; flags override it")
        sp.add_argument("--n", type=int, help="torus period N")
        sp.add_argument("--z", type=float, help="ion valence Z (default 1)")
        sp.add_argument("--e", type=float, help="elementary charge (default 1)")
        sp.add_argument("--mass", type=float, help="ion mass M (default 10)")
        sp.add_argument("--seed", type=int, help="random seed (default 0)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
        sp.add_argument("--tol", type=float, help="Jellium / flat-density tolerance (default 1e-10)")
        if density:
            sp.add_argument("--density", help="density file")

    def field_opts(sp):
        sp.add_argument("--cutoff", type=int, help="Galerkin cutoff m (k.k <= m, default 2)")
        sp.add_argument("--grid", type=lambda s: _triple(s, int), help="collocation grid dims g1,g2,g3")
        sp.add_argument("--alpha", type=float, help="ground-state phase (default 0)")
        sp.add_argument("--r", type=_triple, help="ground-state translation r1,r2,r3")

    sp = sub.add_parser("design-density", help="write a density file and audit it")
    common(sp, density=False)
    sp.add_argument("--profile", required=True, help="jellium-wiener or char-cube:K")
    sp.add_argument("--beta", type=float, help="decay of the designer coefficients (default 0.01)")
    sp.add_argument("--m-density", dest="m_density", type=int, help="band of the designer density")
    sp.add_argument("--m-cut", dest="m_cut", type=int, help="lattice-sum truncation for analytic densities")
    sp.add_argument("--require-wiener", action="store_true", help="exit 1 if the Wiener audit fails")
    sp.add_argument("--out", default="density.json")
    sp.set_defaults(func=cmd_design_density)

    sp = sub.add_parser("check-jellium", help="audit the Jellium condition")
    common(sp)
    sp.set_defaults(func=cmd_check_jellium)

    sp = sub.add_parser("check-wiener", help="scan the Wiener matrix over the Brillouin zone")
    common(sp)
    sp.add_argument("--m-cut", dest="m_cut", type=int)
    sp.set_defaults(func=cmd_check_wiener)

    sp = sub.add_parser("ground-state", help="construct and verify a ground state")
    common(sp)
    field_opts(sp)
    sp.add_argument("--arrangement", help="'periodic' or an arrangement file")
    sp.add_argument("--out", help="state file")
    sp.set_defaults(func=cmd_ground_state)

    sp = sub.add_parser("structure-factor", help="evaluate S(xi) for an ion arrangement")
    common(sp)
    sp.add_argument("--arrangement", default="periodic", help="'periodic' or an arrangement file")
    sp.add_argument("--r", type=_triple, help="translation for the periodic arrangement")
    sp.add_argument("--xi", type=lambda s: _triple(s, int), required=True, help="dual vector in k units k1,k2,k3")
    sp.set_defaults(func=cmd_structure_factor)

    sp = sub.add_parser("evolve", help="integrate the dynamics and write a trajectory CSV")
    common(sp)
    field_opts(sp)
    sp.add_argument("--state", help="initial state file (default: ground state)")
    sp.add_argument("--arrangement", help="'periodic' or an arrangement file")
    sp.add_argument("--delta", type=float, help="size of a random normal perturbation of the ground state")
    sp.add_argument("--scheme", choices=["strang", "picard"])
    sp.add_argument("--dt", type=float)
    sp.add_argument("--t-end", dest="t_end", type=float)
    sp.add_argument("--sample-every", dest="sample_every", type=int)
    sp.add_argument("--picard-tol", dest="picard_tol", type=float)
    sp.add_argument("--picard-max-iters", dest="picard_max_iters", type=int)
    sp.add_argument("--track-manifold", dest="track_manifold", action="store_true")
    sp.add_argument("--final-state", dest="final_state")
    sp.add_argument("--out", default="trajectory.csv")
    sp.set_defaults(func=cmd_evolve)

    sp = sub.add_parser("hessian", help="assemble E'' at a ground state and report its spectrum")
    common(sp)
    field_opts(sp)
    sp.add_argument("--kernel-tol", dest="kernel_tol", type=float)
    sp.add_argument("--out", help="spectrum CSV")
    sp.set_defaults(func=cmd_hessian)

    sp = sub.add_parser("stability", help="orbital stability experiment")
    common(sp)
    field_opts(sp)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--scheme", choices=["strang", "picard"])
    sp.add_argument("--dt", type=float)
    sp.add_argument("--t-end", dest="t_end", type=float)
    sp.add_argument("--sample-every", dest="sample_every", type=int)
    sp.add_argument("--out", default="stability.csv")
    sp.set_defaults(func=cmd_stability)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    outputs: list[Path] = []
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg, outputs)
    except UsageError as exc:
        for path in outputs:
            path.unlink(missing_ok=True)
        parser.error(str(exc))
    except (JelliumError, ValueError, KeyError, OSError) as exc:
        for path in outputs:
            path.unlink(missing_ok=True)
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
