"""``dfrt`` command-line front end.

Every subcommand that writes a file also writes ``<out>.manifest.json``
recording the resolved parameters, input hashes, tool version and wall
time. Exit status is 0 on success, 1 for invalid input and 2 for numerical
failures (blow-up, infeasible constraints); failures print one JSON line
on standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .basis import build_basis, build_mode_set, fd_divergence
from .cohomology import CoboundaryConfig, coboundary, nilpotency_residual
from .dynamics import (
    INTEGRATORS,
    CouplingTensor,
    SimulationConfig,
    cached_coupling_tensor,
    integrate,
)
from .entropy import LAMBDA_KINDS, maxent_solve, modal_spectrum, shell_lambdas
from .entropy import decay_class_report
from .errors import DFRTError, FeasibilityError, NumericalFailure
from .io import (
    file_sha256,
    read_coeffs_csv,
    read_field_csv,
    read_points_csv,
    read_trajectory_csv,
    write_coeffs_csv,
    write_field_csv,
    write_json,
    write_rows_csv,
    write_trajectory_csv,
    check_field_on_grid,
)
from .special_fn import spherical_bessel_j, spherical_bessel_zeros, spherical_harmonic, surface_gradient_Y
from .transform import (
    CoefficientVector,
    SampledField,
    build_grid,
    forward_transform,
    gram_matrix,
    inner_product,
    inverse_transform,
    real_field_projection,
)
from .wigner import (
    clebsch_gordan,
    exact_clebsch_gordan,
    exact_wigner_3j,
    exact_wigner_6j,
    wigner_3j,
    wigner_6j,
)

__all__ = ["main", "load_config", "SimulationSettings", "RunManifest", "initial_coefficients"]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class UsageError(DFRTError, ValueError):
    """Bad command line."""


class BlowUp(NumericalFailure):
    """Integration produced a non-finite state."""


# ---------------------------------------------------------------------------
# Configuration

_MODE_COEFF = {
    "type": "object",
    "properties": {
        "ell": {"type": "integer", "minimum": 1},
        "m": {"type": "integer"},
        "n": {"type": "integer", "minimum": 1},
        "re": {"type": "number"},
        "im": {"type": "number"},
    },
    "required": ["ell", "m", "n", "re"],
    "additionalProperties": False,
}

SIM_SCHEMA = {
    "type": "object",
    "properties": {
        "nu": {"type": "number", "minimum": 0},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "t_end": {"type": "number", "exclusiveMinimum": 0},
        "integrator": {"enum": list(INTEGRATORS)},
        "real_field": {"type": "boolean"},
        "initial": {
            "type": "object",
            "properties": {
                "mode_coeffs": {"type": "array", "items": _MODE_COEFF, "minItems": 1},
                "random_seed": {"type": "integer", "minimum": 0},
                "amplitude": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
            "oneOf": [
                {"required": ["mode_coeffs"], "not": {"anyOf": [{"required": ["random_seed"]}, {"required": ["amplitude"]}]}},
                {"required": ["random_seed"], "not": {"required": ["mode_coeffs"]}},
            ],
        },
    },
    "required": ["nu", "dt", "t_end"],
    "additionalProperties": False,
}

DEFAULT_INITIAL = {"random_seed": 0, "amplitude": 0.1}


@dataclass(frozen=True)
class SimulationSettings:
    nu: float
    dt: float
    t_end: float
    integrator: str = "rk4_exponential"
    real_field: bool = True
    initial: dict = field(default_factory=lambda: dict(DEFAULT_INITIAL))


def _schema_error(err: jsonschema.ValidationError) -> str:
    where = ".".join(str(p) for p in err.absolute_path) or "<root>"
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        return f"unknown key {extra[0]!r} in {where}"
    if err.validator == "oneOf" and where.endswith("initial"):
        return "key 'initial' needs either mode_coeffs or random_seed (with optional amplitude)"
    return f"invalid value for key {where!r}: {err.message}"


def load_config(path) -> SimulationSettings:
    """Read and strictly validate a simulation config; unknown keys are rejected."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON ({exc})") from None
    return validate_config(raw)


def validate_config(raw) -> SimulationSettings:
    validator = jsonschema.Draft202012Validator(SIM_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: (len(e.absolute_path), list(e.absolute_path)))
    if errors:
        raise UsageError(_schema_error(errors[0]))
    initial = dict(raw.get("initial", DEFAULT_INITIAL))
    if "random_seed" in initial:
        initial.setdefault("amplitude", DEFAULT_INITIAL["amplitude"])
    if raw["t_end"] < raw["dt"]:
        raise UsageError("invalid value for key 't_end': must be at least dt")
    return SimulationSettings(
        nu=float(raw["nu"]),
        dt=float(raw["dt"]),
        t_end=float(raw["t_end"]),
        integrator=raw.get("integrator", "rk4_exponential"),
        real_field=raw.get("real_field", True),
        initial=initial,
    )


def initial_coefficients(settings: SimulationSettings, mode_set) -> CoefficientVector:
    """Explicit coefficients, or a seeded Philox draw rescaled to ``amplitude`` in norm."""
    init = settings.initial
    if "mode_coeffs" in init:
        values = np.zeros(len(mode_set), dtype=complex)
        for entry in init["mode_coeffs"]:
            key = (entry["ell"], entry["m"], entry["n"])
            values[mode_set.index(key)] += complex(entry["re"], entry.get("im", 0.0))
        return CoefficientVector(mode_set, values)
    rng = np.random.Generator(np.random.Philox(init["random_seed"]))
    values = rng.standard_normal(len(mode_set)) + 1j * rng.standard_normal(len(mode_set))
    if settings.real_field:
        values = real_field_projection(mode_set, values)
    values *= init["amplitude"] / np.linalg.norm(values)
    return CoefficientVector(mode_set, values)


# ---------------------------------------------------------------------------
# Manifest


@dataclass
class RunManifest:
    subcommand: str
    parameters: dict
    inputs: dict
    outputs: list
    version: str = __version__
    cache_hashes: dict = field(default_factory=dict)
    duration_s: float = 0.0

    def write(self, primary) -> Path:
        path = Path(str(primary) + ".manifest.json")
        return write_json(path, asdict(self))


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


# ---------------------------------------------------------------------------
# Argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _int_triple(text):
    try:
        parts = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated integers, got {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated integers, got {text!r}")
    return parts


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="worker thread cap (default 1)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = _Parser(prog="dfrt", description="Divergence-free beam transforms, spectral couplings and modal dynamics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="SUBCOMMAND")
    sub.required = True

    p = sub.add_parser("special", parents=[common], help="spot-evaluate special functions")
    p.add_argument("function", choices=["bessel", "zeros", "ylm", "grad-ylm"])
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--x", type=float, nargs="+", default=[1.0], help="arguments of j_ell")
    p.add_argument("--count", type=int, default=5, help="number of zeros")
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--out", type=Path, help="also write the JSON result here")

    p = sub.add_parser("wigner", parents=[common], help="3j/6j/Clebsch-Gordan value, decimal and exact")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--3j", dest="three_j", type=int, nargs=6, metavar=("J1", "J2", "J3", "M1", "M2", "M3"))
    group.add_argument("--6j", dest="six_j", type=int, nargs=6, metavar=("J1", "J2", "J3", "J4", "J5", "J6"))
    group.add_argument("--cg", type=int, nargs=6, metavar=("J1", "M1", "J2", "M2", "J3", "M3"))
    p.add_argument("--out", type=Path, help="also write the JSON result here")

    p = sub.add_parser("basis-table", parents=[common], help="CSV of ell,m,n,alpha,norm,lambda")
    _truncation_args(p)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("transform", parents=[common], help="field CSV -> coefficient CSV")
    p.add_argument("--field", type=Path, required=True)
    _truncation_args(p)
    p.add_argument("--grid", type=_int_triple, help="n_r,n_theta,n_phi when the field has no grid sidecar")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("reconstruct", parents=[common], help="coefficients + points -> field CSV")
    p.add_argument("--coeffs", type=Path, required=True)
    p.add_argument("--points", type=Path, required=True)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("verify", parents=[common], help="Gram, Parseval and divergence report for a field")
    p.add_argument("--field", type=Path, required=True)
    _truncation_args(p)
    p.add_argument("--grid", type=_int_triple)
    p.add_argument("--out", type=Path, help="also write the JSON report here")

    p = sub.add_parser("coboundary", parents=[common], help="apply the spectral coboundary")
    p.add_argument("--coeffs", type=Path, required=True)
    p.add_argument("--spins", type=_int_triple, default=(1, 1, 1))
    p.add_argument("--kernel", choices=["unit", "overlap"], default="overlap")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--report", type=Path)

    p = sub.add_parser("coupling", parents=[common], help="compute (or load from cache) the coupling tensor")
    _truncation_args(p)
    p.add_argument("--grid", type=_int_triple)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("simulate", parents=[common], help="integrate the modal system")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--gamma", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("spectrum", parents=[common], help="per-shell energy spectrum of coefficients")
    p.add_argument("--coeffs", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("maxent", parents=[common], help="maximum-entropy shell distribution")
    p.add_argument("--lambda", dest="lambda_kind", choices=LAMBDA_KINDS, default="ell2")
    p.add_argument("--C", type=float, required=True)
    p.add_argument("--lmax", type=int, required=True)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("decay-report", parents=[common], help="decay-profile fit along a trajectory")
    p.add_argument("--traj", type=Path, required=True)
    p.add_argument("--mu-min", type=float, required=True)
    p.add_argument("--r2-min", type=float, default=0.9)
    p.add_argument("--out", type=Path, required=True)
    return parser


def _truncation_args(p):
    p.add_argument("--lmax", type=int, required=True)
    p.add_argument("--nmax", type=int, required=True)
    p.add_argument("--radius", type=float, default=1.0)


# ---------------------------------------------------------------------------
# Subcommands. Each returns (primary output path or None, JSON payload or None,
# {input path: hash}, {cache: hash}).


def _cmd_special(args):
    if args.function == "bessel":
        result = {"ell": args.ell, "x": args.x, "j": [float(spherical_bessel_j(args.ell, x)) for x in args.x]}
    elif args.function == "zeros":
        result = {"ell": args.ell, "zeros": [float(z) for z in spherical_bessel_zeros(args.ell, args.count)]}
    elif args.function == "ylm":
        y = spherical_harmonic(args.ell, args.m, args.theta, args.phi)
        result = {"ell": args.ell, "m": args.m, "theta": args.theta, "phi": args.phi, "re": y.real, "im": y.imag}
    else:
        g = surface_gradient_Y(args.ell, args.m, args.theta, args.phi)
        result = {
            "ell": args.ell, "m": args.m, "theta": args.theta, "phi": args.phi,
            "theta_re": g.comp_theta.real, "theta_im": g.comp_theta.imag,
            "phi_re": g.comp_phi.real, "phi_im": g.comp_phi.imag,
        }
    return _emit_json(args, result), {}, {}


def _cmd_wigner(args):
    if args.three_j:
        a = args.three_j
        label = "3j({} {} {}; {} {} {})".format(*a)
        value, exact = wigner_3j(*a), exact_wigner_3j(*a)
    elif args.six_j:
        a = args.six_j
        label = "6j{{{} {} {}; {} {} {}}}".format(*a)
        value, exact = wigner_6j(*a), exact_wigner_6j(*a)
    else:
        a = args.cg
        label = "CG({} {}, {} {} | {} {})".format(*a)
        value, exact = clebsch_gordan(*a), exact_clebsch_gordan(*a)
    print(f"{label} = {value!r}")
    print(f"exact = {exact}")
    if args.out:
        write_json(args.out, {"symbol": label, "value": value, "exact": str(exact)})
    return args.out, {}, {}


def _emit_json(args, payload):
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if getattr(args, "out", None):
        write_json(args.out, payload)
        return args.out
    return None


def _cmd_basis_table(args):
    basis = build_basis(build_mode_set(args.lmax, args.nmax, args.radius))
    rows = (
        (md.ell, md.m, md.n, basis.alphas[md.ell, md.n], basis.norms[md.ell, md.n], lam)
        for md, lam in zip(basis.mode_set.modes, basis.eigenvalues())
    )
    write_rows_csv(args.out, ["ell", "m", "n", "alpha", "norm", "lambda"], rows)
    return args.out, {}, {}


def _field_with_grid(args):
    points, values, grid = read_field_csv(args.field)
    if grid is None:
        if args.grid is None:
            raise UsageError(f"{args.field} has no grid sidecar; pass --grid n_r,n_theta,n_phi")
        grid = build_grid(*args.grid, args.radius)
        check_field_on_grid(points, grid, args.field)
    elif args.grid is not None and tuple(args.grid) != grid.shape:
        raise UsageError(f"--grid {args.grid} disagrees with the sidecar grid {grid.shape}")
    if not math.isclose(grid.radius, args.radius):
        log.info("using sidecar radius %g", grid.radius)
    return SampledField.from_grid(values, grid), grid


def _cmd_transform(args):
    field_, grid = _field_with_grid(args)
    basis = build_basis(build_mode_set(args.lmax, args.nmax, grid.radius))
    coeffs = forward_transform(field_, basis, grid)
    write_coeffs_csv(args.out, coeffs)
    return args.out, {str(args.field): file_sha256(args.field)}, {}


def _cmd_reconstruct(args):
    coeffs = read_coeffs_csv(args.coeffs, args.radius)
    basis = build_basis(coeffs.mode_set)
    points = read_points_csv(args.points)
    values = inverse_transform(coeffs, basis, points)
    write_field_csv(args.out, points, values)
    inputs = {str(p): file_sha256(p) for p in (args.coeffs, args.points)}
    return args.out, inputs, {}


def _cmd_verify(args):
    field_, grid = _field_with_grid(args)
    basis = build_basis(build_mode_set(args.lmax, args.nmax, grid.radius))
    gram = gram_matrix(basis, grid)
    offdiag = np.abs(gram - np.diag(np.diag(gram)))
    coeffs = forward_transform(field_, basis, grid)
    physical = inner_product(field_, field_, grid).real
    spectral = coeffs.norm_sq()
    gap = abs(physical - spectral) / physical if physical > 0 else 0.0

    # divergence of the truncated synthesis at interior nodes, relative to max |u|
    interior = grid.points[np.linalg.norm(grid.points, axis=1) < 0.95 * grid.radius]
    synth = inverse_transform(coeffs, basis, interior)
    scale = float(np.max(np.abs(synth))) if synth.size else 0.0

    def evaluator(p):
        return inverse_transform(coeffs, basis, p)

    div = np.abs(fd_divergence(evaluator, interior, 1e-4 * grid.radius)) if interior.size else np.zeros(0)
    report = {
        "gram_max_offdiag": float(offdiag.max()),
        "gram_max_diag_error": float(np.max(np.abs(np.diag(gram) - 1.0))),
        "parseval_gap": gap,
        "div_max": float(div.max() / scale) if scale > 0 else 0.0,
        "norm_sq_physical": physical,
        "norm_sq_spectral": spectral,
        "l_max": args.lmax,
        "n_max": args.nmax,
        "grid": grid.spec(),
    }
    return _emit_json(args, report), {str(args.field): file_sha256(args.field)}, {}


def _cmd_coboundary(args):
    coeffs = read_coeffs_csv(args.coeffs, args.radius)
    basis = build_basis(coeffs.mode_set)
    config = CoboundaryConfig(coeffs.mode_set, args.spins, args.kernel)
    delta = coboundary(coeffs, config, basis)
    write_coeffs_csv(args.out, delta)
    if args.report:
        write_json(args.report, nilpotency_residual(coeffs, config, basis))
    return args.out, {str(args.coeffs): file_sha256(args.coeffs)}, {}


def _cmd_coupling(args):
    basis = build_basis(build_mode_set(args.lmax, args.nmax, args.radius))
    grid = build_grid(*args.grid, args.radius) if args.grid else None
    tensor = cached_coupling_tensor(basis, grid, threads=args.threads)
    sidecar = tensor.save(args.out)
    side = json.loads(sidecar.read_text())
    if side.get("warning"):
        log.warning(side["warning"])
    return args.out, {}, {"gamma": side["hash"]}


def _cmd_simulate(args):
    settings = load_config(args.config)
    tensor = CouplingTensor.load(args.gamma)
    basis = build_basis(tensor.mode_set)
    init = initial_coefficients(settings, tensor.mode_set)
    config = SimulationConfig(
        settings.nu, settings.dt, settings.t_end, init, settings.integrator, settings.real_field
    )
    traj = integrate(config, tensor, basis)
    write_trajectory_csv(args.out, traj)
    inputs = {str(p): file_sha256(p) for p in (args.config, args.gamma)}
    args.resolved_config = asdict(settings)
    if traj.status != "ok":
        _write_manifest(args, args.out, inputs, {"gamma": tensor.content_hash()}, 0.0)
        raise BlowUp(f"non-finite state at t={traj.blowup_time:g}; trajectory up to the last finite step in {args.out}")
    return args.out, inputs, {"gamma": tensor.content_hash()}


def _cmd_spectrum(args):
    coeffs = read_coeffs_csv(args.coeffs)
    spec = modal_spectrum(coeffs, coeffs.mode_set)
    if spec.zero_energy:
        log.warning("zero total energy; P column is 0 by convention")
    write_rows_csv(args.out, ["ell", "E", "P"], zip(spec.ell_values, spec.E_ell, spec.P_ell))
    return args.out, {str(args.coeffs): file_sha256(args.coeffs)}, {}


def _cmd_maxent(args):
    if args.lmax < 2:
        raise UsageError("--lmax must be at least 2")
    lam = shell_lambdas(args.lmax, args.lambda_kind, args.radius)
    ells = list(range(1, args.lmax + 1))
    sol = maxent_solve(lam, args.C, ells)
    payload = {
        "A": sol.A,
        "mu": sol.mu,
        "beta": sol.beta,
        "alpha_minus_1": sol.alpha_minus_1,
        "constraint_residuals": list(sol.constraint_residuals),
        "C": sol.C,
        "lambda_kind": args.lambda_kind,
        "ell": ells,
        "lambda": sol.lambdas.tolist(),
        "P": sol.P.tolist(),
        "max_stationarity_residual": float(sol.stationarity_residual().max()),
    }
    return _emit_json(args, payload), {}, {}


def _cmd_decay_report(args):
    traj = read_trajectory_csv(args.traj)
    rows = decay_class_report(traj, traj.mode_set, args.mu_min, args.r2_min)
    write_rows_csv(
        args.out,
        ["t", "mu", "r_squared", "satisfies", "status"],
        ((r["t"], r["mu"], r["r_squared"], r["satisfies"], r["status"]) for r in rows),
    )
    return args.out, {str(args.traj): file_sha256(args.traj)}, {}


_COMMANDS = {
    "special": _cmd_special,
    "wigner": _cmd_wigner,
    "basis-table": _cmd_basis_table,
    "transform": _cmd_transform,
    "reconstruct": _cmd_reconstruct,
    "verify": _cmd_verify,
    "coboundary": _cmd_coboundary,
    "coupling": _cmd_coupling,
    "simulate": _cmd_simulate,
    "spectrum": _cmd_spectrum,
    "maxent": _cmd_maxent,
    "decay-report": _cmd_decay_report,
}


def _write_manifest(args, primary, inputs, caches, duration):
    params = {
        k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("verbose",)
    }
    outputs = [str(primary)]
    if getattr(args, "report", None):
        outputs.append(str(args.report))
    RunManifest(args.command, params, inputs, outputs, cache_hashes=caches, duration_s=duration).write(primary)


def _fail(exc, code):
    payload = {"error": type(exc).__name__, "message": str(exc).splitlines()[0] if str(exc) else "", "exit_code": code}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail(exc, EXIT_INVALID)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    start = time.perf_counter()
    try:
        primary, inputs, caches = _COMMANDS[args.command](args)
    except (FeasibilityError, NumericalFailure, FloatingPointError) as exc:
        return _fail(exc, EXIT_NUMERICAL)
    except (ValueError, IndexError, KeyError, OSError) as exc:
        return _fail(exc, EXIT_INVALID)
    if primary is not None:
        _write_manifest(args, primary, inputs, caches, time.perf_counter() - start)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
