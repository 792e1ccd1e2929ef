"""Command-line entry point ``abeltorsion``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from math import comb
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import AbelTorsionError, ComputationError, ValidationError, VerificationError
from .spectral import (
    SpectrumTable,
    cutoff_for_lines,
    enumerate_spectrum,
    hermitian_eigen,
    is_degenerate,
    pq_spectrum,
)
from .torus_model import TorusBundle, chern_data, load_bundle

TOLERANCE_ENV = "ABELTORSION_TOLERANCE"
MIN_LINES = 30
MIN_GRID = 16

EXIT_OK, EXIT_VALIDATION, EXIT_COMPUTATION, EXIT_VERIFICATION = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    command: str
    bundle_path: Path | None = None
    cutoff: float | None = None
    grid: tuple[int, ...] | None = None
    output_format: str = "json"
    tolerance: float | None = None

    def __post_init__(self):
        if self.cutoff is not None and not self.cutoff > 0:
            raise ValidationError("cutoff must be positive")
        if self.grid is not None and min(self.grid) < MIN_GRID:
            raise ValidationError(f"grid sizes must be at least {MIN_GRID}")


# ----------------------------------------------------------------------------
# deterministic serialization


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    return obj


def _emit(obj: Any, indent: int) -> str:
    pad, inner = " " * indent, " " * (indent + 2)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {_emit(v, indent + 2)}" for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_emit(v, indent) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _emit(v, indent + 2) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, float):
        return "%.12e" % obj if math.isfinite(obj) else "null"
    return json.dumps(obj)


def dumps(obj: Any) -> str:
    """JSON with sorted keys and every float written as ``%.12e``."""
    return _emit(_plain(obj), 0)


# ----------------------------------------------------------------------------
# reports


def table_report(table: SpectrumTable) -> dict:
    return {
        "cutoff": table.cutoff,
        "n": table.n,
        "lines": [{"lambda": l.lam, "dims": list(l.dims)} for l in table.lines],
        "warnings": list(table.warnings),
    }


def table_tsv(table: SpectrumTable) -> str:
    return "".join("%.12e\t%s\n" % (l.lam, "\t".join(str(d) for d in l.dims)) for l in table.lines)


def _default_cutoff(bundle: TorusBundle) -> float:
    if not is_degenerate(bundle):
        return cutoff_for_lines(hermitian_eigen(bundle), MIN_LINES)
    from .degenerate import degenerate_spectrum

    cutoff = 20.0
    while len(degenerate_spectrum(bundle, cutoff)[1]) < MIN_LINES:
        cutoff *= 2.0
    return cutoff


def spectrum_of(bundle: TorusBundle, cutoff: float | None) -> SpectrumTable:
    cutoff = _default_cutoff(bundle) if cutoff is None else cutoff
    if is_degenerate(bundle):
        from .degenerate import degenerate_spectrum

        return degenerate_spectrum(bundle, cutoff)[1]
    return enumerate_spectrum(hermitian_eigen(bundle), cutoff)


def validate_report(bundle: TorusBundle) -> dict:
    from .spectral import generalized_eigenvalues
    from .torus_model import euler_characteristic

    mu = np.sort(generalized_eigenvalues(bundle))
    report = {
        "n": bundle.n,
        "mu": mu,
        "E": chern_data(bundle).E_on_lattice,
        "degenerate": is_degenerate(bundle),
        "valid": True,
    }
    if not report["degenerate"]:
        eigen = hermitian_eigen(bundle)
        report.update(chi=eigen.chi, p=eigen.p, volume=eigen.vol)
    else:
        report["chi"] = euler_characteristic(bundle, mu)
    return report


def torsion_report(bundle: TorusBundle) -> dict:
    from .torsion import bost_torsion, torsion_closed_form, verify_identities

    n = bundle.n
    table = spectrum_of(bundle, None)
    if is_degenerate(bundle):
        from .degenerate import decompose, degenerate_torsion

        result = degenerate_torsion(*decompose(bundle))
        bost = None
    else:
        eigen = hermitian_eigen(bundle)
        result = torsion_closed_form(eigen)
        bost = bost_torsion(eigen) if eigen.p == 0 else None
    return {
        "log_t0": result.log_t0,
        "t0": result.t0,
        "method": result.method,
        "bost": bost,
        "t_p": [math.exp(comb(n, q) * result.log_t0) for q in range(n + 1)],
        "identity_report": verify_identities(table),
        "details": result.details,
    }


def flat_report(bundle: TorusBundle, cutoff: float | None, with_torsion: bool) -> dict:
    from .degenerate import decompose, degenerate_spectrum, degenerate_torsion

    flat, quotient = decompose(bundle)
    cutoff = _default_cutoff(bundle) if cutoff is None else cutoff
    _, table = degenerate_spectrum(bundle, cutoff)
    report = {
        "kernel_dimension": flat.n_prime,
        "U_prime_generators": flat.U_prime_coeffs,
        "ell_alpha": flat.ell_alpha,
        "ell_alpha_coeffs": flat.ell_alpha_coeffs,
        "trivial_P": flat.trivial_P,
        "spectrum": table_report(table),
    }
    if with_torsion:
        result = degenerate_torsion(flat, quotient)
        report["torsion"] = {"log_t0": result.log_t0, "t0": result.t0, "details": result.details}
    return report


def elliptic_report(tau: complex, zhat: complex, with_oracle: bool) -> dict:
    from .elliptic import epstein_regdet, flat_data_for, ray_singer_torsion

    result = ray_singer_torsion(tau, zhat)
    report = {"tau": tau, "zhat": zhat, "log_t0": result.log_t0, "t0": result.t0}
    if with_oracle:
        oracle = epstein_regdet(flat_data_for(tau, zhat))
        report["epstein"] = {"log_t0": oracle.log_t0, "t0": oracle.t0,
                             "log_difference": result.log_t0 - oracle.log_t0}
    return report


def oracle_report(bundle: TorusBundle, grid, levels: int) -> dict:
    from .oracle import compare_with_theory

    K = max(levels * (8 if is_degenerate(bundle) else 4 * abs(hermitian_eigen(bundle).chi)) + 4, 8)
    return compare_with_theory(bundle, grid, K=K, levels=levels)


# ----------------------------------------------------------------------------
# argument parsing


def _pair(text: str) -> complex:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers")
    try:
        return complex(float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _grid(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abeltorsion",
                                     description="Spectra and analytic torsion of line bundles on flat tori.")
    parser.add_argument("--tolerance", type=float, default=None,
                        help=f"validation tolerance (overrides ${TOLERANCE_ENV} and the file)")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_bundle(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("bundle", type=Path)
        return p

    with_bundle("validate", "check a bundle file and print its invariants")

    p = with_bundle("spectrum", "eigenvalues with per-degree multiplicities")
    p.add_argument("--cutoff", type=float)
    p.add_argument("--pq", type=int, default=0, help="holomorphic degree p of (p, q)-forms")
    p.add_argument("--format", choices=("json", "tsv"), default="json")

    with_bundle("torsion", "analytic torsion and identity report")

    p = with_bundle("flat", "kernel decomposition of a degenerate bundle")
    p.add_argument("--cutoff", type=float)
    p.add_argument("--torsion", action="store_true")

    p = sub.add_parser("elliptic", help="torsion of a flat bundle on an elliptic curve")
    p.add_argument("--tau", type=_pair, required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--zhat", type=_pair)
    group.add_argument("--alpha", type=_pair, help="phases a1,a2 on the generators 1, tau")
    p.add_argument("--oracle", action="store_true")

    p = with_bundle("oracle", "finite-difference check of the scalar spectrum (n = 1)")
    p.add_argument("--grid", type=_grid, default=None)
    p.add_argument("--levels", type=int, default=3)

    p = with_bundle("verify", "run every cross-check")
    p.add_argument("--cutoff", type=float)
    p.add_argument("--grid", type=_grid, default=None)
    p.add_argument("--no-oracle", action="store_true")
    return parser


def _tolerance(args) -> float | None:
    if args.tolerance is not None:
        return args.tolerance
    env = os.environ.get(TOLERANCE_ENV)
    if env:
        try:
            return float(env)
        except ValueError as exc:
            raise ValidationError(f"{TOLERANCE_ENV}={env!r} is not a number") from exc
    return None


def config_from_args(args) -> RunConfig:
    return RunConfig(
        command=args.command,
        bundle_path=getattr(args, "bundle", None),
        cutoff=getattr(args, "cutoff", None),
        grid=getattr(args, "grid", None),
        output_format=getattr(args, "format", "json"),
        tolerance=_tolerance(args),
    )


def _load(config: RunConfig) -> TorusBundle:
    try:
        return load_bundle(config.bundle_path, config.tolerance)
    except (OSError, ValueError) as exc:
        # missing files and undecodable JSON/TOML are input errors
        if isinstance(exc, AbelTorsionError):
            raise
        raise ValidationError(f"cannot read {config.bundle_path}: {exc}") from exc


def dispatch(config: RunConfig, args) -> tuple[int, str]:
    from .oracle import DEFAULT_GRID

    cmd = config.command
    if cmd == "elliptic":
        tau = args.tau
        if args.alpha is not None:
            from .elliptic import zhat_from_phases

            zhat = zhat_from_phases(tau, args.alpha.real, args.alpha.imag)
        else:
            zhat = args.zhat
        return EXIT_OK, dumps(elliptic_report(tau, zhat, args.oracle))

    bundle = _load(config)
    if cmd == "validate":
        return EXIT_OK, dumps(validate_report(bundle))
    if cmd == "spectrum":
        table = pq_spectrum(spectrum_of(bundle, config.cutoff), args.pq)
        if config.output_format == "tsv":
            return EXIT_OK, table_tsv(table).rstrip("\n")
        return EXIT_OK, dumps(table_report(table))
    if cmd == "torsion":
        return EXIT_OK, dumps(torsion_report(bundle))
    if cmd == "flat":
        return EXIT_OK, dumps(flat_report(bundle, config.cutoff, args.torsion))
    if cmd == "oracle":
        report = oracle_report(bundle, config.grid or DEFAULT_GRID, args.levels)
        return (EXIT_OK if report["pass"] else EXIT_VERIFICATION), dumps(report)
    if cmd == "verify":
        from .verify import run_checks

        checks = run_checks(bundle, config.cutoff, config.grid, oracle=not args.no_oracle)
        passed = all(c.passed for c in checks)
        report = {"pass": passed,
                  "checks": [{"name": c.name, "pass": c.passed, "detail": c.detail} for c in checks]}
        return (EXIT_OK if passed else EXIT_VERIFICATION), dumps(report)
    raise ValidationError(f"unknown command {cmd!r}")


def exit_code_for(exc: AbelTorsionError) -> int:
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, VerificationError):
        return EXIT_VERIFICATION
    if isinstance(exc, ComputationError):
        return EXIT_COMPUTATION
    return EXIT_COMPUTATION


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors are input errors; --help exits 0
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        status, text = dispatch(config_from_args(args), args)
    except AbelTorsionError as exc:
        print(dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return exit_code_for(exc)
    print(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
