"""Cross-check suite run by ``abeltorsion verify``."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AbelTorsionError
from .spectral import (
    cutoff_for_lines,
    delta_bar_spectrum,
    enumerate_spectrum,
    hermitian_eigen,
    is_degenerate,
)
from .torsion import (
    bost_torsion,
    torsion_closed_form,
    torsion_via_zeta,
    verify_identities,
    zeta_expression,
)
from .torus_model import TorusBundle


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


def sets_match(a, b, rel: float = 1e-9) -> bool:
    """Sorted float sequences equal element by element within ``rel``."""
    if len(a) != len(b):
        return False
    return all(abs(x - y) <= rel * max(1.0, abs(x), abs(y)) for x, y in zip(a, b))


def oscillator_matches(eigen, cutoff: float) -> bool:
    from .oracle import oscillator_spectrum

    # compare strictly below the cutoff so boundary rounding cannot matter
    inner = cutoff * (1 - 1e-7)
    osc = [v for v in oscillator_spectrum(eigen, cutoff) if v <= inner]
    thm = [v for v in delta_bar_spectrum(eigen, cutoff) if v <= inner]
    return sets_match(osc, thm)


def sublattice_matches_brute_force(bundle: TorusBundle, flat, box: int = 5) -> dict:
    """Compare ``U'`` with a float search for lattice points in ``Ker H``.

    Every coefficient vector in ``[-box, box]^{2n}`` whose lattice point is
    annihilated by ``H`` must be an integer combination of the ``U'``
    generators, and every such combination inside the box must be found.
    """
    rank = bundle.rank
    H = bundle.form_H
    scale = max(1.0, float(np.max(np.abs(H)))) * max(1.0, float(np.max(np.abs(bundle.lattice))))
    tol = 1e-7 * scale
    HU = bundle.lattice @ H.T  # row j: H u_j
    found = set()
    for m in itertools.product(range(-box, box + 1), repeat=rank):
        if np.max(np.abs(np.asarray(m, float) @ HU)) < tol:
            found.add(m)
    K = flat.U_prime_coeffs.T  # (2n, 2n')
    pinv = np.linalg.pinv(K.astype(float))
    bound = int(math.ceil(np.max(np.abs(pinv).sum(axis=1)) * box)) + 1
    spanned = set()
    for c in itertools.product(range(-bound, bound + 1), repeat=K.shape[1]):
        m = K @ np.asarray(c, dtype=np.int64)
        if np.all(np.abs(m) <= box):
            spanned.add(tuple(int(x) for x in m))
    return {"box": box, "found": len(found), "spanned": len(spanned), "equal": found == spanned}


def flat_residuals(flat) -> dict:
    U, D = flat.U_prime, flat.dual_basis
    pair = (np.conj(U) @ D.T).imag  # [j, k] = Im g(v_k, u_j)
    dual_res = float(np.max(np.abs(pair - np.eye(pair.shape[0]))))
    phase = (np.conj(U) @ flat.ell_alpha).imag
    target = np.exp(2j * np.pi * np.asarray(flat.alpha_on_U_prime))
    eq10 = float(np.max(np.abs(np.exp(2j * np.pi * phase) - target)))
    return {"dual_residual": dual_res, "character_residual": eq10}


def run_checks(bundle: TorusBundle, cutoff: float | None = None, grid=None,
               oracle: bool = True, min_lines: int = 30) -> list[Check]:
    checks: list[Check] = []

    def attempt(name, fn):
        try:
            passed, detail = fn()
        except AbelTorsionError as exc:
            passed, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
        checks.append(Check(name, bool(passed), detail))

    if is_degenerate(bundle):
        _degenerate_checks(bundle, cutoff, grid, oracle, attempt)
        return checks

    eigen = hermitian_eigen(bundle)
    if cutoff is None:
        cutoff = cutoff_for_lines(eigen, min_lines)
    table = enumerate_spectrum(eigen, cutoff)
    attempt("identities", lambda: (True, verify_identities(table)))
    attempt("oscillator", lambda: (oscillator_matches(eigen, cutoff), {"cutoff": cutoff}))

    def torsion_paths():
        a = torsion_closed_form(eigen).log_t0
        b = torsion_via_zeta(zeta_expression(eigen)).log_t0
        ok = math.isclose(math.exp(a), math.exp(b), rel_tol=1e-12)
        return ok, {"closed_form": a, "zeta_path": b}

    attempt("torsion_paths", torsion_paths)
    if eigen.p == 0:
        attempt("bost", lambda: (True, {"bost": bost_torsion(eigen)}))
    if oracle and bundle.n == 1:
        _oracle_check(bundle, grid, attempt)
    return checks


def _oracle_check(bundle, grid, attempt):
    from .oracle import DEFAULT_GRID, compare_with_theory

    def run():
        report = compare_with_theory(bundle, grid or DEFAULT_GRID, K=_levels_budget(bundle),
                                     levels=3)
        return report["pass"], {"levels": report["levels"], "fitted_order": report["fitted_order"]}

    attempt("oracle", run)


def _levels_budget(bundle) -> int:
    if is_degenerate(bundle):
        return 30
    return 4 * abs(hermitian_eigen(bundle).chi) + 4


def _degenerate_checks(bundle, cutoff, grid, oracle, attempt):
    from .degenerate import (
        combined_spectrum,
        decompose,
        flat_spectrum,
        point_table,
    )
    from .elliptic import epstein_regdet

    flat, quotient = decompose(bundle)
    if cutoff is None:
        cutoff = 40.0
    ft = flat_spectrum(flat, cutoff)
    qt = point_table(cutoff) if quotient is None else enumerate_spectrum(hermitian_eigen(quotient), cutoff)
    table = combined_spectrum(ft, qt, cutoff)
    attempt("identities", lambda: (True, verify_identities(table)))

    def residuals():
        r = flat_residuals(flat)
        return r["dual_residual"] < 1e-12 and r["character_residual"] < 1e-12, r

    attempt("lattice_residuals", residuals)
    if bundle.rank <= 4:
        attempt("sublattice", lambda: (lambda r: (r["equal"], r))(
            sublattice_matches_brute_force(bundle, flat, 5 if bundle.rank <= 4 else 2)))
    if flat.n_prime == 1 and not flat.trivial_P:
        from .degenerate import flat_torsion

        def theta_vs_epstein():
            a = flat_torsion(flat).log_t0
            b = epstein_regdet(flat).log_t0
            return abs(a - b) < 1e-8, {"theta": a, "epstein": b}

        attempt("theta_vs_epstein", theta_vs_epstein)
    if oracle and bundle.n == 1:
        _oracle_check(bundle, grid, attempt)
