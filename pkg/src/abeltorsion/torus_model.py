"""Appell-Humbert data for a line bundle on a flat complex torus.

A bundle is described by a lattice ``U`` in ``C^n`` (2n generators), a flat
Hermitian metric ``g``, a Hermitian form ``H`` whose imaginary part ``E`` is
integral on ``U x U``, and a semicharacter ``alpha`` given by its phases on the
generators.

Sesquilinear forms follow the convention ``F(z, w) = w^* F z``: linear in the
first argument, antilinear in the second.  With this convention the kernel of
the form ``H`` is the null space of the matrix ``H`` and ``g^{-1} H`` is the
matrix of the endomorphism defined by ``H(z, w) = g(Az, w)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    ChiMismatch,
    DegenerateLattice,
    NonIntegralE,
    NotHermitian,
    NotPositive,
    ValidationError,
)

DEFAULT_TOLERANCE = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TorusBundle:
    """Validated Appell-Humbert data ``(V, U, g, H, alpha)``.

    Construct through :func:`validate` (or :func:`load_bundle`); the
    constructor itself performs no checks.

    Attributes:
        n: complex dimension.
        lattice: ``(2n, n)`` complex array, one generator per row.
        metric_g: ``(n, n)`` Hermitian positive-definite matrix.
        form_H: ``(n, n)`` Hermitian matrix.
        alpha_phases: ``(2n,)`` reals in ``[0, 1)``; ``alpha(u_j) = exp(2 pi i a_j)``.
        tolerance: integrality / Hermiticity tolerance.
        E_lattice: ``(2n, 2n)`` integer matrix ``E(u_j, u_k)``.
    """

    n: int
    lattice: np.ndarray
    metric_g: np.ndarray
    form_H: np.ndarray
    alpha_phases: np.ndarray
    tolerance: float
    E_lattice: np.ndarray

    @property
    def rank(self) -> int:
        return 2 * self.n

    def realified_lattice(self) -> np.ndarray:
        """Real ``2n x 2n`` matrix whose columns are the generators in ``(x1, y1, x2, y2, ...)``."""
        return realify(self.lattice)

    def with_alpha(self, phases: Sequence[float]) -> "TorusBundle":
        phases = np.mod(np.asarray(phases, dtype=float), 1.0)
        if phases.shape != (self.rank,):
            raise ValidationError(f"expected {self.rank} alpha phases, got {phases.shape}")
        return TorusBundle(self.n, self.lattice, self.metric_g, self.form_H,
                           _frozen(phases), self.tolerance, self.E_lattice)


@dataclass(frozen=True)
class ChernData:
    E_on_lattice: np.ndarray
    c1_matrix: np.ndarray


def form(F: np.ndarray, z: np.ndarray, w: np.ndarray) -> complex:
    """Evaluate the sesquilinear form ``F(z, w) = w^* F z``."""
    return complex(np.conj(w) @ F @ z)


def realify(vectors: np.ndarray) -> np.ndarray:
    vectors = np.atleast_2d(np.asarray(vectors, dtype=complex))
    m, n = vectors.shape
    out = np.empty((2 * n, m))
    out[0::2, :] = vectors.real.T
    out[1::2, :] = vectors.imag.T
    return out


def e_matrix(F: np.ndarray, lattice: np.ndarray) -> np.ndarray:
    """Real matrix ``Im F(u_j, u_k)`` over the lattice generators."""
    # F(u_j, u_k) = conj(u_k) . F u_j
    vals = np.conj(lattice) @ F @ lattice.T  # [k, j]
    return vals.T.imag


def gram_matrix(metric: np.ndarray, lattice: np.ndarray) -> np.ndarray:
    return (np.conj(lattice) @ metric @ lattice.T).T.real


def lattice_volume(metric: np.ndarray, lattice: np.ndarray) -> float:
    """Riemannian volume of ``V/U`` for the metric ``Re g``."""
    return float(math.sqrt(abs(np.linalg.det(gram_matrix(metric, lattice)))))


# ----------------------------------------------------------------------------
# parsing


def _as_complex(entry: Any) -> complex:
    if isinstance(entry, (int, float)):
        return complex(entry)
    if isinstance(entry, (list, tuple)) and len(entry) == 2 and all(
            isinstance(x, (int, float)) for x in entry):
        return complex(entry[0], entry[1])
    raise ValidationError(f"cannot read complex number from {entry!r}")


def _complex_matrix(rows: Any, shape: tuple[int, int], name: str) -> np.ndarray:
    if not isinstance(rows, (list, tuple)) or len(rows) != shape[0]:
        raise ValidationError(f"{name}: expected {shape[0]} rows")
    out = np.empty(shape, dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, (list, tuple)) or len(row) != shape[1]:
            raise ValidationError(f"{name}: row {i} must have {shape[1]} entries")
        for j, entry in enumerate(row):
            out[i, j] = _as_complex(entry)
    return out


def parse_bundle(raw: Mapping[str, Any]) -> dict:
    """Turn a raw mapping (decoded JSON/TOML) into arrays, without validating."""
    try:
        n = int(raw["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError("missing or invalid key 'n'") from exc
    if n < 1:
        raise ValidationError("n must be a positive integer")
    for key in ("lattice", "g", "H"):
        if key not in raw:
            raise ValidationError(f"missing key {key!r}")
    alpha = raw.get("alpha", [0.0] * (2 * n))
    if len(alpha) != 2 * n:
        raise ValidationError(f"alpha: expected {2 * n} phases")
    return dict(
        n=n,
        lattice=_complex_matrix(raw["lattice"], (2 * n, n), "lattice"),
        metric_g=_complex_matrix(raw["g"], (n, n), "g"),
        form_H=_complex_matrix(raw["H"], (n, n), "H"),
        alpha_phases=np.asarray([float(a) for a in alpha]),
        tolerance=float(raw.get("tolerance", DEFAULT_TOLERANCE)),
    )


def read_bundle_file(path: str | Path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        import tomli

        return tomli.loads(text)
    return json.loads(text)


def load_bundle(path: str | Path, tolerance: float | None = None) -> TorusBundle:
    raw = read_bundle_file(path)
    if tolerance is not None:
        raw = dict(raw, tolerance=tolerance)
    return validate(raw)


def bundle_to_raw(bundle: TorusBundle) -> dict:
    """Inverse of :func:`parse_bundle`, producing the external input schema."""
    def cplx(z):
        return [float(z.real), float(z.imag)]

    return {
        "n": bundle.n,
        "lattice": [[cplx(z) for z in u] for u in bundle.lattice],
        "g": [[cplx(z) for z in row] for row in bundle.metric_g],
        "H": [[cplx(z) for z in row] for row in bundle.form_H],
        "alpha": [float(a) for a in bundle.alpha_phases],
        "tolerance": bundle.tolerance,
    }


# ----------------------------------------------------------------------------
# validation


def validate(raw: Mapping[str, Any] | None = None, **arrays) -> TorusBundle:
    """Validate a bundle description.

    Accepts either a raw mapping in the external schema or the parsed arrays as
    keyword arguments (``n, lattice, metric_g, form_H, alpha_phases, tolerance``).

    Raises:
        DegenerateLattice, NotHermitian, NotPositive, NonIntegralE
    """
    data = parse_bundle(raw) if raw is not None else dict(arrays)
    n = int(data["n"])
    tol = float(data.get("tolerance", DEFAULT_TOLERANCE))
    if not tol > 0:
        raise ValidationError("tolerance must be positive")
    lattice = np.asarray(data["lattice"], dtype=complex).reshape(2 * n, n)
    g = np.asarray(data["metric_g"], dtype=complex).reshape(n, n)
    H = np.asarray(data["form_H"], dtype=complex).reshape(n, n)
    alpha = np.asarray(data.get("alpha_phases", np.zeros(2 * n)), dtype=float).reshape(2 * n)

    B = realify(lattice)
    scale = max(1.0, float(np.max(np.abs(B)))) ** (2 * n)
    if abs(np.linalg.det(B)) < tol * scale:
        raise DegenerateLattice("lattice generators are R-linearly dependent")

    for name, M in (("g", g), ("H", H)):
        if np.max(np.abs(M - M.conj().T)) > tol * max(1.0, float(np.max(np.abs(M)))):
            raise NotHermitian(f"{name} is not Hermitian")
    g = 0.5 * (g + g.conj().T)
    H = 0.5 * (H + H.conj().T)
    if np.min(np.linalg.eigvalsh(g)) <= 0:
        raise NotPositive("metric g is not positive definite")

    E = e_matrix(H, lattice)
    E_int = np.rint(E)
    bad = np.abs(E - E_int)
    if np.max(bad) > tol * max(1.0, float(np.max(np.abs(E)))):
        j, k = np.unravel_index(np.argmax(bad), bad.shape)
        raise NonIntegralE(f"E(u_{j + 1}, u_{k + 1}) = {E[j, k]!r} is not an integer")

    return TorusBundle(
        n=n,
        lattice=_frozen(lattice),
        metric_g=_frozen(g),
        form_H=_frozen(H),
        alpha_phases=_frozen(np.mod(alpha, 1.0)),
        tolerance=tol,
        E_lattice=_frozen(E_int.astype(np.int64)),
    )


def chern_data(bundle: TorusBundle) -> ChernData:
    E = bundle.E_lattice
    return ChernData(E_on_lattice=E, c1_matrix=_frozen(-E.astype(float)))


# ----------------------------------------------------------------------------
# semicharacter


def alpha_phase(bundle: TorusBundle, coeffs: Sequence[int]) -> float:
    """Phase ``t in [0, 1)`` with ``alpha(sum m_j u_j) = exp(2 pi i t)``."""
    m = [int(c) for c in coeffs]
    if len(m) != bundle.rank:
        raise ValidationError(f"expected {bundle.rank} coefficients")
    E = bundle.E_lattice
    cross = 0
    for j in range(len(m)):
        if m[j]:
            for k in range(j + 1, len(m)):
                cross += m[j] * m[k] * int(E[j, k])
    linear = math.fsum(mj * a for mj, a in zip(m, bundle.alpha_phases))
    return (linear + 0.5 * (cross % 2)) % 1.0


def alpha_extend(bundle: TorusBundle, coeffs: Sequence[int]) -> complex:
    """Value of the semicharacter on ``sum m_j u_j``.

    Uses ``alpha(sum m_j u_j) = prod alpha(u_j)^{m_j} * exp(i pi sum_{j<k} m_j m_k E_jk)``,
    the unique extension satisfying the cocycle identity.
    """
    t = alpha_phase(bundle, coeffs)
    return complex(np.exp(2j * np.pi * t))


# ----------------------------------------------------------------------------
# Euler characteristic


def pfaffian(matrix: Sequence[Sequence[int]]) -> Fraction:
    """Exact Pfaffian of a skew-symmetric integer (or rational) matrix."""
    A = [[Fraction(x) for x in row] for row in matrix]
    size = len(A)
    if size % 2:
        return Fraction(0)
    result = Fraction(1)
    while A:
        m = len(A)
        piv = next((j for j in range(1, m) if A[0][j] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != 1:
            A[1], A[piv] = A[piv], A[1]
            for row in A:
                row[1], row[piv] = row[piv], row[1]
            result = -result
        a = A[0][1]
        result *= a
        # Schur complement C + B^T A11^{-1} B with A11^{-1} = [[0, -1/a], [1/a, 0]]
        rest = range(2, m)
        A = [[A[i][j] + (A[1][i] * A[0][j] - A[0][i] * A[1][j]) / a for j in rest] for i in rest]
    return result


def euler_characteristic(bundle: TorusBundle, mu: np.ndarray | None = None) -> int:
    """Euler characteristic ``chi(L)``, computed two ways and cross-checked.

    (a) product of the eigenvalues of ``g^{-1} H`` times ``Vol_g(T)``;
    (b) exact Pfaffian of ``-E`` on the lattice, oriented by the realified
    lattice determinant.

    Raises:
        ChiMismatch: if the two routes disagree or (a) is not near an integer.
    """
    if mu is None:
        from .spectral import generalized_eigenvalues

        mu = generalized_eigenvalues(bundle)
    vol = lattice_volume(bundle.metric_g, bundle.lattice)
    chi_float = float(np.prod(mu)) * vol
    chi_a = round(chi_float)
    orient = 1 if np.linalg.det(bundle.realified_lattice()) > 0 else -1
    pf = pfaffian((-bundle.E_lattice).tolist())
    if pf.denominator != 1:
        raise ChiMismatch(f"Pfaffian {pf} is not an integer")
    chi_b = orient * int(pf)
    slack = max(1e-6, 1e3 * bundle.tolerance) * max(1.0, abs(chi_float))
    if abs(chi_float - chi_a) > slack or chi_a != chi_b:
        raise ChiMismatch(f"spectral chi = {chi_float!r}, Pfaffian chi = {chi_b}")
    return chi_a
