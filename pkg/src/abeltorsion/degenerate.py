"""Line bundles whose Hermitian form has a kernel.

``V' = Ker H`` meets the lattice in a full sublattice ``U'``; the bundle
restricts to the same flat bundle ``P`` on every fibre ``T' = V'/U'`` and the
spectrum is that of ``P`` on ``T'`` combined with a nondegenerate bundle on
``T'' = V''/U''``.  ``V''`` is modelled as the ``g``-orthogonal complement of
``V'``.

Coordinates on ``V'`` and ``V''`` are taken in ``g``-orthonormal eigenbases of
``g^{-1} H``, so both carry the standard metric.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from math import comb
from typing import Sequence

import numpy as np

from .errors import (
    CutoffTooLarge,
    InsufficientCutoff,
    NondegenerateInput,
    RankMismatch,
    SingularPairing,
    TrivialFlatFactor,
    ValidationError,
)
from .spectral import (
    MERGE_TOLERANCE,
    TUPLE_BUDGET,
    ZERO_THRESHOLD,
    SpectrumTable,
    enumerate_spectrum,
    generalized_eigh,
    hermitian_eigen,
    merge_lines,
    near_zero_mask,
)
from .torsion import TorsionResult
from .torus_model import TorusBundle, alpha_phase, validate

TWO_PI_SQ = 2.0 * math.pi**2


@dataclass(frozen=True, eq=False)
class FlatData:
    """Kernel decomposition of a degenerate bundle.

    Attributes:
        n_prime: ``dim Ker H``.
        kernel_basis: ``(n, n')`` g-orthonormal basis of ``V'`` (columns).
        coker_basis: ``(n, n - n')`` g-orthonormal basis of ``V'^perp``.
        U_prime_coeffs: ``(2n', 2n)`` integer coefficients of the ``U'`` generators.
        U_prime: ``(2n', n')`` generators of ``U'`` in ``kernel_basis`` coordinates.
        alpha_on_U_prime: phases of ``alpha`` on the ``U'`` generators, in ``[0, 1)``.
        dual_basis: ``(2n', n')`` generators ``v_k`` of the dual lattice, with
            ``Im g(v_k, u_j) = delta_kj``; ``None`` until :func:`dual_lattice`.
        ell_alpha: character point in ``V'``; ``None`` until :func:`character_point`.
        trivial_P: whether the flat bundle is trivial.
    """

    n_prime: int
    kernel_basis: np.ndarray
    coker_basis: np.ndarray
    U_prime_coeffs: np.ndarray
    U_prime: np.ndarray
    alpha_on_U_prime: np.ndarray
    dual_basis: np.ndarray | None = None
    ell_alpha: np.ndarray | None = None
    trivial_P: bool | None = None
    tolerance: float = 1e-9

    @property
    def ell_alpha_coeffs(self) -> np.ndarray:
        """``ell_alpha`` in the dual basis (equal to the phases by construction)."""
        return np.asarray(self.alpha_on_U_prime, dtype=float)


# ----------------------------------------------------------------------------
# integer lattice algebra


def integer_kernel(A: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray, int]:
    """Integer kernel of ``A`` by unimodular column reduction.

    Returns ``(K, C, rank)`` where the columns of ``K`` form a basis of
    ``{x in Z^N : A x = 0}`` and ``[C | K]`` is unimodular, so ``C`` spans a
    complement.  Pure Python integers throughout.
    """
    A = [[int(x) for x in row] for row in A]
    m = len(A)
    N = len(A[0]) if m else 0
    W = [[int(i == j) for j in range(N)] for i in range(N)]

    def swap(c1, c2):
        for M in (A, W):
            for row in M:
                row[c1], row[c2] = row[c2], row[c1]

    def axpy(dst, q, src):  # column dst -= q * column src
        for M in (A, W):
            for row in M:
                row[dst] -= q * row[src]

    col = 0
    for r in range(m):
        if col == N:
            break
        while True:
            nz = [j for j in range(col, N) if A[r][j] != 0]
            if not nz:
                break
            j0 = min(nz, key=lambda j: abs(A[r][j]))
            if j0 != col:
                swap(col, j0)
            clean = True
            for j in range(col + 1, N):
                if A[r][j]:
                    axpy(j, A[r][j] // A[r][col], col)
                    clean = clean and A[r][j] == 0
            if clean:
                break
        if A[r][col] != 0:
            col += 1
    W = np.array(W, dtype=np.int64)
    return W[:, col:], W[:, :col], col


def lagrange_reduce(w1: complex, w2: complex) -> tuple[complex, complex, np.ndarray]:
    """Gauss-Lagrange reduction of a planar lattice basis.

    Returns the reduced pair and the unimodular integer matrix ``M`` with
    ``(w1', w2') = M (w1, w2)``.
    """
    M = np.eye(2, dtype=np.int64)
    a, b = complex(w1), complex(w2)
    if abs(b) < abs(a):
        a, b = b, a
        M = M[::-1].copy()
    while True:
        q = round((b * a.conjugate()).real / abs(a) ** 2)
        b = b - q * a
        M[1] -= q * M[0]
        if abs(b) >= abs(a) * (1 - 1e-15):
            break
        a, b = b, a
        M = M[::-1].copy()
    return a, b, M


# ----------------------------------------------------------------------------
# decomposition


def kernel_decomposition(bundle: TorusBundle, zero_threshold: float = ZERO_THRESHOLD
                         ) -> tuple[FlatData, TorusBundle | None]:
    """Split ``V = Ker H + Ker H^perp`` and compute ``U' = U cap Ker H`` exactly.

    Returns the flat data (without dual lattice) and the quotient bundle on
    ``T''`` (``None`` when ``H = 0``).  The quotient carries the trivial
    semicharacter on its generators.

    Raises:
        NondegenerateInput: ``H`` has no kernel.
        RankMismatch: the integer kernel of ``E`` disagrees with ``dim Ker H``.
    """
    mu, X = generalized_eigh(bundle)
    mask = near_zero_mask(mu, zero_threshold)
    n_prime = int(mask.sum())
    if n_prime == 0:
        raise NondegenerateInput("H has trivial kernel")
    g = bundle.metric_g
    kernel = X[:, mask]
    coker = X[:, ~mask]

    # m in Z^2n lies in U' iff E(sum m_j u_j, u_k) = 0 for all k, i.e. E^T m = 0.
    K, C, rank = integer_kernel(bundle.E_lattice.T.tolist())
    if K.shape[1] != 2 * n_prime:
        raise RankMismatch(f"integer kernel rank {K.shape[1]} != 2 * {n_prime}")
    ambient = K.T.astype(float) @ bundle.lattice  # (2n', n)
    coords = (np.conj(kernel.T) @ g @ ambient.T).T   # (2n', n')
    if coker.shape[1]:
        leak = np.abs(np.conj(coker.T) @ g @ ambient.T)
        if np.max(leak) > 1e3 * bundle.tolerance * max(1.0, float(np.max(np.abs(ambient)))):
            raise RankMismatch("U' generators do not lie in Ker H")
    phases = np.array([alpha_phase(bundle, K[:, r]) for r in range(K.shape[1])])

    quotient = None
    if coker.shape[1]:
        proj = C.T.astype(float) @ bundle.lattice
        q_lattice = (np.conj(coker.T) @ g @ proj.T).T
        q_H = np.conj(coker.T) @ bundle.form_H @ coker
        n2 = coker.shape[1]
        quotient = validate(n=n2, lattice=q_lattice, metric_g=np.eye(n2, dtype=complex),
                            form_H=q_H, alpha_phases=np.zeros(2 * n2),
                            tolerance=max(bundle.tolerance, 1e-8))
    flat = FlatData(n_prime=n_prime, kernel_basis=kernel, coker_basis=coker,
                    U_prime_coeffs=K.T.copy(), U_prime=coords, alpha_on_U_prime=phases,
                    tolerance=bundle.tolerance)
    return flat, quotient


def _real_basis(dim: int) -> np.ndarray:
    B = np.zeros((2 * dim, dim), dtype=complex)
    for a in range(dim):
        B[2 * a, a] = 1.0
        B[2 * a + 1, a] = 1j
    return B


def pairing_matrix(U: np.ndarray) -> np.ndarray:
    """``M[j, r] = Im g(b_r, u_j)`` for the real basis ``b_r`` of ``V'``."""
    B = _real_basis(U.shape[1])
    return (np.conj(U) @ B.T).imag


def dual_lattice(flat: FlatData) -> FlatData:
    """Populate the generators of the dual lattice ``{v : Im g(v, u) in Z for u in U'}``."""
    M = pairing_matrix(flat.U_prime)
    if abs(np.linalg.det(M)) < 1e-12 * max(1.0, float(np.max(np.abs(M)))) ** len(M):
        raise SingularPairing("pairing between V' and U' is singular")
    T = np.linalg.inv(M)        # column k: real coordinates of v_k
    dual = T.T @ _real_basis(flat.n_prime)
    return replace(flat, dual_basis=dual)


def character_point(flat: FlatData, phases: Sequence[float] | None = None) -> FlatData:
    """Solve ``exp(2 pi i Im g(ell, u_j)) = alpha(u_j)`` on the ``U'`` generators.

    Phases are taken in ``[0, 1)``, which fixes the representative of ``ell``
    modulo the dual lattice.
    """
    if flat.dual_basis is None:
        flat = dual_lattice(flat)
    a = np.mod(np.asarray(flat.alpha_on_U_prime if phases is None else phases, float), 1.0)
    tol = max(flat.tolerance, 1e-12)
    trivial = bool(np.all((a < tol) | (a > 1 - tol)))
    ell = a @ flat.dual_basis
    return replace(flat, alpha_on_U_prime=a, ell_alpha=ell, trivial_P=trivial)


def decompose(bundle: TorusBundle, zero_threshold: float = ZERO_THRESHOLD
              ) -> tuple[FlatData, TorusBundle | None]:
    flat, quotient = kernel_decomposition(bundle, zero_threshold)
    return character_point(dual_lattice(flat)), quotient


# ----------------------------------------------------------------------------
# spectra


def dual_gram(flat: FlatData) -> np.ndarray:
    D = flat.dual_basis
    return (np.conj(D) @ D.T).real


def flat_spectrum(flat: FlatData, cutoff: float, merge_tol: float = MERGE_TOLERANCE,
                  budget: int = TUPLE_BUDGET) -> SpectrumTable:
    """Spectrum ``2 pi^2 |ell + ell_alpha|^2``, ``ell`` in the dual lattice.

    Each point carries the exterior algebra of ``T'``: ``dims[k] = binom(n', k)``.
    """
    if flat.ell_alpha is None:
        flat = character_point(flat)
    if not cutoff > 0:
        raise ValidationError("cutoff must be positive")
    G = dual_gram(flat)
    a = flat.ell_alpha_coeffs
    radius2 = cutoff / TWO_PI_SQ
    half = np.sqrt(radius2 * np.diag(np.linalg.inv(G)))
    ranges = [range(int(math.ceil(-ai - hi - 1e-12)), int(math.floor(-ai + hi + 1e-12)) + 1)
              for ai, hi in zip(a, half)]
    total = math.prod(len(r) for r in ranges)
    if total > budget:
        raise CutoffTooLarge(f"{total} lattice points exceed budget {budget}")
    dims = tuple(comb(flat.n_prime, k) for k in range(flat.n_prime + 1))
    entries = []
    for k in itertools.product(*ranges):
        x = np.asarray(k, dtype=float) + a
        lam = TWO_PI_SQ * float(x @ G @ x)
        if lam <= cutoff:
            entries.append((lam, dims, tuple(int(v) for v in k)))
    lines, warnings = merge_lines(entries, flat.n_prime + 1, merge_tol)
    return SpectrumTable(tuple(lines), float(cutoff), flat.n_prime, warnings=tuple(warnings))


def point_table(cutoff: float = math.inf) -> SpectrumTable:
    """Spectrum of the trivial bundle on a point: one harmonic section."""
    from .spectral import SpectrumLine

    return SpectrumTable((SpectrumLine(0.0, (1,), ((),)),), cutoff, 0)


def combined_spectrum(flat_table: SpectrumTable, quotient_table: SpectrumTable,
                      cutoff: float | None = None, merge_tol: float = MERGE_TOLERANCE
                      ) -> SpectrumTable:
    """Spectrum of the product bundle: eigenvalues add, degrees convolve.

    Raises:
        InsufficientCutoff: an input table was enumerated below ``cutoff``.
    """
    if cutoff is None:
        cutoff = min(flat_table.cutoff, quotient_table.cutoff)
    for t in (flat_table, quotient_table):
        if t.cutoff < cutoff * (1 - 1e-12):
            raise InsufficientCutoff(f"table cutoff {t.cutoff} below requested {cutoff}")
    n = flat_table.n + quotient_table.n
    entries = []
    for i, l1 in enumerate(flat_table.lines):
        for j, l2 in enumerate(quotient_table.lines):
            lam = l1.lam + l2.lam
            if lam > cutoff:
                continue
            d = [0] * (n + 1)
            for k1, a in enumerate(l1.dims):
                if a:
                    for k2, b in enumerate(l2.dims):
                        d[k1 + k2] += a * b
            entries.append((lam, tuple(d), (i, j)))
    lines, warnings = merge_lines(entries, n + 1, merge_tol)
    return SpectrumTable(tuple(lines), float(cutoff), n, warnings=tuple(warnings))


def degenerate_spectrum(bundle: TorusBundle, cutoff: float) -> tuple[FlatData, SpectrumTable]:
    flat, quotient = decompose(bundle)
    ft = flat_spectrum(flat, cutoff)
    qt = point_table(cutoff) if quotient is None else enumerate_spectrum(
        hermitian_eigen(quotient), cutoff)
    return flat, combined_spectrum(ft, qt, cutoff)


# ----------------------------------------------------------------------------
# torsion


def elliptic_params(flat: FlatData) -> tuple[complex, complex]:
    """Modulus ``tau`` and dual coordinate ``z_hat`` of the flat factor when ``n' = 1``.

    The ``U'`` basis is Lagrange-reduced and scaled to ``(1, tau)`` with
    ``Im tau > 0``.  With phases ``a_1`` on ``1`` and ``a_2`` on ``tau``, the
    character point in these coordinates is ``(a_1 tau - a_2) / Im tau``.
    """
    if flat.n_prime != 1:
        raise ValidationError("elliptic parameters need a one-dimensional kernel")
    w1, w2 = complex(flat.U_prime[0, 0]), complex(flat.U_prime[1, 0])
    r1, r2, M = lagrange_reduce(w1, w2)
    a = np.mod(M @ np.asarray(flat.alpha_on_U_prime, float), 1.0)
    tau = r2 / r1
    if tau.imag < 0:
        r1, r2 = r2, r1
        a = a[::-1]
        tau = r2 / r1
    zhat = (a[0] * tau - a[1]) / tau.imag
    return tau, zhat


def flat_torsion(flat: FlatData) -> TorsionResult:
    """Torsion of the flat factor ``P`` on ``T'`` alone."""
    if flat.ell_alpha is None:
        flat = character_point(flat)
    if flat.n_prime >= 2:
        return TorsionResult(0.0, "product_formula", details={"reason": "n' >= 2"})
    if flat.trivial_P:
        raise TrivialFlatFactor("flat factor is trivial on a one-dimensional kernel")
    from .elliptic import ray_singer_torsion

    tau, zhat = elliptic_params(flat)
    res = ray_singer_torsion(tau, zhat)
    return TorsionResult(res.log_t0, "theta_formula",
                         details={"tau": tau, "zhat": zhat})


def degenerate_torsion(flat: FlatData, quotient: TorusBundle | None) -> TorsionResult:
    """``T_0(T, L) = T_0(T', P)^{chi(L'')}``, with ``chi = 1`` for a point quotient.

    Raises:
        TrivialFlatFactor: ``n' = 1`` and ``P`` is trivial.
    """
    chi2 = 1 if quotient is None else hermitian_eigen(quotient).chi
    base = flat_torsion(flat)
    n = flat.kernel_basis.shape[0]
    details = dict(base.details, chi_quotient=chi2, n_prime=flat.n_prime, n=n,
                   log_t0_flat=base.log_t0,
                   # the alternative reading "T_0 = 1 whenever dim T >= 2"
                   log_t0_if_dim_rule=0.0 if n >= 2 else None)
    return TorsionResult(chi2 * base.log_t0, "product_formula", details=details)
