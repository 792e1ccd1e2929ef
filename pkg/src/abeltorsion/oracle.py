"""Finite-difference check of the degree-0 spectrum on elliptic curves.

Sections ``s`` of ``L`` are written in the unitary gauge
``psi = s exp(-(pi/2) H(z, z))``, which turns the Laplacian on functions into
the magnetic Schroedinger operator

    (1 / 2 g) (-i grad - A)^2 - pi mu,      A = pi h (-y, x),

acting on ``psi`` with ``psi(z + u) = alpha(u) exp(i pi E(z, u)) psi(z)``.  The
kinetic term is discretized on an ``N x N`` grid over the fundamental
parallelogram with Peierls link phases (exact line integrals of ``A``), so
the discrete operator is Hermitian and gauge covariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .errors import ConvergenceFailure, DimensionUnsupported, ValidationError
from .spectral import EigenData, enumerate_spectrum, hermitian_eigen, is_degenerate
from .torus_model import TorusBundle, alpha_extend

DEFAULT_GRID = (64, 96, 128)
DENSE_BELOW = 48
RESIDUAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    grid: int
    matrix: sp.csr_matrix
    boundary_phases: np.ndarray
    origin: complex = 0j
    lower_bound: float = 0.0


def _stencil(u1: complex, u2: complex) -> list[tuple[tuple[int, int], float]]:
    """Directions and weights with ``k^T G^{-1} k = sum_d w_d (d . k)^2``."""
    J = np.array([[u1.real, u2.real], [u1.imag, u2.imag]])
    Ginv = np.linalg.inv(J.T @ J)
    A, B, C = Ginv[0, 0], Ginv[0, 1], Ginv[1, 1]
    out = [((1, 0), A - abs(B)), ((0, 1), C - abs(B))]
    if abs(B) > 1e-14 * max(A, C):
        out.append(((1, 1) if B > 0 else (1, -1), abs(B)))
    return out


def build_operator(bundle: TorusBundle, N: int, origin: complex = 0j) -> DiscreteOperator:
    """Discretize the Laplacian on sections (degree 0) of a line bundle on an elliptic curve.

    ``origin`` shifts the fundamental domain; the spectrum does not depend on it.
    """
    if bundle.n != 1:
        raise DimensionUnsupported("the discretization oracle handles n = 1 only")
    if N < 16:
        raise ValidationError("grid size must be at least 16")
    u1, u2 = complex(bundle.lattice[0, 0]), complex(bundle.lattice[1, 0])
    g0 = float(bundle.metric_g[0, 0].real)
    h = float(bundle.form_H[0, 0].real)
    coef = 1.0 / (2.0 * g0)

    a, b = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    a, b = a.ravel(), b.ravel()
    idx = a * N + b
    z = origin + (a * u1 + b * u2) / N
    alpha = {(c1, c2): alpha_extend(bundle, (c1, c2)) for c1 in (-1, 0, 1) for c2 in (-1, 0, 1)}

    rows, cols, vals, phases = [], [], [], []
    diag = np.full(N * N, 0.0)
    for (d1, d2), w in _stencil(u1, u2):
        if w == 0:
            continue
        for s in (1, -1):
            ta, tb = a + s * d1, b + s * d2
            c1, c2 = ta // N, tb // N
            ra, rb = ta % N, tb % N
            delta = s * (d1 * u1 + d2 * u2) / N
            y0 = origin + (ra * u1 + rb * u2) / N
            u = c1 * u1 + c2 * u2
            link = np.exp(-1j * math.pi * h * np.imag(np.conj(z) * delta))
            wrap = np.array([alpha[(int(x), int(y))] for x, y in zip(c1, c2)])
            wrap = wrap * np.exp(1j * math.pi * h * np.imag(np.conj(u) * y0))
            rows.append(idx)
            cols.append(ra * N + rb)
            vals.append(-coef * w * N**2 * link * wrap)
            phases.append(wrap[(c1 != 0) | (c2 != 0)])
            diag += coef * w * N**2
    mu = h / g0
    diag = diag - math.pi * mu
    rows.append(idx)
    cols.append(idx)
    vals.append(diag.astype(complex))
    M = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N * N, N * N))
    return DiscreteOperator(N, M, np.concatenate(phases), origin, -math.pi * abs(mu))


def hermiticity_defect(op: DiscreteOperator) -> float:
    D = op.matrix - op.matrix.conj().T
    return float(abs(D).max()) if D.nnz else 0.0


def _subspace_iteration(M: sp.csc_matrix, K: int, sigma: float, extra: int = 16,
                        tol: float = 1e-10, maxiter: int = 500, seed: int = 0):
    """Block shift-invert iteration with Rayleigh-Ritz; keeps whole degenerate eigenspaces.

    Single-vector Lanczos (ARPACK) occasionally drops a copy of an exactly
    degenerate eigenvalue, which would corrupt the multiplicity count.
    """
    size = M.shape[0]
    m = min(K + extra, size - 1)
    lu = splu((M - sigma * sp.identity(size, format="csc", dtype=M.dtype)).tocsc())
    rng = np.random.default_rng(seed)
    X, _ = np.linalg.qr(rng.standard_normal((size, m)) + 1j * rng.standard_normal((size, m)))
    scale = max(1.0, float(abs(M).sum(axis=1).max()))
    for _ in range(maxiter):
        Q, _ = np.linalg.qr(lu.solve(X))
        T = Q.conj().T @ (M @ Q)
        w, S = np.linalg.eigh(0.5 * (T + T.conj().T))
        X = Q @ S
        resid = np.linalg.norm(M @ X[:, :K] - X[:, :K] * w[:K], axis=0)
        if resid.max() < tol * scale:
            return w[:K], X[:, :K]
    raise ConvergenceFailure(f"subspace iteration stalled at residual {resid.max() / scale:.3e}")


def low_spectrum(op: DiscreteOperator, K: int) -> np.ndarray:
    """``K`` smallest eigenvalues, ascending.

    Dense ``eigh`` below ``DENSE_BELOW`` grid points per side, block shift-invert
    iteration above.

    Raises:
        ConvergenceFailure: some residual exceeds ``RESIDUAL_TOL`` relative to the matrix scale.
    """
    M = op.matrix
    size = M.shape[0]
    if K >= size:
        raise ValidationError("K must be smaller than the matrix size")
    if op.grid < DENSE_BELOW:
        vals, vecs = np.linalg.eigh(M.toarray())
        vals, vecs = vals[:K], vecs[:, :K]
    else:
        vals, vecs = _subspace_iteration(M.tocsc(), K, op.lower_bound - 1.0)
    scale = max(1.0, float(abs(M).sum(axis=1).max()))
    resid = np.linalg.norm(M @ vecs - vecs * vals, axis=0)
    if np.max(resid) > RESIDUAL_TOL * scale:
        raise ConvergenceFailure(f"eigensolver residual {np.max(resid):.3e}")
    return np.asarray(vals.real)


def fit_order(Ns: Sequence[int], values: Sequence[float]) -> float:
    """Convergence order ``p`` in ``v(N) = v* + C N^{-p}`` from three grids; NaN if undetermined."""
    (n1, n2, n3), (v1, v2, v3) = Ns[:3], values[:3]
    d12, d23 = v1 - v2, v2 - v3
    if d23 == 0 or d12 == 0 or (d12 > 0) != (d23 > 0):
        return float("nan")
    target = d12 / d23

    def f(p):
        return (n1**-p - n2**-p) / (n2**-p - n3**-p) - target

    try:
        return float(brentq(f, 0.05, 12.0))
    except ValueError:
        return float("nan")


def richardson(Ns: Sequence[int], values: Sequence[float], order: float = 2.0) -> tuple[float, float]:
    """Least-squares extrapolation ``v(N) = v* + C N^{-order}``; returns ``(v*, C)``."""
    X = np.column_stack([np.ones(len(Ns)), np.asarray(Ns, float) ** -order])
    sol, *_ = np.linalg.lstsq(X, np.asarray(values, float), rcond=None)
    return float(sol[0]), float(sol[1])


def predicted_levels(bundle: TorusBundle, cutoff: float) -> list[tuple[float, int]]:
    """Degree-0 eigenvalues with multiplicities from the closed forms."""
    if is_degenerate(bundle):
        from .degenerate import decompose, flat_spectrum

        flat, _ = decompose(bundle)
        return flat_spectrum(flat, cutoff).degree_levels(0)
    return enumerate_spectrum(hermitian_eigen(bundle), cutoff).degree_levels(0)


def compare_with_theory(bundle: TorusBundle, N_list: Sequence[int] = DEFAULT_GRID, K: int = 12,
                        rel_tol: float = 1e-2, levels: int | None = None) -> dict:
    """Extrapolate the discrete low spectrum and compare it with the predicted levels.

    Eigenvalues are Richardson-extrapolated index by index (``h^2`` model).
    The error of each extrapolant is estimated by comparing it with the
    two-finest-grid extrapolant, and consecutive eigenvalues are split into
    different clusters when their gap exceeds ten times that estimate.  The
    trailing cluster is dropped since it may be cut by ``K``.  The error for
    the zero level is measured relative to the first positive level.
    """
    Ns = sorted(int(x) for x in N_list)
    if len(Ns) < 3:
        raise ValidationError("need at least three grid sizes")
    raw = np.array([low_spectrum(build_operator(bundle, N), K) for N in Ns])  # (len(Ns), K)
    extrap = np.array([richardson(Ns, raw[:, i])[0] for i in range(K)])
    pair = np.array([richardson(Ns[-2:], raw[-2:, i])[0] for i in range(K)])
    orders = [fit_order(Ns, raw[:, i]) for i in range(K)]
    order_idx = np.argsort(extrap)
    extrap_sorted = extrap[order_idx]
    err = np.maximum(np.abs(extrap - pair), RESIDUAL_TOL * np.maximum(1.0, np.abs(extrap)))[order_idx]
    groups = [[0]]
    for i in range(1, K):
        if extrap_sorted[i] - extrap_sorted[i - 1] > 10.0 * max(err[i], err[i - 1]):
            groups.append([])
        groups[-1].append(i)
    if groups and groups[-1][-1] == K - 1:
        groups = groups[:-1]
    computed = [(float(np.mean(extrap_sorted[g])), len(g)) for g in groups]

    upper = max(computed[-1][0] if computed else 1.0, 1.0) * 2.0 + 50.0
    predicted = predicted_levels(bundle, upper)
    positive = [lam for lam, _ in predicted if lam > 0]
    spacing = positive[0] if positive else 1.0
    m = len(computed) if levels is None else min(levels, len(computed))
    rows = []
    for (c, size), (lam, dim) in zip(computed[:m], predicted[:m]):
        rel = abs(c - lam) / (lam if lam > 0 else spacing)
        rows.append({"predicted": lam, "computed": c, "rel_error": rel,
                     "multiplicity_predicted": dim, "multiplicity_computed": size,
                     "ok": bool(rel < rel_tol and dim == size)})
    finite = [o for o in orders if math.isfinite(o)]
    return {
        "grids": Ns,
        "levels": rows,
        "fitted_order": float(np.median(finite)) if finite else float("nan"),
        "orders": orders,
        "error_estimates": err.tolist(),
        "raw": raw.tolist(),
        "pass": bool(rows) and len(rows) >= (levels or 1) and all(r["ok"] for r in rows),
    }


def oscillator_spectrum(eigen: EigenData, cutoff: float) -> list[float]:
    """Distinct levels ``sum_i 2 pi |mu_i| (m_i + 1/2) - pi sum_i mu_i <= cutoff`` over ``m in N^n``."""
    from .spectral import MERGE_TOLERANCE, iter_tuples

    mu = eigen.mu
    shift = math.fsum(2 * math.pi * abs(x) * 0.5 for x in mu) - math.pi * math.fsum(mu)
    rates = [2 * math.pi * abs(x) for x in mu]
    levels = []
    for m in iter_tuples(rates, cutoff - shift):
        value = math.fsum(2 * math.pi * abs(x) * (k + 0.5) for x, k in zip(mu, m)) - math.pi * math.fsum(mu)
        if value <= cutoff:
            levels.append(value)
    levels.sort()
    out: list[float] = []
    for v in levels:
        if out and abs(v - out[-1]) <= MERGE_TOLERANCE * max(abs(v), 1.0):
            continue
        out.append(v)
    return out
