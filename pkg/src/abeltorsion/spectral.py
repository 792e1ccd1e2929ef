"""Spectrum of the Dolbeault Laplacian for a nondegenerate Hermitian form.

With ``mu_1 <= ... <= mu_n`` the eigenvalues of ``g^{-1} H`` and ``p`` the
number of negative ones, the Laplacian on ``(0, k)``-forms has eigenvalues
``2 pi sum n_i |mu_i|`` over ``n in N^n``.  One tuple ``n`` contributes
``|chi| * binom(f, k - a)`` to degree ``k``, where ``a`` counts indices
``i <= p`` with ``n_i = 0`` (these wedge factors are forced) and ``f`` counts
indices with ``n_i != 0`` (free).  Tuples with equal eigenvalue superpose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb
from typing import Iterator, Sequence

import numpy as np
import scipy.linalg

from .errors import CutoffTooLarge, NearZeroEigenvalue, ValidationError
from .torus_model import TorusBundle, euler_characteristic, lattice_volume

ZERO_THRESHOLD = 1e-9
MERGE_TOLERANCE = 1e-9
AMBIGUOUS_GAP = 1e-6
TUPLE_BUDGET = 10**7

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class EigenData:
    """Eigenvalues of ``g^{-1} H`` with the derived index, volume and ``chi(L)``."""

    mu: tuple[float, ...]
    p: int
    vol: float
    chi: int

    @property
    def n(self) -> int:
        return len(self.mu)

    @property
    def chi_abs(self) -> int:
        return abs(self.chi)

    @classmethod
    def from_mu(cls, mu: Sequence[float], chi: int, vol: float | None = None) -> "EigenData":
        """Build eigen data for synthetic inputs; ``vol`` defaults to ``chi / prod(mu)``."""
        mu = tuple(sorted(float(m) for m in mu))
        if any(m == 0 for m in mu):
            raise NearZeroEigenvalue("zero eigenvalue")
        p = sum(m < 0 for m in mu)
        if chi == 0 or (chi > 0) != (p % 2 == 0):
            raise ValidationError(f"chi={chi} has the wrong sign for p={p}")
        if vol is None:
            vol = chi / math.prod(mu)
        return cls(mu=mu, p=p, vol=float(vol), chi=int(chi))


@dataclass(frozen=True)
class SpectrumLine:
    lam: float
    dims: tuple[int, ...]
    generators: tuple[tuple[int, ...], ...] = ()

    @property
    def euler_sum(self) -> int:
        return sum((-1) ** k * d for k, d in enumerate(self.dims))

    @property
    def weighted_trace(self) -> int:
        return sum((-1) ** k * k * d for k, d in enumerate(self.dims))


@dataclass(frozen=True)
class SpectrumTable:
    """Sorted eigenvalues with per-degree multiplicities ``dims[k] = dim E_lambda^k``.

    ``p`` and ``chi`` are set for tables enumerated from nondegenerate eigen
    data and are ``None`` for flat or combined tables.
    """

    lines: tuple[SpectrumLine, ...]
    cutoff: float
    n: int
    p: int | None = None
    chi: int | None = None
    warnings: tuple[str, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.lines)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([line.lam for line in self.lines])

    def degree_levels(self, k: int) -> list[tuple[float, int]]:
        """``(lambda, dim)`` for every eigenvalue present in degree ``k``."""
        return [(line.lam, line.dims[k]) for line in self.lines if line.dims[k]]


def generalized_eigenvalues(bundle: TorusBundle) -> np.ndarray:
    return scipy.linalg.eigh(bundle.form_H, bundle.metric_g, eigvals_only=True)


def generalized_eigh(bundle: TorusBundle) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``H x = mu g x``; columns of the second array are g-orthonormal."""
    return scipy.linalg.eigh(bundle.form_H, bundle.metric_g)


def near_zero_mask(mu: np.ndarray, threshold: float = ZERO_THRESHOLD) -> np.ndarray:
    scale = float(np.max(np.abs(mu))) if len(mu) else 0.0
    if scale == 0.0:
        return np.ones(len(mu), dtype=bool)
    return np.abs(mu) < threshold * scale


def is_degenerate(bundle: TorusBundle, threshold: float = ZERO_THRESHOLD) -> bool:
    return bool(np.any(near_zero_mask(generalized_eigenvalues(bundle), threshold)))


def hermitian_eigen(bundle: TorusBundle, zero_threshold: float = ZERO_THRESHOLD) -> EigenData:
    """Eigenvalues of ``g^{-1} H``, index ``p``, volume and Euler characteristic.

    Raises:
        NearZeroEigenvalue: ``H`` has a (numerical) kernel.
    """
    mu = np.sort(generalized_eigenvalues(bundle))
    if np.any(near_zero_mask(mu, zero_threshold)):
        raise NearZeroEigenvalue(f"g^-1 H has eigenvalues near zero: {mu.tolist()}")
    chi = euler_characteristic(bundle, mu)
    return EigenData(
        mu=tuple(float(m) for m in mu),
        p=int(np.sum(mu < 0)),
        vol=lattice_volume(bundle.metric_g, bundle.lattice),
        chi=chi,
    )


def degree0_dimension(eigen: EigenData, ntuple: Sequence[int]) -> int:
    if all(ntuple[i] >= 1 for i in range(eigen.p)):
        return eigen.chi_abs
    return 0


def tuple_degree_dims(eigen: EigenData, ntuple: Sequence[int]) -> tuple[int, ...]:
    forced = sum(1 for i in range(eigen.p) if ntuple[i] == 0)
    free = sum(1 for x in ntuple if x != 0)
    c = eigen.chi_abs
    return tuple(c * comb(free, k - forced) if 0 <= k - forced <= free else 0
                 for k in range(eigen.n + 1))


def tuple_eigenvalue(eigen: EigenData, ntuple: Sequence[int]) -> float:
    return TWO_PI * math.fsum(k * abs(m) for k, m in zip(ntuple, eigen.mu))


def iter_tuples(rates: Sequence[float], cutoff: float,
                budget: int = TUPLE_BUDGET) -> Iterator[tuple[int, ...]]:
    """All ``n in N^len(rates)`` with ``sum n_i rates_i <= cutoff``.

    Depth-first with the largest rate outermost; partial sums prune the search.

    Raises:
        CutoffTooLarge: more than ``budget`` search nodes would be visited.
    """
    dim = len(rates)
    order = sorted(range(dim), key=lambda i: -rates[i])
    slack = 1e-12 * max(1.0, cutoff)
    visited = 0
    current = [0] * dim

    def rec(depth: int, remaining: float):
        nonlocal visited
        i = order[depth]
        top = int(math.floor((remaining + slack) / rates[i]))
        for k in range(top + 1):
            visited += 1
            if visited > budget:
                raise CutoffTooLarge(f"enumeration exceeds budget of {budget} tuples")
            current[i] = k
            if depth + 1 == dim:
                yield tuple(current)
            else:
                yield from rec(depth + 1, remaining - k * rates[i])
        current[i] = 0

    if dim == 0:
        yield ()
        return
    yield from rec(0, cutoff)


def merge_lines(entries: list[tuple[float, tuple[int, ...], object]], width: int,
                merge_tol: float = MERGE_TOLERANCE) -> tuple[list[SpectrumLine], list[str]]:
    """Merge ``(lambda, dims, label)`` entries whose eigenvalues coincide.

    Entries are sorted by ``lambda`` then label; each cluster is anchored at
    its first eigenvalue so that merging cannot drift.
    """
    entries = sorted(entries, key=lambda e: (e[0], e[2]))
    lines: list[SpectrumLine] = []
    warnings: list[str] = []
    anchor = None
    dims: list[int] = []
    labels: list = []

    def flush():
        if anchor is not None:
            lines.append(SpectrumLine(anchor, tuple(dims), tuple(labels)))

    for lam, d, label in entries:
        if anchor is not None and abs(lam - anchor) <= merge_tol * max(abs(lam), abs(anchor)):
            dims = [x + y for x, y in zip(dims, d)]
            labels.append(label)
            continue
        if anchor is not None and anchor > 0:
            gap = abs(lam - anchor) / max(abs(lam), abs(anchor))
            if gap <= AMBIGUOUS_GAP:
                warnings.append(f"near-collision between lambda={anchor!r} and {lam!r} "
                                f"(relative gap {gap:.3e}) left unmerged")
        flush()
        anchor, dims, labels = lam, list(d), [label]
    flush()
    for line in lines:
        if len(line.dims) != width:
            raise ValueError("inconsistent dims width")
    return lines, warnings


def enumerate_spectrum(eigen: EigenData, cutoff: float, merge_tol: float = MERGE_TOLERANCE,
                       budget: int = TUPLE_BUDGET) -> SpectrumTable:
    """Eigenvalues ``<= cutoff`` of the Laplacian on ``(0, *)``-forms with multiplicities."""
    if not cutoff > 0:
        raise ValidationError("cutoff must be positive")
    rates = [TWO_PI * abs(m) for m in eigen.mu]
    entries = []
    for nt in iter_tuples(rates, cutoff, budget):
        lam = tuple_eigenvalue(eigen, nt)
        if lam <= cutoff:
            entries.append((lam, tuple_degree_dims(eigen, nt), nt))
    lines, warnings = merge_lines(entries, eigen.n + 1, merge_tol)
    return SpectrumTable(tuple(lines), float(cutoff), eigen.n, eigen.p, eigen.chi, tuple(warnings))


def pq_spectrum(table: SpectrumTable, p_forms: int) -> SpectrumTable:
    """Spectrum on ``(p_forms, q)``-forms: every multiplicity times ``binom(n, p_forms)``."""
    if not 0 <= p_forms <= table.n:
        raise ValidationError(f"p_forms must lie in [0, {table.n}]")
    c = comb(table.n, p_forms)
    lines = tuple(SpectrumLine(l.lam, tuple(c * d for d in l.dims), l.generators)
                  for l in table.lines)
    return SpectrumTable(lines, table.cutoff, table.n, table.p, table.chi, table.warnings)


def delta_bar_spectrum(eigen: EigenData, cutoff: float) -> list[float]:
    """Distinct eigenvalues ``<= cutoff`` of the scalar operator (degree-0 part)."""
    table = enumerate_spectrum(eigen, cutoff)
    return [line.lam for line in table.lines
            if any(degree0_dimension(eigen, t) for t in line.generators)]


def cutoff_for_lines(eigen: EigenData, count: int) -> float:
    """Smallest cutoff of the form ``2^j * 2 pi max|mu|`` giving at least ``count`` lines."""
    cutoff = TWO_PI * max(abs(m) for m in eigen.mu)
    while len(enumerate_spectrum(eigen, cutoff)) < count:
        cutoff *= 2.0
    return cutoff
