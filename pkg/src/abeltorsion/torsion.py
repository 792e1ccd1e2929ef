"""Analytic torsion for nondegenerate Hermitian forms.

Only eigenvalues coming from a single generator ``2 pi n |mu_i|`` carry a
nonzero degree-weighted trace, so the spectral zeta function collapses to

    zeta(s) = (-1)^p |chi| (2 pi)^{-s} zeta_R(s) (sum_{i<=p} |mu_i|^{-s} - sum_{i>p} |mu_i|^{-s})

and ``log T_0 = -chi/4 * sum_i sgn(mu_i) log|mu_i|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from math import comb
from typing import Literal

from .errors import IdentityViolation, NotAmple
from .spectral import EigenData, SpectrumTable

# Riemann zeta at s = 0; pinned against mpmath in the test suite.
ZETA_AT_0 = -0.5
ZETA_PRIME_AT_0 = -0.5 * math.log(2.0 * math.pi)

Method = Literal["closed_form", "zeta_path", "product_formula", "theta_formula", "epstein"]


@dataclass(frozen=True)
class ZetaExpression:
    prefactor_sign: int
    chi_abs: int
    positive_rates: tuple[float, ...]
    negative_rates: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.positive_rates) + len(self.negative_rates)

    @property
    def p(self) -> int:
        return len(self.positive_rates)

    @property
    def chi(self) -> int:
        return self.prefactor_sign * self.chi_abs

    def __call__(self, s: float) -> float:
        """Evaluate the spectral zeta function for real ``s > 1``."""
        import mpmath

        bracket = math.fsum(r ** -s for r in self.positive_rates) - math.fsum(
            r ** -s for r in self.negative_rates)
        return self.chi * (2 * math.pi) ** -s * float(mpmath.zeta(s)) * bracket


@dataclass(frozen=True)
class TorsionResult:
    log_t0: float
    method: Method
    bost_value: float | None = None
    details: dict = field(default_factory=dict, compare=False)

    @property
    def t0(self) -> float:
        return math.exp(self.log_t0)


def zeta_expression(eigen: EigenData) -> ZetaExpression:
    p = eigen.p
    return ZetaExpression(
        prefactor_sign=(-1) ** p,
        chi_abs=eigen.chi_abs,
        positive_rates=tuple(abs(m) for m in eigen.mu[:p]),
        negative_rates=tuple(abs(m) for m in eigen.mu[p:]),
    )


def torsion_closed_form(eigen: EigenData) -> TorsionResult:
    s = math.fsum(math.copysign(1.0, m) * math.log(abs(m)) for m in eigen.mu)
    return TorsionResult(log_t0=-0.25 * eigen.chi * s, method="closed_form")


def zeta_prime_at_zero(expr: ZetaExpression) -> float:
    """``zeta'(0)`` of the spectral zeta function, from the Riemann-zeta constants."""
    n, p = expr.n, expr.p
    log_rates = math.fsum(math.log(2 * math.pi * r) for r in expr.positive_rates) - math.fsum(
        math.log(2 * math.pi * r) for r in expr.negative_rates)
    return expr.chi * ((2 * p - n) * ZETA_PRIME_AT_0 - ZETA_AT_0 * log_rates)


def torsion_via_zeta(expr: ZetaExpression) -> TorsionResult:
    return TorsionResult(log_t0=0.5 * zeta_prime_at_zero(expr), method="zeta_path")


def bost_torsion(eigen: EigenData) -> float:
    """Bost's normalization ``-2 log T_0`` for an ample bundle.

    Returns ``chi/2 * log(chi / Vol)`` after checking it against ``-2 log T_0``.

    Raises:
        NotAmple: the form has negative eigenvalues.
    """
    if eigen.p != 0:
        raise NotAmple(f"bundle has index p={eigen.p}")
    value = 0.5 * eigen.chi * math.log(eigen.chi / eigen.vol)
    from_t0 = -2.0 * torsion_closed_form(eigen).log_t0
    if not math.isclose(value, from_t0, rel_tol=1e-12, abs_tol=1e-12):
        raise IdentityViolation(f"Bost identity failed: {value!r} != {from_t0!r}")
    return value


def torsion_degree_p(result: TorsionResult, n: int, p_forms: int) -> TorsionResult:
    return replace(result, log_t0=comb(n, p_forms) * result.log_t0)


def torsion_from_table_weights(table: SpectrumTable) -> dict[float, int]:
    """Nonzero degree-weighted traces ``sum (-1)^k k dims_k`` keyed by eigenvalue."""
    return {line.lam: line.weighted_trace for line in table.lines
            if line.lam > 0 and line.weighted_trace}


def verify_identities(table: SpectrumTable) -> dict:
    """Check the integer identities of a spectrum table, exactly.

    * every ``lambda > 0`` has vanishing alternating sum of multiplicities;
    * harmonic forms sit in degree ``p`` with multiplicity ``|chi|``;
    * the degree-weighted trace at ``lambda > 0`` equals the sum of
      ``(-1)^p |chi|`` over single-generator tuples with index ``<= p`` and
      ``(-1)^{p+1} |chi|`` over those with index ``> p``;
    * ``sum_k (-1)^k k binom(q, k) = 0`` for ``2 <= q <= n``.

    The last two checks need ``table.p`` and are skipped for flat or combined
    tables.

    Raises:
        IdentityViolation: with the offending eigenvalue and degree vector.
    """
    report = {"lines": len(table.lines), "acyclic": 0, "weighted_nonzero": 0}
    for line in table.lines:
        if line.lam > 0 and line.euler_sum != 0:
            raise IdentityViolation(
                f"alternating sum {line.euler_sum} != 0 at lambda={line.lam!r}", line.lam, line.dims)
        report["acyclic"] += line.lam > 0
    for q in range(2, table.n + 1):
        s = sum((-1) ** k * k * comb(q, k) for k in range(q + 1))
        if s != 0:
            raise IdentityViolation(f"binomial weighted sum {s} for q={q}")
    if table.p is None or table.chi is None:
        report["harmonic"] = "skipped"
        report["localization"] = "skipped"
        return report
    p, c = table.p, abs(table.chi)
    zero = [line for line in table.lines if line.lam == 0]
    expected = tuple(c if k == p else 0 for k in range(table.n + 1))
    if not zero or zero[0].dims != expected:
        got = zero[0].dims if zero else None
        raise IdentityViolation(f"harmonic dims {got} != {expected}", 0.0, got)
    if zero[0].euler_sum != table.chi:
        raise IdentityViolation("harmonic Euler sum differs from chi", 0.0, zero[0].dims)
    report["harmonic"] = list(zero[0].dims)
    for line in table.lines:
        if line.lam == 0:
            continue
        predicted = 0
        for t in line.generators:
            support = [i for i, x in enumerate(t) if x]
            if len(support) == 1:
                predicted += (-1) ** p * c if support[0] < p else (-1) ** (p + 1) * c
        if line.weighted_trace != predicted:
            raise IdentityViolation(
                f"weighted trace {line.weighted_trace} != {predicted} at lambda={line.lam!r}",
                line.lam, line.dims)
        report["weighted_nonzero"] += predicted != 0
    report["localization"] = "ok"
    return report
