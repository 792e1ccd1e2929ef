import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abeltorsion.errors import IdentityViolation, NotAmple
from abeltorsion.spectral import EigenData, SpectrumLine, SpectrumTable, enumerate_spectrum, hermitian_eigen
from abeltorsion.torsion import (
    ZETA_AT_0,
    ZETA_PRIME_AT_0,
    bost_torsion,
    torsion_closed_form,
    torsion_degree_p,
    torsion_from_table_weights,
    torsion_via_zeta,
    verify_identities,
    zeta_expression,
)
from conftest import random_bundle


@st.composite
def random_eigen(draw, max_n=6):
    n = draw(st.integers(1, max_n))
    p = draw(st.integers(0, n))
    rates = [draw(st.floats(0.05, 20.0)) for _ in range(n)]
    c = draw(st.integers(1, 50))
    return EigenData.from_mu([-r for r in rates[:p]] + rates[p:], (-1) ** p * c)


class TestConstants:
    def test_zeta_zero(self):
        assert ZETA_AT_0 == pytest.approx(float(mpmath.zeta(0)), abs=1e-15)

    def test_zeta_prime_zero(self):
        # independent: derivative of the Hurwitz/Riemann zeta via mpmath's functional evaluation
        assert ZETA_PRIME_AT_0 == pytest.approx(float(mpmath.zeta(0, 1, 1)), abs=1e-15)

    def test_zeta_prime_zero_by_differences(self):
        h = mpmath.mpf("1e-20")
        with mpmath.workdps(50):
            d = (mpmath.zeta(h) - mpmath.zeta(-h)) / (2 * h)
        assert ZETA_PRIME_AT_0 == pytest.approx(float(d), abs=1e-14)


class TestZetaExpression:
    def test_signature(self):
        z = zeta_expression(EigenData.from_mu([-1.0, 2.0], -2))
        assert (z.prefactor_sign, z.chi_abs) == (-1, 2)
        assert z.positive_rates == (1.0,) and z.negative_rates == (2.0,)

    def test_ample(self):
        z = zeta_expression(EigenData.from_mu([3.0], 3))
        assert (z.prefactor_sign, z.positive_rates, z.negative_rates) == (1, (), (3.0,))

    def test_all_negative(self):
        z = zeta_expression(EigenData.from_mu([-1.0, -1.0], 1))
        assert z.prefactor_sign == 1 and z.positive_rates == (1.0, 1.0)

    @pytest.mark.parametrize("mu,chi,s,cutoff", [
        ([-1.0, 2.0], -2, 3.0, 2500.0),
        ([3.0], 3, 3.0, 2500.0),
        ([0.7, 1.3, -2.1], -4, 4.0, 300.0),
    ])
    def test_matches_truncated_trace(self, mu, chi, s, cutoff):
        """``Tr (-1)^N N lambda^{-s}`` summed over the enumerated table."""
        e = EigenData.from_mu(mu, chi)
        t = enumerate_spectrum(e, cutoff)
        direct = math.fsum(line.weighted_trace * line.lam ** -s for line in t.lines if line.lam > 0)
        # only single-generator lines contribute; each rate leaves a tail below |chi| cutoff^{1-s}
        tail = abs(chi) * len(mu) * cutoff ** (1 - s)
        assert zeta_expression(e)(s) == pytest.approx(direct, abs=tail + 1e-12)


class TestClosedForm:
    def test_sqrt2(self):
        e = EigenData.from_mu([-1.0, 2.0], -2)
        assert torsion_closed_form(e).log_t0 == pytest.approx(0.5 * math.log(2), abs=1e-15)
        assert torsion_closed_form(e).t0 == pytest.approx(math.sqrt(2), rel=1e-14)
        assert torsion_via_zeta(zeta_expression(e)).t0 == pytest.approx(math.sqrt(2), rel=1e-12)

    def test_unit_rates(self):
        assert torsion_closed_form(EigenData.from_mu([-1.0, 1.0, 1.0], -5)).t0 == 1.0

    def test_ample_three(self):
        e = EigenData.from_mu([3.0], 3)
        for res in (torsion_closed_form(e), torsion_via_zeta(zeta_expression(e))):
            assert res.log_t0 == pytest.approx(-0.75 * math.log(3), rel=1e-12)

    def test_symmetric_rates(self):
        assert torsion_closed_form(EigenData.from_mu([-2.0, 2.0], -7)).log_t0 == 0.0

    @given(random_eigen())
    @settings(max_examples=200, deadline=None)
    def test_paths_agree(self, e):
        a = torsion_closed_form(e).t0
        b = torsion_via_zeta(zeta_expression(e)).t0
        assert b == pytest.approx(a, rel=1e-12)

    @given(random_eigen(), st.randoms(use_true_random=False))
    @settings(max_examples=50, deadline=None)
    def test_permutation_invariant(self, e, rnd):
        mu = list(e.mu)
        rnd.shuffle(mu)
        assert torsion_closed_form(EigenData.from_mu(mu, e.chi)).log_t0 == pytest.approx(
            torsion_closed_form(e).log_t0, rel=1e-13, abs=1e-13)

    @given(random_eigen())
    @settings(max_examples=50, deadline=None)
    def test_odd_under_inversion(self, e):
        inv = EigenData.from_mu([1 / m for m in e.mu], e.chi, vol=1.0)
        assert torsion_closed_form(inv).log_t0 == pytest.approx(
            -torsion_closed_form(e).log_t0, rel=1e-12, abs=1e-12)

    def test_alpha_independent(self):
        b = random_bundle(11, 3)
        t1 = torsion_closed_form(hermitian_eigen(b)).log_t0
        t2 = torsion_closed_form(hermitian_eigen(b.with_alpha(np.linspace(0, 0.9, 6)))).log_t0
        assert t1 == t2


class TestBost:
    def test_ample_three(self):
        e = EigenData.from_mu([3.0], 3, vol=1.0)
        assert bost_torsion(e) == pytest.approx(1.5 * math.log(3), rel=1e-14)
        assert bost_torsion(e) == pytest.approx(-2 * math.log(3 ** -0.75), rel=1e-12)

    def test_unit(self):
        assert bost_torsion(EigenData.from_mu([1.0], 1, vol=1.0)) == 0.0

    def test_surface(self):
        assert bost_torsion(EigenData.from_mu([1.0, 2.0], 2, vol=1.0)) == pytest.approx(math.log(2))

    def test_not_ample(self):
        with pytest.raises(NotAmple):
            bost_torsion(EigenData.from_mu([-1.0, 2.0], -2))

    @pytest.mark.parametrize("seed", range(8))
    def test_random_ample_bundles(self, seed):
        e = hermitian_eigen(random_bundle(100 + seed, 1 + seed % 3, ample=True))
        assert e.p == 0
        assert bost_torsion(e) == pytest.approx(-2 * torsion_closed_form(e).log_t0, rel=1e-12)


class TestDegreeP:
    def test_identity(self):
        r = torsion_closed_form(EigenData.from_mu([-1.0, 2.0], -2))
        assert torsion_degree_p(r, 2, 0).t0 == pytest.approx(r.t0)
        assert torsion_degree_p(r, 2, 2).t0 == pytest.approx(r.t0)

    def test_square(self):
        r = torsion_closed_form(EigenData.from_mu([-1.0, 2.0], -2))
        assert torsion_degree_p(r, 2, 1).t0 == pytest.approx(2.0, rel=1e-14)


class TestIdentities:
    def test_signature_table(self):
        t = enumerate_spectrum(EigenData.from_mu([-1.0, 2.0], -2), 40.0)
        report = verify_identities(t)
        assert report["lines"] == len(t)
        assert (2, 4, 2) in [l.dims for l in t.lines]

    def test_corrupted(self):
        t = enumerate_spectrum(EigenData.from_mu([1.0], 1), 20.0)
        bad = SpectrumTable(t.lines + (SpectrumLine(99.0, (1, 0)),), t.cutoff, t.n, t.p, t.chi)
        with pytest.raises(IdentityViolation) as info:
            verify_identities(bad)
        assert info.value.lam == 99.0

    def test_wrong_harmonic_degree(self):
        lines = (SpectrumLine(0.0, (2, 0)),)
        with pytest.raises(IdentityViolation):
            verify_identities(SpectrumTable(lines, 1.0, 1, p=1, chi=-2))

    def test_weights_single_generators(self):
        t = enumerate_spectrum(EigenData.from_mu([-1.0, 2.0], -2), 40.0)
        weights = torsion_from_table_weights(t)
        for lam, w in weights.items():
            assert abs(w) == 2
