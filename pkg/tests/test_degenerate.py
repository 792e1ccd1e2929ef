import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abeltorsion.degenerate import (
    combined_spectrum,
    decompose,
    degenerate_spectrum,
    degenerate_torsion,
    dual_lattice,
    elliptic_params,
    flat_spectrum,
    flat_torsion,
    integer_kernel,
    kernel_decomposition,
    lagrange_reduce,
    point_table,
)
from abeltorsion.elliptic import epstein_regdet
from abeltorsion.errors import InsufficientCutoff, NondegenerateInput, TrivialFlatFactor
from abeltorsion.spectral import EigenData, enumerate_spectrum
from abeltorsion.verify import flat_residuals, sublattice_matches_brute_force
from conftest import random_bundle, square_bundle, surface_bundle, validate

PI2 = math.pi**2


def flat_elliptic(w1, w2, alpha=(0.0, 0.0)):
    return validate(n=1, lattice=np.array([[w1], [w2]]), metric_g=np.eye(1),
                    form_H=np.zeros((1, 1)), alpha_phases=np.asarray(alpha, float))


def table_pairs(t):
    return [(line.lam, line.dims) for line in t.lines]


class TestIntegerKernel:
    @given(st.integers(0, 10**6), st.integers(1, 3), st.integers(2, 6))
    @settings(max_examples=60, deadline=None)
    def test_kernel_and_unimodular(self, seed, rank, cols):
        rng = np.random.default_rng(seed)
        A = rng.integers(-3, 4, (rank, cols)) @ rng.integers(-2, 3, (cols, cols))
        K, C, r = integer_kernel(A.tolist())
        assert not (A @ K).any()
        assert K.shape[1] == cols - np.linalg.matrix_rank(A)
        assert round(abs(np.linalg.det(np.hstack([C, K]).astype(float)))) == 1

    def test_identity(self):
        K, _, r = integer_kernel([[1, 0], [0, 1]])
        assert K.shape == (2, 0) and r == 2


class TestLagrange:
    @given(st.floats(-3, 3), st.floats(0.2, 3), st.integers(0, 10**6))
    @settings(max_examples=60, deadline=None)
    def test_reduced(self, x, y, seed):
        M0 = np.array([[1, 0], [0, 1]])
        rng = np.random.default_rng(seed)
        for _ in range(4):
            M0 = M0 @ np.array([[1, int(rng.integers(-3, 4))], [0, 1]]) @ np.array([[0, 1], [-1, 0]])
        w1, w2 = M0 @ np.array([1.0, complex(x, y)])
        a, b, M = lagrange_reduce(w1, w2)
        assert abs(a) <= abs(b) * (1 + 1e-12)
        assert abs((b / a).real) <= 0.5 + 1e-12
        assert round(abs(np.linalg.det(M))) == 1
        np.testing.assert_allclose(M @ np.array([w1, w2]), [a, b], atol=1e-9)


class TestDecomposition:
    def test_full_kernel(self):
        flat, quotient = kernel_decomposition(square_bundle(0.0))
        assert flat.n_prime == 1 and quotient is None
        assert round(abs(np.linalg.det(flat.U_prime_coeffs))) == 1

    def test_product(self):
        flat, quotient = kernel_decomposition(surface_bundle(np.diag([0.0, 3.0])))
        assert flat.n_prime == 1
        assert abs(abs(flat.kernel_basis[0, 0]) - 1) < 1e-12
        assert np.all(flat.U_prime_coeffs[:, 2:] == 0)
        assert quotient.n == 1
        assert quotient.form_H[0, 0].real == pytest.approx(3.0)

    def test_nonaligned(self, corpus):
        flat, quotient = kernel_decomposition(corpus["nonaligned_kernel"])
        assert flat.n_prime == 1
        assert flat.U_prime_coeffs.shape == (2, 4)
        assert quotient.form_H.real[0, 0] == pytest.approx(2.0)

    def test_nondegenerate(self):
        with pytest.raises(NondegenerateInput):
            kernel_decomposition(square_bundle(1.0))

    @pytest.mark.parametrize("seed,n,k", [(1, 2, 1), (2, 2, 1), (3, 3, 1), (4, 3, 2), (5, 2, 2)])
    def test_random_brute_force(self, seed, n, k):
        b = random_bundle(seed, n, kernel=k)
        flat, _ = decompose(b)
        assert flat.n_prime == k
        report = sublattice_matches_brute_force(b, flat, box=5 if n == 2 else 2)
        assert report["equal"], report
        r = flat_residuals(flat)
        assert r["dual_residual"] < 1e-12 and r["character_residual"] < 1e-12


class TestDualLattice:
    def test_unit_square(self):
        flat = dual_lattice(kernel_decomposition(square_bundle(0.0))[0])
        pts = {complex(round(z.real, 12), round(z.imag, 12)) for z in flat.dual_basis[:, 0]}
        # generators of Z + iZ up to sign
        assert {abs(z.real) + 1j * abs(z.imag) for z in pts} == {1, 1j}

    def test_scaled(self):
        flat = dual_lattice(kernel_decomposition(flat_elliptic(2, 2j))[0])
        assert sorted(abs(flat.dual_basis[:, 0])) == pytest.approx([0.5, 0.5])

    @given(st.floats(-2, 2), st.floats(0.3, 3), st.integers(0, 10**6))
    @settings(max_examples=30, deadline=None)
    def test_pairing_integral(self, x, y, seed):
        flat = dual_lattice(kernel_decomposition(flat_elliptic(1, complex(x, y)))[0])
        rng = np.random.default_rng(seed)
        U, D = flat.U_prime[:, 0], flat.dual_basis[:, 0]
        for _ in range(100):
            u = rng.integers(-9, 10, 2) @ U
            v = rng.integers(-9, 10, 2) @ D
            val = (np.conj(u) * v).imag
            assert abs(val - round(val)) < 1e-9


class TestCharacterPoint:
    def test_trivial(self):
        flat, _ = decompose(square_bundle(0.0))
        assert flat.trivial_P and np.allclose(flat.ell_alpha, 0)

    def test_half_phase(self):
        flat, _ = decompose(square_bundle(0.0, (0.5, 0.0)))
        assert not flat.trivial_P
        # coordinates of V' carry a unit phase; compare invariantly
        assert abs(flat.ell_alpha[0]) == pytest.approx(0.5)
        u1 = flat.U_prime[0, 0]
        assert (np.conj(u1) * flat.ell_alpha[0]).imag == pytest.approx(0.5)

    @given(st.lists(st.floats(0, 1, exclude_max=True), min_size=4, max_size=4))
    @settings(max_examples=40, deadline=None)
    def test_residual(self, phases):
        flat, _ = decompose(surface_bundle(np.zeros((2, 2)), alpha=phases))
        assert flat_residuals(flat)["character_residual"] < 1e-12


class TestFlatSpectrum:
    def test_trivial_square(self):
        flat, _ = decompose(square_bundle(0.0))
        t = flat_spectrum(flat, 2 * PI2 * 5 + 1e-6)
        expected = {}
        for m in range(-3, 4):
            for k in range(-3, 4):
                lam = 0.5 * 4 * PI2 * (m * m + k * k)
                if lam <= t.cutoff:
                    expected[round(lam, 9)] = expected.get(round(lam, 9), 0) + 1
        assert {round(l.lam, 9): l.dims[0] for l in t.lines} == expected
        assert t.lines[0].dims == (1, 1)
        assert t.lines[1].lam == pytest.approx(2 * PI2) and t.lines[1].dims == (4, 4)

    def test_half_phase(self):
        flat, _ = decompose(square_bundle(0.0, (0.5, 0.0)))
        t = flat_spectrum(flat, 10.0)
        assert t.lines[0].lam == pytest.approx(PI2 / 2) and t.lines[0].dims == (2, 2)

    @pytest.mark.parametrize("nprime", [1, 2])
    def test_trivial_zero_mode(self, nprime):
        b = square_bundle(0.0) if nprime == 1 else surface_bundle(np.zeros((2, 2)))
        t = flat_spectrum(decompose(b)[0], 5.0)
        assert t.lines[0].lam == 0 and t.lines[0].dims == tuple(math.comb(nprime, k) for k in range(nprime + 1))

    @given(st.floats(0, 1), st.floats(0, 1), st.integers(-3, 3), st.integers(-3, 3))
    @settings(max_examples=30, deadline=None)
    def test_shift_invariance(self, a1, a2, k1, k2):
        flat, _ = decompose(flat_elliptic(1, 0.3 + 1.1j, (a1, a2)))
        moved = replace(flat, alpha_on_U_prime=flat.alpha_on_U_prime + np.array([k1, k2]))
        t1, t2 = flat_spectrum(flat, 60.0), flat_spectrum(moved, 60.0)
        assert [l.dims for l in t1.lines] == [l.dims for l in t2.lines]
        np.testing.assert_allclose(t1.lambdas, t2.lambdas, rtol=1e-12, atol=1e-12)


class TestCombined:
    def test_product_example(self, corpus):
        _, t = degenerate_spectrum(corpus["product_degenerate"], 40.0)
        assert t.lines[0].lam == 0 and t.lines[0].dims == (3, 3, 0)
        assert t.lines[1].lam == pytest.approx(6 * math.pi) and t.lines[1].dims == (3, 6, 3)
        assert t.lines[2].lam == pytest.approx(2 * PI2) and t.lines[2].dims == (12, 12, 0)

    def test_point_quotient(self):
        flat, _ = decompose(square_bundle(0.0, (0.5, 0.25)))
        ft = flat_spectrum(flat, 50.0)
        assert table_pairs(combined_spectrum(ft, point_table(50.0))) == table_pairs(ft)

    def _tables(self):
        f = flat_spectrum(decompose(square_bundle(0.0, (0.3, 0.1)))[0], 60.0)
        a = enumerate_spectrum(EigenData.from_mu([2.0], 2), 60.0)
        b = enumerate_spectrum(EigenData.from_mu([-1.0], -1), 60.0)
        return f, a, b

    def test_commutative(self):
        f, a, _ = self._tables()
        x, y = combined_spectrum(f, a), combined_spectrum(a, f)
        assert [l.dims for l in x.lines] == [l.dims for l in y.lines]
        np.testing.assert_allclose(x.lambdas, y.lambdas, rtol=1e-12)

    def test_associative(self):
        f, a, b = self._tables()
        x = combined_spectrum(combined_spectrum(f, a), b)
        y = combined_spectrum(f, combined_spectrum(a, b))
        assert [l.dims for l in x.lines] == [l.dims for l in y.lines]
        np.testing.assert_allclose(x.lambdas, y.lambdas, rtol=1e-12)

    def test_acyclic(self):
        f, a, b = self._tables()
        t = combined_spectrum(combined_spectrum(f, a), b)
        assert all(l.euler_sum == 0 for l in t.lines if l.lam > 0)

    def test_insufficient_cutoff(self):
        f, a, _ = self._tables()
        with pytest.raises(InsufficientCutoff):
            combined_spectrum(f, a, cutoff=100.0)


class TestTorsion:
    def test_flat_surface_is_one(self, corpus):
        res = degenerate_torsion(*decompose(corpus["flat_surface"]))
        assert res.t0 == 1.0

    def test_trivial_factor(self, corpus):
        with pytest.raises(TrivialFlatFactor):
            degenerate_torsion(*decompose(corpus["trivial_flat"]))

    def test_half_phase_matches_oracle(self, corpus):
        flat, quotient = decompose(corpus["half_phase_flat"])
        res = degenerate_torsion(flat, quotient)
        assert res.log_t0 == pytest.approx(epstein_regdet(flat).log_t0, abs=1e-8)
        assert res.t0 == pytest.approx(2 ** 0.25, rel=1e-10)

    def test_product_formula_reports_both(self, corpus):
        flat, quotient = decompose(corpus["nonaligned_kernel"])
        res = degenerate_torsion(flat, quotient)
        assert res.details["chi_quotient"] == 1
        assert res.log_t0 == pytest.approx(res.details["log_t0_flat"])
        assert res.details["log_t0_if_dim_rule"] == 0.0

    def test_elliptic_params_half_phase(self):
        tau, zhat = elliptic_params(decompose(square_bundle(0.0, (0.5, 0.0)))[0])
        assert tau == pytest.approx(1j)
        assert zhat == pytest.approx(0.5j)

    @given(st.floats(-1.5, 1.5), st.floats(0.4, 2.5), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
    @settings(max_examples=15, deadline=None)
    def test_theta_matches_epstein(self, x, y, a1, a2):
        flat, _ = decompose(flat_elliptic(1, complex(x, y), (a1, a2)))
        assert flat_torsion(flat).log_t0 == pytest.approx(epstein_regdet(flat).log_t0, abs=1e-8)

    def test_basis_independent(self):
        """Torsion depends on the lattice, not on the generators chosen for it."""
        tau = 0.2 + 1.3j
        a = (0.3, 0.6)
        base = flat_torsion(decompose(flat_elliptic(1, tau, a))[0]).log_t0
        # generators (1 + 2 tau, 1 + 3 tau) have phases  a1 + 2 a2  and  a1 + 3 a2
        moved = flat_elliptic(1 + 2 * tau, 1 + 3 * tau, (a[0] + 2 * a[1], a[0] + 3 * a[1]))
        assert flat_torsion(decompose(moved)[0]).log_t0 == pytest.approx(base, abs=1e-10)
