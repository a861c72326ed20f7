"""Fourier-domain tests: transform conventions, closed form, scaling regimes."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gkmeans.fourier import (
    PeriodicProblem,
    closed_form_S,
    dft,
    empirical_penalty_mc,
    freq_indices,
    inverse_dft,
    periodic_minimizer,
    second_deriv_norm_fourier,
)
from gkmeans.seeds import generator
from gkmeans.spline import simpson_nodes

PI4_16 = 16.0 * math.pi**4


class TestTransforms:
    def test_constant_sequence(self):
        n = 9
        zh = dft(np.full(n, 2.5))
        half = (n - 1) // 2
        assert zh[half] == pytest.approx(n * 2.5, abs=1e-12)
        others = np.delete(zh, half)
        assert np.max(np.abs(others)) < 1e-12

    def test_roundtrip_identity(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=101)
        assert np.max(np.abs(inverse_dft(dft(x)) - x)) < 1e-12

    def test_cosine_concentrates_at_unit_frequency(self):
        n = 11
        z = np.cos(2 * np.pi * np.arange(n) / n)
        zh = dft(z)
        half = (n - 1) // 2
        assert zh[half - 1].real == pytest.approx(n / 2, abs=1e-10)
        assert zh[half + 1].real == pytest.approx(n / 2, abs=1e-10)
        zh[half - 1] = zh[half + 1] = 0.0
        assert np.max(np.abs(zh)) < 1e-10

    def test_fast_path_matches_direct(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=251)
        assert np.max(np.abs(dft(x, fast=True) - dft(x))) < 1e-9
        c = dft(x)
        assert np.max(np.abs(inverse_dft(c, fast=True) - inverse_dft(c))) < 1e-12

    def test_even_n_rejected(self):
        with pytest.raises(ValueError):
            dft(np.zeros(10))
        with pytest.raises(ValueError):
            freq_indices(4)
        with pytest.raises(ValueError):
            closed_form_S(100, 1.0, 0.0, 1.0)

    @given(st.integers(1, 6))
    @settings(max_examples=10, deadline=None)
    def test_roundtrip_random_sizes(self, half):
        n = 2 * half + 1
        rng = np.random.default_rng(half)
        x = rng.normal(size=n)
        assert np.max(np.abs(inverse_dft(dft(x)) - x)) < 1e-12


class TestMinimizer:
    def test_no_regularization_is_identity(self):
        zh = np.array([1.0 + 2j, 3.0, -1.0])
        assert np.allclose(periodic_minimizer(zh, 0.0, 3), zh)

    def test_zero_frequency_passes_through(self):
        zh = np.array([5.0, 7.0, 5.0], dtype=complex)
        out = periodic_minimizer(zh, 1e9, 3)
        assert out[1] == pytest.approx(7.0)

    def test_hand_computed_shrinkage(self):
        out = periodic_minimizer(np.ones(3), 3.0, 3)
        assert np.allclose(out, [0.5, 1.0, 0.5])


class TestSecondDerivNorm:
    def test_constant_signal(self):
        n = 7
        hat = np.zeros(n, complex)
        hat[(n - 1) // 2] = n * 4.0
        assert second_deriv_norm_fourier(hat, n) == 0.0

    def test_two_cosine_value(self):
        n = 11
        hat = np.zeros(n, complex)
        half = (n - 1) // 2
        hat[half - 1] = hat[half + 1] = n
        assert second_deriv_norm_fourier(hat, n) == pytest.approx(32 * math.pi**4, rel=1e-12)

    def test_agrees_with_quadrature(self):
        n = 11
        rng = np.random.default_rng(2)
        mu_hat = dft(rng.normal(size=n))  # real signal, conjugate-symmetric spectrum
        l = freq_indices(n)
        x, w = simpson_nodes(0.0, 1.0, 10001)
        second = np.zeros_like(x)
        for li, cl in zip(l, mu_hat):
            second += np.real(cl / n * (2j * math.pi * li) ** 2 * np.exp(2j * math.pi * li * x))
        quad = float(np.sum(w * second**2))
        assert second_deriv_norm_fourier(mu_hat, n) == pytest.approx(quad, rel=1e-8)


class TestClosedForm:
    def test_zero_noise(self):
        assert closed_form_S(101, 1.0, 0.0, 0.0) == 0.0

    def test_two_term_sum(self):
        expected = (PI4_16 / 3.0) * 2.0 / (1.0 + PI4_16) ** 2
        assert closed_form_S(3, 1.0, 0.0, 1.0) == pytest.approx(expected, rel=1e-14)

    def test_bounded_regime_p_zero(self):
        assert closed_form_S(10001, 1.0, 0.0, 1.0) <= closed_form_S(1001, 1.0, 0.0, 1.0) * 1.05

    def test_monotone_in_p(self):
        ps = np.linspace(-1.5, 1.0, 11)
        for n in (11, 101, 1001):
            vals = [closed_form_S(n, 2.0, p, 1.0) for p in ps]
            assert all(b <= a + 1e-18 for a, b in zip(vals, vals[1:]))

    def test_blowup_regime(self):
        vals = [closed_form_S(n, 1.0, -1.0, 1.0) for n in (101, 1001, 10001)]
        assert vals[1] > 1.5 * vals[0]
        assert vals[2] > 1.5 * vals[1]


class TestEmpiricalPenalty:
    def test_zero_variance_is_exactly_zero(self):
        prob = PeriodicProblem(n=11, lam=1.0, p=0.0, sigma2=0.0)
        mean, se = empirical_penalty_mc(prob, 10, generator(0, 0))
        assert mean == 0.0
        assert se == 0.0

    def test_matches_closed_form(self):
        prob = PeriodicProblem(n=101, lam=1.0, p=0.0, sigma2=1.0)
        mean, se = empirical_penalty_mc(prob, 500, generator(0, 1))
        S = closed_form_S(101, 1.0, 0.0, 1.0)
        assert abs(mean - S) <= 3.0 * se

    def test_decays_for_positive_p(self):
        means = []
        for i, n in enumerate((101, 1001, 10001)):
            prob = PeriodicProblem(n=n, lam=1.0, p=0.5, sigma2=1.0)
            mean, _ = empirical_penalty_mc(prob, 60, generator(0, 2, i))
            means.append(mean)
        assert means[0] > means[1] > means[2]

    def test_lower_bound_with_cosine_signal(self):
        prob = PeriodicProblem.two_cosine(101, 1.0, 0.0, 1.0)
        mean, se = empirical_penalty_mc(prob, 300, generator(0, 3))
        bound = 32 * math.pi**4 / (1.0 + PI4_16) ** 2
        assert mean >= bound - 3.0 * se

    def test_gamma_n_definition(self):
        prob = PeriodicProblem(n=101, lam=2.0, p=-0.5, sigma2=1.0)
        assert prob.a_n == pytest.approx(1.0 / 101)
        assert prob.b_n == pytest.approx(2.0 * 101**-0.5)
        assert prob.gamma_n == pytest.approx(PI4_16 * prob.b_n * 101)

    def test_needs_two_trials(self):
        prob = PeriodicProblem(n=11, lam=1.0, p=0.0, sigma2=1.0)
        with pytest.raises(ValueError):
            empirical_penalty_mc(prob, 1, generator(0, 4))
