import math

import numpy as np
from django.test import SimpleTestCase
from scipy.linalg import sqrtm

from eioregression.estimators import population_fit
from eioregression.exceptions import NonmonotoneSpectrum, TauLambdaMismatch, ZeroTheta
from eioregression.models import MU_INFINITY, DesignSpec, Hyperparams, sine_spectrum, validate_spec
from eioregression.theory import (
    BoundConfig,
    bias_conditions,
    bias_leading_term,
    bias_norm_bounds,
    bias_remainder_bound,
    concentration_bound_cov,
    concentration_bound_noise,
    convergence_bound,
    effective_rank,
    excess_risk,
    k_star,
    predicted_best_fit,
    psi_bound,
    risk_bound_rhs,
    risk_bound_simplified_rhs,
    risk_remainder,
    spectral_summary,
    tail_ratio_sum,
    variance_leading_term,
    variance_orders,
    variance_remainder_bound,
)


def random_spectrum(rng, d):
    spectrum = np.sort(rng.uniform(0.0, 2.0, size=d))[::-1]
    if rng.random() < 0.2:
        spectrum[rng.integers(1, d + 1):] = 0.0
    return spectrum


def naive_r(spectrum, k, q):
    total = 0.0
    if k >= len(spectrum) or spectrum[k] == 0.0:
        return 0.0
    for j in range(k, len(spectrum)):
        total += (spectrum[j] / spectrum[k]) ** q
    return total


def naive_k_star(spectrum, lam):
    best = 0
    for k, value in enumerate(spectrum, start=1):
        if value**2 >= 2 * lam:
            best = k
    return best


class LeadingTermTests(SimpleTestCase):

    def test_bias_vanishes_without_penalty(self):
        np.testing.assert_array_equal(bias_leading_term(np.eye(3), np.ones(3), 0.0), np.zeros(3))

    def test_scalar_bias(self):
        b = bias_leading_term(np.array([[1.0]]), np.array([1.0]), 0.5)
        self.assertAlmostEqual(b[0], -0.5)
        self.assertAlmostEqual(predicted_best_fit(np.array([[1.0]]), np.array([1.0]), 0.5)[0], 0.5)

    def test_bias_matches_large_mu_best_fit(self):
        spec = validate_spec(DesignSpec.sine(50))
        sigma = spec.covariance
        for lam in (1e-3, 1e-2):
            theta_star = population_fit(spec.population_stats(), Hyperparams(mu=1e8, lam=lam)).theta
            b = bias_leading_term(sigma, spec.theta_circ, lam)
            num = math.sqrt(b @ sigma @ b)
            gap = theta_star - spec.theta_circ
            ratio = num / math.sqrt(gap @ sigma @ gap)
            self.assertTrue(0.99 <= ratio <= 1.01, ratio)

    def test_zeta_vanishes_with_exact_moments(self):
        sigma = np.diag([1.0, 0.5])
        b = bias_leading_term(sigma, np.ones(2), 0.1)
        zeta, zeta_tilde = variance_leading_term(sigma, sigma, np.zeros(2), b, 0.1)
        np.testing.assert_array_equal(zeta, np.zeros(2))
        np.testing.assert_array_equal(zeta_tilde, np.zeros(2))

    def test_zeta_without_penalty(self):
        rng = np.random.default_rng(0)
        sigma = np.diag([2.0, 1.0, 0.5])
        sigma_hat = sigma + 0.1 * np.eye(3)
        u = rng.standard_normal(3)
        zeta, zeta_tilde = variance_leading_term(sigma, sigma_hat, u, np.zeros(3), 0.0)
        np.testing.assert_allclose(zeta, sigma @ u)
        np.testing.assert_allclose(zeta_tilde, np.linalg.solve(sigma @ sigma, sigma @ u))

    def test_excess_risk(self):
        theta = np.array([1.0, -2.0])
        self.assertEqual(excess_risk(np.eye(2), theta, theta), 0.0)
        self.assertAlmostEqual(excess_risk(np.eye(2), theta, np.zeros(2)), 5.0)
        rng = np.random.default_rng(1)
        m = rng.standard_normal((3, 3))
        sigma = m @ m.T
        a, b = rng.standard_normal(3), rng.standard_normal(3)
        naive = sum((a - b)[i] * sigma[i, j] * (a - b)[j] for i in range(3) for j in range(3))
        self.assertAlmostEqual(excess_risk(sigma, a, b), naive, delta=1e-12 * max(1.0, naive))


class SpectralTests(SimpleTestCase):

    def test_identity_spectrum(self):
        summary = spectral_summary(np.ones(6), 0.5)
        self.assertEqual(summary.k_star, 6)
        self.assertEqual(summary.r2, 0.0)
        self.assertEqual(summary.r4, 0.0)
        self.assertEqual(summary.eff_rank, 6.0)

    def test_sine_spectrum_threshold_is_inclusive(self):
        summary = spectral_summary(sine_spectrum(50), 1 / 32)
        self.assertEqual(summary.k_star, 16)

    def test_no_eigenvalue_reaches_threshold(self):
        summary = spectral_summary(np.array([0.1, 0.05]), 1.0)
        self.assertEqual(summary.k_star, 0)
        self.assertAlmostEqual(summary.r2, 1.0 + 0.25)

    def test_rejects_increasing_spectrum(self):
        with self.assertRaises(NonmonotoneSpectrum):
            spectral_summary(np.array([1.0, 2.0]), 0.1)

    def test_effective_rank(self):
        self.assertEqual(effective_rank(np.zeros((3, 3))), 0.0)
        self.assertAlmostEqual(effective_rank(np.eye(4)), 4.0)
        self.assertAlmostEqual(effective_rank(np.diag([2.0, 1.0])), 1.5)

    def test_tail_sums_edge_cases(self):
        spectrum = np.array([1.0, 0.5, 0.0])
        self.assertEqual(tail_ratio_sum(spectrum, 3, 2), 0.0)
        self.assertEqual(tail_ratio_sum(spectrum, 2, 2), 0.0)
        self.assertAlmostEqual(tail_ratio_sum(spectrum, 0, 2), 1.25)

    def test_direct_scan_agreement_and_monotone_in_q(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            d = int(rng.integers(1, 30))
            spectrum = random_spectrum(rng, d)
            lam = float(10.0 ** rng.uniform(-4, 1))
            summary = spectral_summary(spectrum, lam)
            self.assertEqual(summary.k_star, naive_k_star(spectrum, lam))
            self.assertEqual(k_star(spectrum, lam), summary.k_star)
            self.assertAlmostEqual(summary.r2, naive_r(spectrum, summary.k_star, 2), delta=1e-12 * max(1.0, summary.r2))
            self.assertAlmostEqual(summary.r4, naive_r(spectrum, summary.k_star, 4), delta=1e-12 * max(1.0, summary.r4))
            k = int(rng.integers(0, d + 1))
            self.assertLessEqual(tail_ratio_sum(spectrum, k, 4), tail_ratio_sum(spectrum, k, 2) + 1e-12)


class BiasNormBoundTests(SimpleTestCase):

    def test_scalar_case(self):
        bounds = bias_norm_bounds(np.array([1.0]), np.array([1.0]), 0.125)
        self.assertAlmostEqual(bounds.head_tail_split.lhs, 0.04)
        self.assertAlmostEqual(bounds.head_tail_split.rhs, 0.25)
        self.assertAlmostEqual(bounds.head_tail_split_cubed.lhs, 0.16)
        self.assertAlmostEqual(bounds.head_tail_split_cubed.rhs, 1.0)
        self.assertAlmostEqual(bounds.ridge_comparison.lhs, 0.16)
        self.assertAlmostEqual(bounds.ridge_comparison.rhs, 0.5 / 2.25)
        self.assertTrue(bounds.all_hold())

    def test_theta_above_threshold_leaves_tail_term(self):
        spectrum = np.array([1.0, 0.5, 0.01])
        beta = np.array([0.0, 0.0, 3.0])
        bounds = bias_norm_bounds(spectrum, beta, 0.1)
        self.assertAlmostEqual(bounds.head_tail_split.rhs, 0.01 * 9.0)
        self.assertTrue(bounds.all_hold())

    def test_random_spectra_never_violate(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            d = int(rng.integers(1, 30))
            spectrum = random_spectrum(rng, d)
            beta = rng.standard_normal(d)
            lam = float(10.0 ** rng.uniform(-4, 1))
            bounds = bias_norm_bounds(spectrum, beta, lam)
            self.assertTrue(bounds.all_hold(1e-12), (spectrum, beta, lam))

    def test_sine_spectrum_grid(self):
        spectrum = sine_spectrum(50)
        beta = np.arange(1, 51, dtype=float) ** -3.0
        for lam in 1.3 ** np.arange(-40, 40, 7, dtype=float):
            self.assertTrue(bias_norm_bounds(spectrum, beta, lam).all_hold())

    def test_tau_must_match_lambda(self):
        with self.assertRaises(TauLambdaMismatch):
            bias_norm_bounds(np.ones(2), np.ones(2), 1.0, tau=1.0)
        bias_norm_bounds(np.ones(2), np.ones(2), 0.5, tau=1.0)


class BoundFormulaTests(SimpleTestCase):

    def setUp(self):
        self.spec = validate_spec(DesignSpec.sine(20))
        self.cfg = BoundConfig(c_x=1.0, sigma_psi1=0.09, delta=0.05)

    def test_psi_scales_with_n(self):
        psi = psi_bound(100, self.cfg, self.spec.covariance, self.spec.theta_circ)
        self.assertAlmostEqual(psi_bound(200, self.cfg, self.spec.covariance, self.spec.theta_circ), psi / 2, delta=1e-12 * psi)

    def test_psi_noiseless_identity(self):
        cfg = BoundConfig(c_x=1.0, sigma_psi1=0.0, delta=0.1)
        d, n = 4, 50
        expected = 196 * 4 * (d**2 + math.log(4 / 0.1)) / n
        self.assertAlmostEqual(psi_bound(n, cfg, np.eye(d), np.ones(d)), expected, delta=1e-12 * expected)

    def test_psi_matches_independent_transcription(self):
        sigma = self.spec.covariance
        theta = self.spec.theta_circ
        top = np.max(np.linalg.eigvalsh(sigma))
        rank = np.trace(sigma) / top
        expected = 196 * (0.09 * top**0.5 / np.linalg.norm(theta) + 2 * top) ** 2 * (rank**2 + math.log(80)) / 300
        got = psi_bound(300, self.cfg, sigma, theta)
        self.assertAlmostEqual(got, expected, delta=1e-12 * expected)

    def test_zero_theta_rejected(self):
        with self.assertRaises(ZeroTheta):
            psi_bound(10, self.cfg, np.eye(2), np.zeros(2))
        with self.assertRaises(ZeroTheta):
            risk_bound_rhs(10, self.cfg, np.eye(2), np.zeros(2), 1e8, 0.1)

    def test_remainder_mu_part_vanishes(self):
        args = (500, self.cfg, self.spec.covariance, self.spec.theta_circ)
        at_inf = risk_remainder(*args, MU_INFINITY, 1e-2)
        self.assertEqual(at_inf.mu_part, 0.0)
        parts = [risk_remainder(*args, mu, 1e-2).mu_part for mu in (1e2, 1e4, 1e6)]
        self.assertGreater(parts[0], parts[1])
        self.assertGreater(parts[1], parts[2])
        self.assertLess(parts[2], 1e-3 * parts[0])
        self.assertEqual(risk_remainder(*args, 1e6, 1e-2).sample_part, at_inf.sample_part)

    def test_risk_bound_decreases_in_n(self):
        values = [
            risk_bound_rhs(n, self.cfg, self.spec.covariance, self.spec.theta_circ, 1e8, 1e-2)
            for n in (100, 200, 400, 800)
        ]
        for before, after in zip(values, values[1:]):
            self.assertGreater(before, after)
        simplified = [
            risk_bound_simplified_rhs(n, self.cfg, self.spec.covariance, self.spec.theta_circ, 1e8, 1e-2)
            for n in (100, 800)
        ]
        self.assertGreater(simplified[0], simplified[1])

    def test_risk_bound_needs_positive_lambda(self):
        with self.assertRaises(ValueError):
            risk_bound_rhs(100, self.cfg, self.spec.covariance, self.spec.theta_circ, 1e8, 0.0)

    def test_bias_remainder_holds_for_best_fit(self):
        spec = validate_spec(DesignSpec.sine(10))
        mu, lam = 1e4, 1e-2
        self.assertTrue(bias_conditions(spec.covariance, spec.theta_circ, mu, lam))
        theta_star = population_fit(spec.population_stats(), Hyperparams(mu=mu, lam=lam, tol=1e-14)).theta
        b = bias_leading_term(spec.covariance, spec.theta_circ, lam)
        gap = np.linalg.norm(theta_star - spec.theta_circ - b)
        self.assertLessEqual(gap, bias_remainder_bound(spec.covariance, spec.theta_circ, mu, lam))
        self.assertEqual(bias_remainder_bound(spec.covariance, spec.theta_circ, MU_INFINITY, lam), 0.0)

    def test_bias_conditions_fail_for_small_mu(self):
        self.assertFalse(bias_conditions(self.spec.covariance, self.spec.theta_circ, 10.0, 1e-2))

    def test_variance_remainder_mixed_term_vanishes(self):
        args = (500, self.cfg, self.spec.covariance, self.spec.theta_circ)
        at_inf = variance_remainder_bound(*args, MU_INFINITY, 1e-2)
        finite = variance_remainder_bound(*args, 1e3, 1e-2)
        self.assertGreater(finite, at_inf)
        self.assertAlmostEqual(variance_remainder_bound(*args, 1e12, 1e-2), at_inf, delta=1e-9 * at_inf)


class ConcentrationBoundTests(SimpleTestCase):

    def setUp(self):
        self.cfg = BoundConfig(c_x=1.0, sigma_psi1=0.5, delta=0.05)

    def test_identity_case(self):
        d, n = 3, 1000
        expected = 4 * math.sqrt((d**2 + math.log(2 / 0.05)) / n)
        got = concentration_bound_cov(np.eye(d), np.eye(d), np.eye(d), self.cfg, n)
        self.assertAlmostEqual(got, expected, delta=1e-12)

    def test_homogeneous_in_a(self):
        rng = np.random.default_rng(3)
        a, b = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
        base = concentration_bound_cov(a, b, np.eye(3), self.cfg, 10_000)
        scaled = concentration_bound_cov(2.5 * a, b, np.eye(3), self.cfg, 10_000)
        self.assertAlmostEqual(scaled, 2.5 * base, delta=1e-12 * scaled)

    def test_matches_independent_transcription(self):
        rng = np.random.default_rng(4)
        a, b = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
        m = rng.standard_normal((3, 3))
        sigma = m @ m.T + 0.1 * np.eye(3)
        root = np.real(sqrtm(sigma))

        def rank(mat):
            gram = root @ mat.T @ mat @ root
            return np.trace(gram) / np.max(np.linalg.eigvalsh(gram))

        n = 10_000
        expected = 4 * np.linalg.norm(a @ root, 2) * np.linalg.norm(b @ root, 2) * math.sqrt(
            (rank(a) * rank(b) + math.log(40)) / n
        )
        got = concentration_bound_cov(a, b, sigma, self.cfg, n)
        self.assertAlmostEqual(got, expected, delta=1e-10 * expected)
        noise_expected = 8 * 0.5 * np.linalg.norm(b @ root, 2) * math.sqrt((rank(b) + math.log(40)) / n)
        noise = concentration_bound_noise(b, sigma, self.cfg, n)
        self.assertAlmostEqual(noise, noise_expected, delta=1e-10 * noise_expected)

    def test_noise_bound_identity_and_scaling(self):
        d = 4
        expected = 8 * 0.5 * math.sqrt((d + math.log(40)) / 400)
        self.assertAlmostEqual(concentration_bound_noise(np.eye(d), np.eye(d), self.cfg, 400), expected, delta=1e-12)
        self.assertAlmostEqual(
            concentration_bound_noise(np.eye(d), np.eye(d), self.cfg, 1600), expected / 2, delta=1e-12
        )

    def test_small_sample_logs_warning(self):
        with self.assertLogs("eioregression.theory", level="WARNING"):
            concentration_bound_cov(np.eye(5), np.eye(5), np.eye(5), self.cfg, 2)


class MiscBoundTests(SimpleTestCase):

    def test_convergence_bound(self):
        cfg = BoundConfig(c_x=1.0, sigma_psi1=0.0, delta=0.05)
        theta = np.array([3.0, 4.0])
        self.assertAlmostEqual(convergence_bound(1, 0.1, 10, cfg, np.eye(2), theta, 0.1), 5.0)
        self.assertAlmostEqual(convergence_bound(3, 0.1, 10, cfg, np.eye(2), theta, 0.1), 5.0e-4)
        with self.assertRaises(ValueError):
            convergence_bound(2, 0.5, 10, cfg, np.eye(2), theta, 0.1)

    def test_variance_orders(self):
        orders = variance_orders(np.ones(4), 0.5, 0.5, 10)
        self.assertEqual(orders.k_tilde, 4)
        self.assertAlmostEqual(orders.ridge_trace, 4 / 2.25 / 10)
        self.assertAlmostEqual(orders.ridge_split, 0.4)
        self.assertAlmostEqual(orders.eio_split, 0.4)

    def test_eio_order_uses_fourth_powers(self):
        spectrum = sine_spectrum(200)
        orders = variance_orders(spectrum, 1e-2, math.sqrt(2e-2), 100)
        self.assertLessEqual(orders.eio_split, orders.ridge_split)

    def test_bound_config_validation(self):
        for kwargs in ({"c_x": 0.0}, {"sigma_psi1": -1.0}, {"delta": 1.0}, {"delta": 0.0}):
            with self.subTest(**kwargs):
                with self.assertRaises(ValueError):
                    BoundConfig(**kwargs)
