import math

import numpy as np
from django.test import SimpleTestCase

from eioregression.exceptions import (
    DimensionMismatch,
    EioError,
    InvalidHyperparams,
    NonfiniteValues,
    NonmonotoneSpectrum,
    NonorthogonalEigvecs,
)
from eioregression.models import (
    MU_INFINITY,
    Dataset,
    DesignKind,
    DesignSpec,
    Hyperparams,
    SufficientStats,
    Triplet,
    is_infinite_mu,
    power_decay_theta,
    sine_spectrum,
    validate_spec,
)


class ValidateSpecTests(SimpleTestCase):

    def test_sine_design_derives_spectrum(self):
        spec = validate_spec(DesignSpec.sine(4))
        k = np.arange(1, 5, dtype=float)
        np.testing.assert_allclose(spec.spectrum, k ** -0.25 / 2.0)
        np.testing.assert_allclose(spec.covariance, np.diag(k ** -0.25 / 2.0))
        np.testing.assert_allclose(spec.theta_circ, k ** -3.0)
        self.assertEqual(spec.kind, DesignKind.SINE_FEATURE)
        self.assertEqual(spec.noise_std, 0.09)

    def test_sine_design_ignores_supplied_spectrum(self):
        raw = DesignSpec(kind=DesignKind.SINE_FEATURE, dim=3, theta_circ=[1, 0, 0], spectrum=[5, 5, 5])
        spec = validate_spec(raw)
        np.testing.assert_allclose(spec.spectrum, sine_spectrum(3))

    def test_zero_dim_rejected(self):
        with self.assertRaisesRegex(DimensionMismatch, "dim must be ≥ 1"):
            validate_spec(DesignSpec(kind=DesignKind.SINE_FEATURE, dim=0, theta_circ=[]))

    def test_theta_length_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            validate_spec(DesignSpec(kind=DesignKind.SINE_FEATURE, dim=3, theta_circ=[1.0, 2.0]))

    def test_increasing_spectrum_rejected(self):
        raw = DesignSpec(kind=DesignKind.GAUSSIAN_SPECTRUM, dim=2, theta_circ=[1, 1], spectrum=[1.0, 2.0])
        with self.assertRaises(NonmonotoneSpectrum):
            validate_spec(raw)

    def test_negative_spectrum_rejected(self):
        raw = DesignSpec(kind=DesignKind.GAUSSIAN_SPECTRUM, dim=2, theta_circ=[1, 1], spectrum=[1.0, -0.1])
        with self.assertRaises(NonmonotoneSpectrum):
            validate_spec(raw)

    def test_missing_spectrum_for_gaussian(self):
        with self.assertRaises(DimensionMismatch):
            validate_spec(DesignSpec(kind=DesignKind.GAUSSIAN_SPECTRUM, dim=2, theta_circ=[1, 1]))

    def test_nonorthogonal_eigvecs_rejected(self):
        raw = DesignSpec(
            kind=DesignKind.GAUSSIAN_SPECTRUM,
            dim=2,
            theta_circ=[1, 1],
            spectrum=[2.0, 1.0],
            eigvecs=[[1.0, 0.1], [0.0, 1.0]],
        )
        with self.assertRaises(NonorthogonalEigvecs):
            validate_spec(raw)

    def test_nonfinite_theta_rejected(self):
        raw = DesignSpec(kind=DesignKind.SINE_FEATURE, dim=2, theta_circ=[1.0, math.nan])
        with self.assertRaises(NonfiniteValues):
            validate_spec(raw)

    def test_negative_noise_rejected(self):
        with self.assertRaises(InvalidHyperparams):
            validate_spec(DesignSpec.sine(3, noise_std=-1.0))

    def test_errors_are_value_errors(self):
        self.assertTrue(issubclass(EioError, ValueError))
        with self.assertRaises(ValueError):
            validate_spec(DesignSpec(kind=DesignKind.SINE_FEATURE, dim=-1, theta_circ=[]))

    def test_validated_arrays_are_read_only(self):
        spec = validate_spec(DesignSpec.sine(3))
        self.assertFalse(spec.theta_circ.flags.writeable)
        self.assertFalse(spec.covariance.flags.writeable)

    def test_from_covariance_sorts_and_reconstructs(self):
        rng = np.random.default_rng(3)
        m = rng.standard_normal((4, 4))
        sigma = m @ m.T
        spec = validate_spec(DesignSpec.from_covariance(sigma, np.ones(4), noise_std=0.5))
        self.assertEqual(spec.kind, DesignKind.EXPLICIT_COVARIANCE)
        self.assertTrue(np.all(np.diff(spec.spectrum) <= 0.0))
        np.testing.assert_allclose(spec.covariance, sigma, atol=1e-10)

    def test_from_covariance_rejects_non_square(self):
        with self.assertRaises(DimensionMismatch):
            DesignSpec.from_covariance(np.ones((2, 3)), np.ones(2))

    def test_population_stats(self):
        spec = validate_spec(DesignSpec.sine(5))
        pop = spec.population_stats()
        np.testing.assert_allclose(pop.ez, spec.covariance @ spec.theta_circ)
        stats = pop.as_sufficient_stats()
        self.assertEqual(stats.dim, 5)


class ValueTypeTests(SimpleTestCase):

    def test_power_decay_theta(self):
        np.testing.assert_allclose(power_decay_theta(3), [1.0, 1 / 8, 1 / 27])

    def test_hyperparams_defaults(self):
        hp = Hyperparams()
        self.assertEqual(hp.mu, 1e8)
        self.assertEqual(hp.max_iter, 200)

    def test_hyperparams_accepts_infinite_mu(self):
        hp = Hyperparams(mu=MU_INFINITY)
        self.assertTrue(is_infinite_mu(hp.mu))
        self.assertFalse(is_infinite_mu(1e300))

    def test_hyperparams_validation(self):
        for kwargs in ({"mu": 0.0}, {"lam": -1.0}, {"tau": -0.5}, {"max_iter": 0}, {"tol": 0.0}, {"lam": math.inf}):
            with self.subTest(**kwargs):
                with self.assertRaises(InvalidHyperparams):
                    Hyperparams(**kwargs)

    def test_dataset_shape_checks(self):
        with self.assertRaises(DimensionMismatch):
            Dataset(x=np.ones((2, 3)), y=np.ones(2))
        with self.assertRaises(DimensionMismatch):
            Dataset(x=np.ones((2, 3)), y=np.ones(3), noise=np.ones(2))
        data = Dataset(x=np.ones((2, 3)), y=np.ones(3))
        self.assertEqual((data.dim, data.n), (2, 3))

    def test_sufficient_stats_shape_check(self):
        with self.assertRaises(DimensionMismatch):
            SufficientStats(z=np.ones(2), sigma_hat=np.eye(3))

    def test_triplet_shape_check(self):
        with self.assertRaises(DimensionMismatch):
            Triplet(theta=np.ones(2), eta=np.ones(3), a=np.eye(2))
