import unittest

import numpy as np
from scipy import special, stats

from src.channel import ChannelParams
from src.capacity import c_inf_oofpsk_imperfect
from src.exceptions import ConfigurationError, DomainError, EstimationError
from src.numerics import (
    METHOD_MC,
    Estimate,
    McConfig,
    central_difference,
    complex_gaussian_rule,
    exp1_iid_vector,
    gauss_hermite,
    gauss_laguerre,
    log_bessel_i0,
    mc_expectation,
    mc_mean,
    noncentral_chisq,
    z_score,
)


class TestLogBesselI0(unittest.TestCase):

    def test_known_values(self):
        self.assertEqual(log_bessel_i0(0.0), 0.0)
        self.assertAlmostEqual(log_bessel_i0(1.0), 0.235914358, places=8)
        self.assertAlmostEqual(log_bessel_i0(2.0), np.log(special.i0(2.0)), places=12)

    def test_matches_direct_evaluation_across_crossover(self):
        x = np.array([0.5, 1.9999, 2.0, 2.0001, 5.0, 50.0])
        expected = np.log(special.i0(x))
        np.testing.assert_allclose(log_bessel_i0(x), expected, rtol=1e-12)

    def test_small_argument_keeps_relative_precision(self):
        # log I0(x) ~ x^2/4 near zero
        self.assertAlmostEqual(log_bessel_i0(1e-6) / 2.5e-13, 1.0, places=9)

    def test_large_argument_does_not_overflow(self):
        x = 700.0
        u = 1.0 / (8.0 * x)
        asymptotic = x - 0.5 * np.log(2.0 * np.pi * x) + np.log1p(u + 4.5 * u ** 2 + 37.5 * u ** 3)
        self.assertAlmostEqual(log_bessel_i0(x), asymptotic, places=8)
        self.assertTrue(np.isfinite(log_bessel_i0(1e5)))

    def test_scalar_in_scalar_out(self):
        self.assertIsInstance(log_bessel_i0(3.0), float)
        self.assertEqual(log_bessel_i0(np.array([1.0, 3.0])).shape, (2,))

    def test_invalid_arguments(self):
        with self.assertRaises(DomainError):
            log_bessel_i0(-1.0)
        with self.assertRaises(DomainError):
            log_bessel_i0(float("nan"))


class TestQuadrature(unittest.TestCase):

    def test_laguerre_weights_and_nodes(self):
        for order in (4, 16, 64):
            rule = gauss_laguerre(order)
            self.assertEqual(len(rule.nodes), order)
            self.assertAlmostEqual(rule.weights.sum(), 1.0, places=12)
            self.assertTrue(np.all(np.diff(rule.nodes) > 0))

    def test_laguerre_polynomial_exactness(self):
        rule = gauss_laguerre(4)
        # E{X^3} = 3! for X ~ Exp(1)
        self.assertAlmostEqual(rule.integrate(lambda x: x ** 3), 6.0, places=10)

    def test_hermite_integrates_gaussian_moments(self):
        rule = gauss_hermite(10)
        self.assertAlmostEqual(rule.integrate(lambda x: x ** 2) / np.sqrt(np.pi), 0.5, places=12)

    def test_complex_gaussian_rule_moments(self):
        z, w = complex_gaussian_rule(8)
        self.assertAlmostEqual(w.sum(), 1.0, places=12)
        self.assertAlmostEqual(np.dot(w, np.abs(z) ** 2), 1.0, places=12)
        self.assertAlmostEqual(np.dot(w, np.abs(z) ** 4), 2.0, places=12)

    def test_invalid_order(self):
        for order in (0, 257, 2.5):
            with self.assertRaises(ConfigurationError):
                gauss_laguerre(order)


class TestMonteCarlo(unittest.TestCase):

    def setUp(self):
        self.cfg = McConfig(sample_count=100_000, seed=11, batch_size=25_000)

    def _exp_mean(self, cfg):
        return mc_expectation(exp1_iid_vector(1), lambda x: x[:, 0], cfg)

    def test_exponential_mean(self):
        estimate = self._exp_mean(self.cfg)
        self.assertEqual(estimate.method, METHOD_MC)
        self.assertLess(abs(estimate.value - 1.0), 4 * estimate.std_error)

    def test_same_seed_reproduces(self):
        self.assertEqual(self._exp_mean(self.cfg), self._exp_mean(self.cfg))

    def test_result_independent_of_worker_count(self):
        def draw(rng, n):
            return rng.standard_exponential(n)

        single = mc_mean(draw, self.cfg, workers=1)
        pooled = mc_mean(draw, self.cfg, workers=4)
        self.assertEqual(single.value, pooled.value)
        self.assertEqual(single.std_error, pooled.std_error)

    def test_doubling_samples_shrinks_std_error(self):
        small = self._exp_mean(McConfig(100_000, 5, 25_000))
        large = self._exp_mean(McConfig(200_000, 5, 25_000))
        ratio = large.std_error / small.std_error
        self.assertGreater(ratio, 0.6)
        self.assertLess(ratio, 0.9)

    def test_noncentral_chisq_mean(self):
        estimate = mc_expectation(noncentral_chisq(2.0, 1.5), lambda r: r, self.cfg)
        self.assertLess(abs(estimate.value - 3.5), 4 * estimate.std_error)

    def test_noncentral_chisq_law(self):
        r = noncentral_chisq(2.0, 1.5).draw(np.random.default_rng(11), 5000)
        law = stats.ncx2(df=2, nc=2.0 * 2.0 / 1.5, scale=1.5 / 2.0)
        self.assertGreater(stats.kstest(r, law.cdf).pvalue, 1e-3)

    def test_non_finite_sample_reports_index(self):
        def draw(rng, n):
            return np.where(np.arange(n) == 5, np.inf, 1.0)

        with self.assertRaises(EstimationError) as ctx:
            mc_mean(draw, McConfig(30, 1, 10), workers=1)
        self.assertEqual(ctx.exception.sample_index, 5)

    def test_invalid_config(self):
        with self.assertRaises(ConfigurationError):
            McConfig(sample_count=0)
        with self.assertRaises(ConfigurationError):
            McConfig(sample_count=10, batch_size=0)

    def test_single_sample_has_infinite_std_error(self):
        estimate = self._exp_mean(McConfig(1, 3, 1))
        self.assertTrue(np.isinf(estimate.std_error))


class TestEstimate(unittest.TestCase):

    def test_exact_estimates_carry_no_error(self):
        with self.assertRaises(ConfigurationError):
            Estimate(1.0, 0.1, "quadrature")
        self.assertEqual(Estimate.exact(2.0).std_error, 0.0)

    def test_z_score(self):
        estimate = Estimate(1.3, 0.3, METHOD_MC)
        self.assertAlmostEqual(z_score(estimate, 1.0, 0.4), 0.6, places=12)


class TestCentralDifference(unittest.TestCase):

    def test_first_derivative_of_square(self):
        self.assertAlmostEqual(central_difference(lambda x: x * x, 1.0, 1e-4, 1), 2.0, delta=1e-7)

    def test_one_sided_second_derivative_at_zero(self):
        self.assertAlmostEqual(central_difference(lambda x: x * x, 0.0, 1e-3, 2, one_sided=True), 2.0, delta=1e-5)

    def test_slope_of_oofpsk_limit_at_zero_snr(self):
        ch = ChannelParams(d_mag_sq=1.0, gamma_sq=1.0)
        slope = central_difference(lambda s: c_inf_oofpsk_imperfect(ch, 1.0, s).nats_per_symbol, 0.0, 1e-4, 1)
        # the slope at zero SNR is the specular power
        self.assertAlmostEqual(slope, 1.0, delta=1e-4)

    def test_non_finite_value_raises(self):
        with self.assertRaises(EstimationError):
            central_difference(lambda x: np.log(x - 1.0), 1.0, 0.1, 1)

    def test_invalid_step(self):
        with self.assertRaises(DomainError):
            central_difference(lambda x: x, 1.0, 0.0, 1)


if __name__ == '__main__':
    unittest.main()
