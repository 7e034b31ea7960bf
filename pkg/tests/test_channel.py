import unittest
import warnings

import numpy as np
from scipy import special

from src.channel import (
    IMPERFECT,
    PERFECT,
    ChannelParams,
    EnergyVector,
    PeakConstraint,
    SignalingConfig,
    draw_outputs,
    log_f_imperfect,
    log_f_perfect,
    log_mixture,
    log_mixture_density,
    log_output_density,
    on_tone_moments,
    sample_output_given_input,
)
from src.exceptions import DomainError
from src.numerics import gauss_laguerre


class TestChannelParams(unittest.TestCase):

    def test_from_rician_k(self):
        ch = ChannelParams.from_rician_k(1.0)
        self.assertAlmostEqual(ch.d_mag_sq, 0.5)
        self.assertAlmostEqual(ch.gamma_sq, 0.5)
        self.assertAlmostEqual(ch.rician_k(), 1.0)

        unfaded = ChannelParams.from_rician_k(float("inf"))
        self.assertTrue(unfaded.is_unfaded())
        self.assertEqual(unfaded.mean_power(), 1.0)

    def test_rayleigh_kurtosis(self):
        self.assertAlmostEqual(ChannelParams(0.0, 1.0).kurtosis(), 2.0)
        self.assertAlmostEqual(ChannelParams(1.0, 0.0).kurtosis(), 1.0)

    def test_invalid_parameters(self):
        with self.assertRaises(DomainError):
            ChannelParams(-0.1, 1.0)
        with self.assertRaises(DomainError):
            ChannelParams(0.0, 0.0)
        with self.assertRaises(DomainError):
            ChannelParams.from_rician_k(-1.0)


class TestSignaling(unittest.TestCase):

    def test_peak_snr_and_par(self):
        cfg = SignalingConfig(m=2, nu=0.25, snr=0.5)
        self.assertAlmostEqual(cfg.alpha_sq(), 2.0)
        self.assertAlmostEqual(cfg.par(), 4.0)

    def test_invalid_signaling(self):
        with self.assertRaises(DomainError):
            SignalingConfig(2, 0.0, 1.0)
        with self.assertRaises(DomainError):
            SignalingConfig(0, 1.0, 1.0)
        with self.assertRaises(DomainError):
            SignalingConfig(2, 1.0, -1.0)

    def test_fixed_peak_duty_factor(self):
        regime = PeakConstraint.fixed_peak(2.0)
        self.assertAlmostEqual(regime.duty_factor(1.0), 0.5)
        cfg = regime.signaling(3, 0.5)
        self.assertAlmostEqual(cfg.alpha_sq(), 2.0)
        with self.assertRaises(DomainError):
            regime.duty_factor(3.0)

    def test_fixed_par_needs_duty_factor(self):
        with self.assertRaises(DomainError):
            PeakConstraint.fixed_par().duty_factor(1.0)
        with self.assertRaises(DomainError):
            PeakConstraint.fixed_peak(0.0)


class TestToneLikelihoods(unittest.TestCase):

    def test_perfect_csi_value(self):
        cfg = SignalingConfig(2, 1.0, 1.0)
        expected = -1.0 + np.log(special.i0(2.0))
        self.assertAlmostEqual(log_f_perfect(1.0, 1.0, cfg), expected, places=12)

    def test_rayleigh_value(self):
        ch = ChannelParams(0.0, 1.0)
        cfg = SignalingConfig(2, 1.0, 1.0)
        self.assertAlmostEqual(log_f_imperfect(2.0, ch, cfg), 1.0 - np.log(2.0), places=12)

    def test_zero_snr_is_noise_only(self):
        cfg = SignalingConfig(2, 1.0, 0.0)
        r = np.array([0.0, 0.5, 3.0])
        np.testing.assert_array_equal(log_f_imperfect(r, ChannelParams(0.5, 0.5), cfg), np.zeros(3))

    def test_densities_normalize(self):
        rule = gauss_laguerre(64)
        cfg = SignalingConfig(2, 1.0, 0.5)
        for ch in (ChannelParams(0.5, 0.5), ChannelParams(0.0, 1.0), ChannelParams(1.0, 0.0)):
            total = rule.integrate(lambda r: np.exp(log_f_imperfect(r, ch, cfg)))
            self.assertAlmostEqual(total, 1.0, delta=1e-8)
        total = rule.integrate(lambda r: np.exp(log_f_perfect(r, 0.8, cfg)))
        self.assertAlmostEqual(total, 1.0, delta=1e-8)

    def test_unfaded_receivers_agree(self):
        ch = ChannelParams(1.0, 0.0)
        cfg = SignalingConfig(2, 0.5, 0.7)
        r = np.linspace(0.0, 10.0, 21)
        np.testing.assert_allclose(log_f_imperfect(r, ch, cfg), log_f_perfect(r, 1.0, cfg), atol=1e-12)

    def test_negative_energy_rejected(self):
        with self.assertRaises(DomainError):
            log_f_imperfect(-1.0, ChannelParams(0.5, 0.5), SignalingConfig(2, 1.0, 1.0))


class TestMixture(unittest.TestCase):

    def test_silent_tones_give_zero(self):
        self.assertEqual(log_mixture(np.zeros(4), 0.3), 0.0)

    def test_small_mixtures(self):
        self.assertAlmostEqual(log_mixture(np.array([np.log(2.0), 0.0]), 1.0), np.log(1.5), places=14)
        self.assertAlmostEqual(log_mixture(np.log([2.0, 2.0]), 0.5), np.log(1.5), places=14)

    def test_overflowing_tone(self):
        self.assertAlmostEqual(log_mixture(np.array([1000.0, 0.0]), 1.0), 1000.0 - np.log(2.0), places=9)

    def test_vanishing_mixture(self):
        self.assertAlmostEqual(log_mixture(np.array([-50.0, -50.0]), 1.0), -50.0, places=9)

    def test_saturated_tones_are_silent(self):
        rows = np.array([[-50.0, -50.0], [-800.0, -800.0]])
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            values = log_mixture(rows, 1.0)
        np.testing.assert_allclose(values, [-50.0, -800.0], rtol=1e-12)

    def test_rows_match_scalar_evaluation(self):
        rows = np.array([[0.1, -0.2], [1000.0, 0.0], [-50.0, -50.0]])
        batch = log_mixture(rows, 1.0)
        for row, value in zip(rows, batch):
            self.assertAlmostEqual(value, log_mixture(row, 1.0), places=12)

    def test_density_checks_lengths(self):
        with self.assertRaises(DomainError):
            log_mixture_density(EnergyVector((1.0, 2.0, 3.0)), np.zeros(2), 0.5)
        with self.assertRaises(DomainError):
            log_mixture_density(None, np.zeros(2), 0.0)

    def test_output_density_reinstates_noise_factor(self):
        value = log_output_density(np.array([1.0, 2.0]), np.zeros(2), 0.5)
        self.assertAlmostEqual(value, -3.0, places=14)


class TestOutputDraws(unittest.TestCase):

    def setUp(self):
        self.ch = ChannelParams(0.5, 0.5)
        self.cfg = SignalingConfig(2, 0.5, 1.0)

    def test_silent_symbol_is_exponential(self):
        r = draw_outputs(0, self.ch, self.cfg, IMPERFECT, 100_000, np.random.default_rng(1))
        self.assertEqual(r.shape, (100_000, 2))
        sigma = 1.0 / np.sqrt(r.size)
        self.assertLess(abs(r.mean() - 1.0), 4 * sigma)

    def test_on_tone_mean(self):
        n = 100_000
        r = draw_outputs(1, self.ch, self.cfg, IMPERFECT, n, np.random.default_rng(2))
        scale, lam = on_tone_moments(self.ch, self.cfg)
        # R = scale * |sqrt(lam) + w|^2
        expected = scale * (lam + 1.0)
        sigma = scale * np.sqrt(1.0 + 2.0 * lam) / np.sqrt(n)
        self.assertLess(abs(r[:, 0].mean() - expected), 4 * sigma)

    def test_common_random_numbers(self):
        silent = draw_outputs(0, self.ch, self.cfg, IMPERFECT, 1000, np.random.default_rng(3))
        on = draw_outputs(1, 1.0, self.cfg, PERFECT, 1000, np.random.default_rng(3))
        np.testing.assert_array_equal(silent[:, 1], on[:, 1])

    def test_invalid_symbol(self):
        with self.assertRaises(DomainError):
            draw_outputs(3, self.ch, self.cfg, IMPERFECT, 10, np.random.default_rng(0))

    def test_single_output(self):
        r = sample_output_given_input(2, self.ch, self.cfg, IMPERFECT, np.random.default_rng(4))
        self.assertIsInstance(r, EnergyVector)
        self.assertEqual(len(r), 2)


if __name__ == '__main__':
    unittest.main()
