"""Closed-form metrics against scalar oracles, the Monte-Carlo estimator,
and the tape-recorded implementations."""

import math

import numpy as np
import pytest

from cfisac import autodiff as ad
from cfisac.autodiff import Tensor
from cfisac.geometry import build_channels, sample_scene, steering
from cfisac.metrics import (BeamformerSet, beam_pattern, mc_sensing_snr,
                            metrics_report, per_ap_power, power_projection,
                            sensing_snr, sinr_per_user, sum_rate)
from cfisac import tapemetrics as tm
from conftest import small_config


def sinr_oracle(h_stacked, f_stacked, sigma2):
    """Term-by-term scalar evaluation of the SINR definition."""
    k_users = h_stacked.shape[0]
    out = np.zeros(k_users)
    for k in range(k_users):
        inner = [sum(h_stacked[k][m].conjugate() * f_stacked[m, s]
                     for m in range(h_stacked.shape[1]))
                 for s in range(k_users + 1)]
        desired = abs(inner[k + 1]) ** 2
        interference = sum(abs(inner[s]) ** 2 for s in range(k_users + 1) if s != k + 1)
        out[k] = desired / (interference + sigma2[k])
    return out


class TestSinr:
    def test_orthogonal_sensing_beam(self):
        h = np.array([[1.0 + 0j, 0.0]])
        f = np.array([[0.0, math.sqrt(2.0)], [1.0, 0.0]], dtype=complex)  # f0=[0,1], f1=[sqrt2,0]
        np.testing.assert_allclose(sinr_per_user(h, f, np.array([1.0])), [2.0])

    def test_zero_beams_zero_sinr(self):
        h = np.ones((2, 4), dtype=complex)
        f = np.zeros((4, 3), dtype=complex)
        np.testing.assert_array_equal(sinr_per_user(h, f, np.ones(2)), [0.0, 0.0])

    def test_random_instance_matches_oracle(self, rng):
        for _ in range(20):
            h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            f = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
            sigma2 = rng.uniform(0.5, 2.0, size=2)
            np.testing.assert_allclose(sinr_per_user(h, f, sigma2),
                                       sinr_oracle(h, f, sigma2), rtol=1e-12)

    def test_shape_errors(self):
        with pytest.raises(ValueError):
            sinr_per_user(np.ones((2, 4), dtype=complex),
                          np.ones((4, 2), dtype=complex), np.ones(2))


class TestSumRate:
    def test_unit_sinrs(self):
        assert sum_rate(np.array([1.0, 1.0])) == 2.0

    def test_zeros(self):
        assert sum_rate(np.zeros(5)) == 0.0

    def test_powers_of_two(self):
        assert abs(sum_rate(np.array([3.0, 7.0, 15.0, 31.0])) - 14.0) < 1e-12

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            sum_rate(np.array([-0.1]))


class TestSensingSnr:
    def test_zero_beams(self):
        cfg = small_config()
        ch = build_channels(cfg, sample_scene(cfg, 1))
        f = np.zeros((2, 4, 3), dtype=complex)
        assert sensing_snr(ch.atilde, f, cfg.chi2, cfg.xi2) == 0.0

    def test_quadratic_scaling(self, rng):
        cfg = small_config()
        ch = build_channels(cfg, sample_scene(cfg, 2))
        f = rng.normal(size=(2, 4, 3)) + 1j * rng.normal(size=(2, 4, 3))
        base = sensing_snr(ch.atilde, f, cfg.chi2, cfg.xi2)
        for c in (0.5, 2.0, 10.0):
            ratio = sensing_snr(ch.atilde, c * f, cfg.chi2, cfg.xi2) / base
            assert abs(ratio - c * c) < 1e-10 * c * c

    def test_scalar_case(self):
        # one AP pair, single antenna: atilde is the 1x1 unit matrix
        atilde = np.ones((1, 1, 1, 1), dtype=complex)
        f = np.array([[[2.0 + 1j, 0.5 - 0.5j]]])
        chi2 = np.array([[0.1]])
        xi2 = np.array([1.0])
        expected = 0.1 * (abs(2 + 1j) ** 2 + abs(0.5 - 0.5j) ** 2)
        assert abs(sensing_snr(atilde, f, chi2, xi2) - expected) < 1e-14


class TestPerApPowerAndProjection:
    def test_two_unit_columns(self):
        f = np.zeros((1, 4, 3), dtype=complex)
        f[0, 0, 0] = 1.0
        f[0, 1, 1] = 1.0
        np.testing.assert_allclose(per_ap_power(f), [2.0])

    def test_random_against_scalar_sum(self, rng):
        f = rng.normal(size=(3, 4, 2)) + 1j * rng.normal(size=(3, 4, 2))
        expected = [sum(abs(x) ** 2 for x in f[i].reshape(-1)) for i in range(3)]
        np.testing.assert_allclose(per_ap_power(f), expected, rtol=1e-12)

    def test_projection_shrinks_exactly(self, rng):
        f = rng.normal(size=(2, 4, 3)) + 1j * rng.normal(size=(2, 4, 3))
        p_max = float(per_ap_power(f)[0]) / 4.0
        out = power_projection(f, p_max)
        assert abs(per_ap_power(out)[0] - p_max) < 1e-12 * p_max
        np.testing.assert_allclose(out[0], f[0] * 0.5, rtol=1e-12)

    def test_projection_identity_and_idempotent(self, rng):
        f = 0.01 * (rng.normal(size=(2, 4, 3)) + 1j * rng.normal(size=(2, 4, 3)))
        out = power_projection(f, 100.0)
        assert np.array_equal(out, f)
        big = 1000.0 * f
        once = power_projection(big, 1.0)
        twice = power_projection(once, 1.0)
        np.testing.assert_array_equal(once, twice)


class TestGlobalPhaseInvariance:
    def test_metrics_unchanged_under_common_phase(self, rng):
        cfg = small_config()
        ch = build_channels(cfg, sample_scene(cfg, 3))
        f = rng.normal(size=(2, 4, 3)) + 1j * rng.normal(size=(2, 4, 3))
        base_sinr = sinr_per_user(ch.stacked_h(), f.reshape(8, 3), cfg.sigma2)
        base_rate = sum_rate(base_sinr)
        base_snr = sensing_snr(ch.atilde, f, cfg.chi2, cfg.xi2)
        for _ in range(100):
            rot = np.exp(1j * rng.uniform(0.0, 2.0 * math.pi)) * f
            sinr = sinr_per_user(ch.stacked_h(), rot.reshape(8, 3), cfg.sigma2)
            np.testing.assert_allclose(sinr, base_sinr, rtol=1e-10)
            assert abs(sum_rate(sinr) - base_rate) < 1e-10 * (1 + abs(base_rate))
            snr = sensing_snr(ch.atilde, rot, cfg.chi2, cfg.xi2)
            assert abs(snr - base_snr) < 1e-10 * (1 + base_snr)


class TestMonteCarloOracle:
    def test_zero_beams_exact_zero(self):
        cfg = small_config()
        ch = build_channels(cfg, sample_scene(cfg, 4))
        f = np.zeros((2, 4, 3), dtype=complex)
        assert mc_sensing_snr(ch.atilde, f, cfg.chi2, cfg.xi2, 1000, seed=1) == 0.0

    def test_scalar_case_within_three_standard_errors(self):
        atilde = np.ones((1, 1, 1, 1), dtype=complex)
        f = np.array([[[1.5 + 0.5j, -0.7 + 0.2j]]])
        chi2 = np.array([[0.1]])
        xi2 = np.array([1.0])
        exact = 0.1 * float(np.sum(np.abs(f) ** 2))
        n = 100000
        est = mc_sensing_snr(atilde, f, chi2, xi2, n, seed=9)
        # each trial is a product of two unit-mean exponential-like factors;
        # bound the SE generously via the empirical ~3x variance factor
        se = 3.0 * exact / math.sqrt(n)
        assert abs(est - exact) < 3.0 * se

    def test_desk_scale_two_percent(self, rng):
        cfg = small_config()
        ch = build_channels(cfg, sample_scene(cfg, 5))
        f = rng.normal(size=(2, 4, 3)) + 1j * rng.normal(size=(2, 4, 3))
        exact = sensing_snr(ch.atilde, f, cfg.chi2, cfg.xi2)
        est = mc_sensing_snr(ch.atilde, f, cfg.chi2, cfg.xi2, 100000, seed=11)
        assert abs(est - exact) / exact < 0.02

    def test_deterministic_given_seed(self, rng):
        cfg = small_config()
        ch = build_channels(cfg, sample_scene(cfg, 6))
        f = rng.normal(size=(2, 4, 3)) + 1j * rng.normal(size=(2, 4, 3))
        a = mc_sensing_snr(ch.atilde, f, cfg.chi2, cfg.xi2, 5000, seed=3)
        b = mc_sensing_snr(ch.atilde, f, cfg.chi2, cfg.xi2, 5000, seed=3)
        assert a == b


class TestBeamPattern:
    def test_matched_beam_peaks_at_target(self):
        m_v, m_h = 2, 4
        phi0, theta0 = 0.4, 1.2
        p = 9.0
        f = math.sqrt(p) * steering(phi0, theta0, m_v, m_h)[:, None]
        phi_axis = np.linspace(-math.pi, math.pi, 73)
        theta_axis = np.linspace(0.0, math.pi, 37)
        phi, theta = [g.reshape(-1) for g in np.meshgrid(phi_axis, theta_axis)]
        gains = beam_pattern(f, phi, theta, m_v, m_h)
        exact = beam_pattern(f, np.array([phi0]), np.array([theta0]), m_v, m_h)
        assert abs(exact[0, 0] - p) < 1e-12
        assert gains[:, 0].max() <= exact[0, 0] + 1e-12

    def test_zero_beams_zero_pattern(self):
        gains = beam_pattern(np.zeros((8, 3), dtype=complex),
                             np.array([0.0]), np.array([1.0]), 2, 4)
        np.testing.assert_array_equal(gains, np.zeros((1, 4)))

    def test_norm_bound(self, rng):
        f = rng.normal(size=(8, 2)) + 1j * rng.normal(size=(8, 2))
        phi = rng.uniform(-math.pi, math.pi, 500)
        theta = rng.uniform(0.0, math.pi, 500)
        gains = beam_pattern(f, phi, theta, 2, 4)
        assert gains[:, 0].max() <= np.sum(np.abs(f) ** 2) + 1e-12


class TestReportAndTapeEquivalence:
    def test_report_rate_consistency(self, rng):
        cfg = small_config()
        ch = build_channels(cfg, sample_scene(cfg, 8))
        f = power_projection(rng.normal(size=(2, 4, 3)) * 3
                             + 1j * rng.normal(size=(2, 4, 3)), cfg.p_max)
        rep = metrics_report(cfg, ch, BeamformerSet(f))
        assert abs(rep.sum_rate - sum_rate(rep.sinr)) < 1e-12
        assert np.all(rep.per_ap_power >= 0.0) and np.all(rep.sinr >= 0.0)

    def test_tape_matches_plain_complex(self, rng):
        """The two metric implementations are mutual oracles (100 instances)."""
        cfg = small_config()
        nm, s = cfg.n_tx * cfg.m_per_ap, cfg.n_streams
        for trial in range(100):
            ch = build_channels(cfg, sample_scene(cfg, 100 + trial))
            f = rng.normal(size=(2, 4, 3)) + 1j * rng.normal(size=(2, 4, 3))
            h = ch.stacked_h()
            f_re, f_im = Tensor(f.real[None]), Tensor(f.imag[None])
            fs_re = ad.reshape(f_re, (1, nm, s))
            fs_im = ad.reshape(f_im, (1, nm, s))
            sinr_t = tm.sinr_tape(h.real[None], h.imag[None], fs_re, fs_im, cfg.sigma2)
            rate_t = tm.sum_rate_tape(sinr_t)
            snr_t = tm.sensing_snr_tape(ch.atilde.real[None], ch.atilde.imag[None],
                                        f_re, f_im, cfg.chi2, cfg.xi2)
            sinr_c = sinr_per_user(h, f.reshape(nm, s), cfg.sigma2)
            np.testing.assert_allclose(sinr_t.data[0], sinr_c, rtol=1e-10)
            assert abs(rate_t.data[0] - sum_rate(sinr_c)) < 1e-10
            snr_c = sensing_snr(ch.atilde, f, cfg.chi2, cfg.xi2)
            assert abs(snr_t.data[0] - snr_c) < 1e-10 * (1 + snr_c)

    def test_tape_projection_matches_plain(self, rng):
        f = 30.0 * (rng.normal(size=(1, 2, 4, 3)) + 1j * rng.normal(size=(1, 2, 4, 3)))
        p_max = 50.0
        out_re, out_im = tm.power_projection_tape(Tensor(f.real), Tensor(f.imag), p_max)
        plain = power_projection(f[0], p_max)
        np.testing.assert_allclose(out_re.data[0] + 1j * out_im.data[0], plain, rtol=1e-12)
