"""Noise channel and importance-sampling distribution."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffinfo.channel import LogSnr, LogSnrSampler, corrupt, noise_weight, signal_weight

EPS = np.finfo(float).eps


class TestWeights:
    def test_pair_sums_to_one_to_machine_epsilon(self):
        rng = np.random.default_rng(0)
        alphas = rng.uniform(-40, 40, 1000)
        total = signal_weight(alphas) + noise_weight(alphas)
        assert np.abs(total - 1.0).max() <= EPS

    @given(st.floats(min_value=-60, max_value=60))
    def test_pair_sums_to_one_property(self, alpha):
        assert abs(signal_weight(alpha) + noise_weight(alpha) - 1.0) <= EPS

    def test_snr_positive_and_monotone(self):
        levels = [LogSnr(a) for a in (-10.0, 0.0, 3.0)]
        snrs = [lvl.snr for lvl in levels]
        assert all(s > 0 for s in snrs)
        assert snrs == sorted(snrs)
        assert LogSnr(0.0).signal_weight == pytest.approx(0.5)


class TestCorrupt:
    def test_high_snr_returns_x(self):
        x = np.array([0.3, -1.2, 5.0])
        eps = np.array([1.0, -1.0, 2.0])
        out = corrupt(x, LogSnr(40.0), eps)
        np.testing.assert_allclose(out.x_alpha, x, atol=1e-8)

    def test_alpha_zero_mixes_equally(self):
        out = corrupt([1.0, 1.0], 0.0, [1.0, -1.0])
        np.testing.assert_allclose(out.x_alpha, [np.sqrt(2.0), 0.0], atol=1e-15)

    def test_zero_signal_is_scaled_noise(self):
        eps = np.array([0.4, -0.7])
        for alpha in (-3.0, 0.0, 2.0):
            out = corrupt(np.zeros(2), alpha, eps)
            np.testing.assert_allclose(out.x_alpha, np.sqrt(noise_weight(alpha)) * eps, atol=1e-15)

    def test_reconstruction_identity(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(5)
        eps = rng.standard_normal(5)
        out = corrupt(x, 1.3, eps)
        recovered = (out.x_alpha - np.sqrt(signal_weight(1.3)) * x) / np.sqrt(noise_weight(1.3))
        np.testing.assert_allclose(recovered, eps, atol=1e-12)

    def test_dimension_mismatch_names_both_dimensions(self):
        with pytest.raises(ValueError, match=r"dimension 3.*dimension 2"):
            corrupt([1.0, 2.0, 3.0], 0.0, [1.0, 2.0])

    def test_internal_draw_needs_rng_and_is_deterministic(self):
        with pytest.raises(ValueError, match="rng"):
            corrupt([1.0], 0.0)
        a = corrupt([1.0, 2.0], 0.0, rng=7)
        b = corrupt([1.0, 2.0], 0.0, rng=7)
        np.testing.assert_array_equal(a.eps, b.eps)

    @given(
        st.floats(min_value=-8, max_value=8),
        st.floats(min_value=-5, max_value=5),
        st.floats(min_value=-5, max_value=5),
        st.floats(min_value=-5, max_value=5),
    )
    @settings(max_examples=50)
    def test_affine_in_signal(self, scale, alpha, x0, e0):
        x = np.array([x0])
        eps = np.array([e0])
        base = corrupt(np.zeros(1), alpha, eps).x_alpha
        lhs = corrupt(scale * x, alpha, eps).x_alpha - base
        rhs = scale * (corrupt(x, alpha, eps).x_alpha - base)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


class TestLogSnrSampler:
    def test_default_draws_span_minus5_to_7(self):
        sampler = LogSnrSampler(loc=1.0, scale=2.0, clip=3.0, n_draws=5000)
        alphas, _ = sampler.sample(0)
        assert sampler.support == (-5.0, 7.0)
        assert alphas.min() >= -5.0 and alphas.max() <= 7.0

    def test_deterministic_given_seed(self):
        sampler = LogSnrSampler(n_draws=64)
        a1, w1 = sampler.sample(42)
        a2, w2 = sampler.sample(42)
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(w1, w2)

    def test_constant_integrand_gives_interval_length(self):
        sampler = LogSnrSampler(n_draws=20_000)
        _, weights = sampler.sample(1)
        estimate = weights.mean()
        se = weights.std(ddof=1) / np.sqrt(weights.size)
        assert abs(estimate - 12.0) <= 3 * se

    def test_empirical_mean_matches_loc(self):
        sampler = LogSnrSampler(n_draws=100_000)
        alphas, _ = sampler.sample(2)
        assert abs(alphas.mean() - 1.0) <= 0.05

    def test_sigmoid_integral_matches_quadrature(self):
        sampler = LogSnrSampler(n_draws=10_000)
        alphas, weights = sampler.sample(3)
        values = weights * signal_weight(alphas)
        estimate = values.mean()
        se = values.std(ddof=1) / np.sqrt(values.size)
        grid = np.linspace(-5.0, 7.0, 10_001)
        trapezoid = getattr(np, "trapezoid", np.trapz)
        reference = trapezoid(signal_weight(grid), grid)
        assert abs(estimate - reference) <= 3 * se

    def test_pdf_support_and_positivity(self):
        sampler = LogSnrSampler()
        inside = np.linspace(-5.0, 7.0, 101)
        assert np.all(sampler.pdf(inside) > 0)
        assert sampler.pdf(-5.001) == 0.0
        assert sampler.pdf(7.001) == 0.0

    @pytest.mark.parametrize(
        "kwargs", [{"scale": 0.0}, {"scale": -1.0}, {"clip": 0.0}, {"clip": -2.0}, {"n_draws": 0}]
    )
    def test_invalid_configuration_rejected(self, kwargs):
        with pytest.raises(ValueError):
            LogSnrSampler(**kwargs)
