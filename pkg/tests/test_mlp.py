"""Trainable denoiser: regression quality, conditioning, failure modes."""

import numpy as np
import pytest

from diffinfo.channel import LogSnrSampler, noise_weight, signal_weight
from diffinfo.denoise import ConditionId, GmmSpec, Sample, gmm_mmse
from diffinfo.mlp import MlpDenoiser, MlpTrainConfig, TrainingDivergedError, train_mlp
from diffinfo.oracle import mmse_gaussian

SAMPLER = LogSnrSampler()


def mse_at(denoiser, xs, alpha, seed, condition=None):
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(xs), 20_000)
    x = xs[idx]
    eps = rng.standard_normal(x.shape)
    x_a = np.sqrt(signal_weight(alpha)) * x + np.sqrt(noise_weight(alpha)) * eps
    pred = denoiser.predict_eps(x_a, alpha, condition)
    per_draw = ((eps - pred) ** 2).sum(axis=1)
    return per_draw.mean(), per_draw.std(ddof=1) / np.sqrt(per_draw.size)


@pytest.fixture(scope="module")
def gaussian_mlp():
    rng = np.random.default_rng(0)
    xs = rng.standard_normal((2048, 1))
    dataset = [Sample(x=row) for row in xs]
    denoiser, trace = train_mlp(dataset, MlpTrainConfig(n_steps=8000), SAMPLER, seed=1)
    return denoiser, trace, xs


class TestGaussianTraining:
    def test_loss_trace_shape_and_improvement(self, gaussian_mlp):
        _, trace, _ = gaussian_mlp
        assert trace.shape == (8000,)
        assert trace[-500:].mean() < trace[:500].mean()

    @pytest.mark.parametrize("alpha", [-2.0, 0.0, 2.0])
    def test_per_alpha_mse_within_ten_percent(self, gaussian_mlp, alpha):
        denoiser, _, xs = gaussian_mlp
        mse, _ = mse_at(denoiser, xs, alpha, seed=2)
        target = mmse_gaussian(1.0, alpha).value
        assert mse == pytest.approx(target, rel=0.10)

    @pytest.mark.parametrize("alpha", [-2.0, 0.0, 2.0])
    def test_never_beats_analytic_mmse(self, gaussian_mlp, alpha):
        denoiser, _, xs = gaussian_mlp
        mse, se = mse_at(denoiser, xs, alpha, seed=3)
        assert mse >= mmse_gaussian(1.0, alpha).value - 3 * se


class TestZeroVarianceDataset:
    def test_noise_recovered_when_data_is_deterministic(self):
        dataset = [Sample(x=np.array([1.5])) for _ in range(256)]
        denoiser, _ = train_mlp(dataset, MlpTrainConfig(n_steps=5000), SAMPLER, seed=4)
        xs = np.full((256, 1), 1.5)
        errors = {}
        for alpha in (0.0, 2.0, 4.0):
            errors[alpha], _ = mse_at(denoiser, xs, alpha, seed=5)
            assert errors[alpha] < 0.02  # optimal error is exactly zero
        assert errors[4.0] < 0.01


class TestConditionalTraining:
    def test_conditional_mse_at_most_unconditional(self):
        spec = GmmSpec(
            weights=[0.5, 0.5],
            means=[[-2.0], [2.0]],
            covariances=[[[1.0]], [[1.0]]],
            condition_map={"neg": (0,), "pos": (1,)},
        )
        rng = np.random.default_rng(6)
        x, comps = spec.sample(4096, rng)
        labels = np.array(["neg", "pos"])[comps]
        dataset = [Sample(x=xi, condition=ConditionId(label=l)) for xi, l in zip(x, labels)]
        denoiser, _ = train_mlp(dataset, MlpTrainConfig(n_steps=10_000), SAMPLER, seed=7)
        closed = gmm_mmse(spec)
        for alpha in (-2.0, 0.0, 2.0):
            eval_rng = np.random.default_rng(int(10 * alpha) + 100)
            eps = eval_rng.standard_normal(x.shape)
            x_a = np.sqrt(signal_weight(alpha)) * x + np.sqrt(noise_weight(alpha)) * eps
            err_u = ((eps - denoiser.predict_eps(x_a, alpha)) ** 2).sum(axis=1)
            err_c = np.empty_like(err_u)
            for label in ("neg", "pos"):
                rows = labels == label
                pred = denoiser.predict_eps(x_a[rows], alpha, ConditionId(label=label))
                err_c[rows] = ((eps[rows] - pred) ** 2).sum(axis=1)
            diff = err_c - err_u
            assert diff.mean() <= 3 * diff.std(ddof=1) / np.sqrt(diff.size)
            # the closed-form mixture denoiser lower-bounds both, up to MC noise
            err_opt = ((eps - closed.predict_eps(x_a, alpha)) ** 2).sum(axis=1)
            gap = err_u - err_opt
            assert gap.mean() >= -3 * gap.std(ddof=1) / np.sqrt(gap.size)


class TestFailureModes:
    def test_non_finite_data_aborts_with_step_diagnostic(self):
        dataset = [Sample(x=np.array([np.inf])) for _ in range(32)]
        with pytest.raises(TrainingDivergedError, match="step"):
            train_mlp(dataset, MlpTrainConfig(n_steps=50), SAMPLER, seed=8)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            train_mlp([], MlpTrainConfig(n_steps=10), SAMPLER, seed=0)

    def test_inconsistent_dimensions_rejected(self):
        dataset = [Sample(x=np.zeros(2)), Sample(x=np.zeros(3))]
        with pytest.raises(ValueError, match="dimension"):
            train_mlp(dataset, MlpTrainConfig(n_steps=10), SAMPLER, seed=0)

    def test_unknown_condition_token_rejected_at_inference(self, gaussian_mlp):
        denoiser, _, _ = gaussian_mlp
        with pytest.raises(ValueError, match="vocabulary"):
            denoiser.predict_eps(np.zeros(1), 0.0, ConditionId(label="nope"))


class TestDeterminism:
    def test_same_seed_same_parameters(self):
        dataset = [Sample(x=np.array([float(i % 5)])) for i in range(64)]
        cfg = MlpTrainConfig(n_steps=200)
        d1, t1 = train_mlp(dataset, cfg, SAMPLER, seed=9)
        d2, t2 = train_mlp(dataset, cfg, SAMPLER, seed=9)
        np.testing.assert_array_equal(t1, t2)
        for (w1, b1), (w2, b2) in zip(d1.layers, d2.layers):
            np.testing.assert_array_equal(w1, w2)
            np.testing.assert_array_equal(b1, b2)

    def test_predictions_deterministic(self, gaussian_mlp):
        denoiser, _, _ = gaussian_mlp
        x_a = np.linspace(-2, 2, 7)[:, None]
        np.testing.assert_array_equal(
            denoiser.predict_eps(x_a, 0.3), denoiser.predict_eps(x_a, 0.3)
        )
