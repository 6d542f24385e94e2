"""Trainable noise predictor: a small fully-connected network fit with Adam.

The network regresses eps from the concatenation of the corrupted point, a
fixed sinusoidal embedding of the log-SNR, and a multi-hot encoding of the
condition tokens (all zeros when unconditional).  A fraction of each batch is
trained with the condition encoding zeroed out, so a single network serves
both the conditional and the unconditional estimator terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import LogSnrSampler, as_alpha, noise_weight, signal_weight
from .denoise import ConditionId, Sample


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss becomes non-finite."""


@dataclass(frozen=True)
class MlpTrainConfig:
    hidden: tuple[int, ...] = (64, 64)
    n_steps: int = 20_000
    batch_size: int = 128
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    condition_drop: float = 0.2
    n_frequencies: int = 8
    frequency_base: float = 0.25

    def __post_init__(self):
        if self.n_steps < 1 or self.batch_size < 1:
            raise ValueError("n_steps and batch_size must be positive")
        if not 0.0 <= self.condition_drop <= 1.0:
            raise ValueError(f"condition_drop must lie in [0, 1], got {self.condition_drop}")


def alpha_embedding(alpha, n_frequencies: int = 8, base: float = 0.25) -> np.ndarray:
    """Sinusoidal features of the log-SNR: sin/cos at geometrically spaced frequencies."""
    freqs = base * 2.0 ** np.arange(n_frequencies)
    angles = np.asarray(as_alpha(alpha), dtype=float)[..., None] * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)


class MlpDenoiser:
    """Tanh MLP noise predictor (see module docstring for the input layout)."""

    def __init__(self, layers, dim, vocabulary=(), n_frequencies=8, frequency_base=0.25):
        self.layers = [(np.asarray(w, dtype=float), np.asarray(b, dtype=float)) for w, b in layers]
        self._dim = int(dim)
        self.vocabulary = tuple(vocabulary)
        self.n_frequencies = int(n_frequencies)
        self.frequency_base = float(frequency_base)
        expected = self._dim + 2 * self.n_frequencies + len(self.vocabulary)
        if self.layers[0][0].shape[0] != expected:
            raise ValueError(
                f"first layer expects {self.layers[0][0].shape[0]} inputs "
                f"but the feature layout has {expected}"
            )
        if self.layers[-1][0].shape[1] != self._dim:
            raise ValueError("output layer width must match the data dimension")

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def layer_widths(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w, _ in self.layers) + (self.layers[-1][0].shape[1],)

    def condition_vector(self, condition) -> np.ndarray:
        vec = np.zeros(len(self.vocabulary))
        if condition is None:
            return vec
        if not isinstance(condition, ConditionId):
            raise TypeError(f"expected ConditionId or None, got {type(condition).__name__}")
        lookup = {token: i for i, token in enumerate(self.vocabulary)}
        for token in condition.tokens:
            if token not in lookup:
                raise ValueError(
                    f"unknown condition token {token!r}; vocabulary is {list(self.vocabulary)}"
                )
            vec[lookup[token]] = 1.0
        return vec

    def predict_eps(self, x_alpha, alpha, condition=None) -> np.ndarray:
        x = np.asarray(x_alpha, dtype=float)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.shape[1] != self._dim:
            raise ValueError(
                f"dimension mismatch: denoiser has dimension {self._dim} "
                f"but x_alpha has dimension {x2.shape[1]}"
            )
        a = np.broadcast_to(np.asarray(as_alpha(alpha), dtype=float), (x2.shape[0],))
        cond = np.broadcast_to(self.condition_vector(condition), (x2.shape[0], len(self.vocabulary)))
        feats = np.concatenate(
            [x2, alpha_embedding(a, self.n_frequencies, self.frequency_base), cond], axis=1
        )
        out = self._forward(feats)[-1]
        return out[0] if single else out

    def _forward(self, feats):
        activations = [feats]
        h = feats
        for w, b in self.layers[:-1]:
            h = np.tanh(h @ w + b)
            activations.append(h)
        w, b = self.layers[-1]
        activations.append(h @ w + b)
        return activations


def train_mlp(
    dataset,
    config: MlpTrainConfig = MlpTrainConfig(),
    sampler: LogSnrSampler = LogSnrSampler(),
    seed: int = 0,
) -> tuple[MlpDenoiser, np.ndarray]:
    """Fit an :class:`MlpDenoiser` by stochastic noise-prediction regression.

    ``dataset`` is a list of :class:`Sample` (conditions, when present, must
    be :class:`ConditionId`).  Each step draws a batch of points, log-SNRs
    from ``sampler`` (each draw weighted equally in the loss) and fresh noise,
    and minimizes the mean squared error of the noise prediction with Adam.

    Returns the trained denoiser and the per-step loss trace.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    points = [np.atleast_1d(np.asarray(s.x, dtype=float)) for s in dataset]
    d = points[0].shape[0]
    if any(p.shape != (d,) for p in points):
        raise ValueError("dataset points have inconsistent dimensions")
    xs = np.stack(points)
    vocab = sorted({t for s in dataset if s.condition is not None for t in s.condition.tokens})
    cond_rows = np.zeros((len(dataset), len(vocab)))
    lookup = {t: i for i, t in enumerate(vocab)}
    for i, s in enumerate(dataset):
        if s.condition is not None:
            for t in s.condition.tokens:
                cond_rows[i, lookup[t]] = 1.0

    rng = np.random.default_rng(seed)
    widths = (d + 2 * config.n_frequencies + len(vocab),) + tuple(config.hidden) + (d,)
    params = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        params.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        params.append(np.zeros(fan_out))
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    n_hidden = len(config.hidden)
    trace = np.empty(config.n_steps)
    batch_sampler = LogSnrSampler(sampler.loc, sampler.scale, sampler.clip, config.batch_size)

    for step in range(1, config.n_steps + 1):
        idx = rng.integers(0, len(dataset), config.batch_size)
        x = xs[idx]
        cond = cond_rows[idx].copy()
        if vocab and config.condition_drop > 0:
            drop = rng.random(config.batch_size) < config.condition_drop
            cond[drop] = 0.0
        alphas = batch_sampler.sample(rng)[0]
        eps = rng.standard_normal((config.batch_size, d))
        x_a = np.sqrt(signal_weight(alphas))[:, None] * x + np.sqrt(noise_weight(alphas))[:, None] * eps
        feats = np.concatenate(
            [x_a, alpha_embedding(alphas, config.n_frequencies, config.frequency_base), cond], axis=1
        )

        acts = [feats]
        h = feats
        for i in range(n_hidden):
            h = np.tanh(h @ params[2 * i] + params[2 * i + 1])
            acts.append(h)
        out = h @ params[2 * n_hidden] + params[2 * n_hidden + 1]
        err = out - eps
        loss = float((err**2).mean())
        trace[step - 1] = loss
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"non-finite loss {loss!r} at step {step}: "
                f"batch |x| max {np.abs(x).max()!r}, alpha range "
                f"[{alphas.min()!r}, {alphas.max()!r}]"
            )

        grads = [None] * len(params)
        g = 2.0 * err / err.size
        grads[2 * n_hidden] = acts[-1].T @ g
        grads[2 * n_hidden + 1] = g.sum(axis=0)
        for i in range(n_hidden - 1, -1, -1):
            g = (g @ params[2 * (i + 1)].T) * (1.0 - acts[i + 1] ** 2)
            grads[2 * i] = acts[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)

        b1, b2 = config.adam_beta1, config.adam_beta2
        for i, grad in enumerate(grads):
            m[i] = b1 * m[i] + (1 - b1) * grad
            v[i] = b2 * v[i] + (1 - b2) * grad * grad
            m_hat = m[i] / (1 - b1**step)
            v_hat = v[i] / (1 - b2**step)
            params[i] -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)

    layers = [(params[2 * i], params[2 * i + 1]) for i in range(n_hidden + 1)]
    denoiser = MlpDenoiser(
        layers,
        dim=d,
        vocabulary=vocab,
        n_frequencies=config.n_frequencies,
        frequency_base=config.frequency_base,
    )
    return denoiser, trace
