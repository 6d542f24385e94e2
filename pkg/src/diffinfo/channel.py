"""Variance-preserving Gaussian noise channel parametrized by log SNR.

The channel corrupts a data vector x into

    x_a = sqrt(sigma(a)) * x + sqrt(sigma(-a)) * eps,    eps ~ N(0, I),

where a is the log signal-to-noise ratio and sigma the standard logistic
sigmoid, so the signal weight sigma(a) and the noise weight sigma(-a) sum to
one at every noise level.  Information integrals over a are estimated by
importance sampling from a truncated logistic distribution; contributions
outside the truncation interval are defined to be zero, which makes every
estimate a deterministic function of its seed and its interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit


def signal_weight(alpha):
    """Signal weight sigma(a) of the channel at log-SNR ``alpha``."""
    return expit(as_alpha(alpha))


def noise_weight(alpha):
    """Noise weight sigma(-a); complements :func:`signal_weight` to one."""
    return expit(-as_alpha(alpha))


def as_alpha(alpha):
    """Unwrap a :class:`LogSnr` (or pass through floats/arrays) as ndarray-ready values."""
    if isinstance(alpha, LogSnr):
        return alpha.alpha
    return alpha


@dataclass(frozen=True)
class LogSnr:
    """A single noise level, stored as the log signal-to-noise ratio."""

    alpha: float

    @property
    def snr(self) -> float:
        return float(np.exp(self.alpha))

    @property
    def signal_weight(self) -> float:
        return float(expit(self.alpha))

    @property
    def noise_weight(self) -> float:
        return float(expit(-self.alpha))

    def __float__(self) -> float:
        return float(self.alpha)


@dataclass(frozen=True, eq=False)
class NoisySample:
    """A corrupted data point together with the noise draw that produced it."""

    x_alpha: np.ndarray
    eps: np.ndarray
    alpha: LogSnr


def corrupt(x, alpha, eps=None, *, rng=None) -> NoisySample:
    """Push ``x`` through the channel at noise level ``alpha``.

    Parameters
    ----------
    x : array_like, shape (d,)
        Clean data vector.
    alpha : LogSnr or float
        Noise level.
    eps : array_like, shape (d,), optional
        Standard-normal draw.  Supply it for coupled or reproducible
        corruptions; otherwise it is drawn from ``rng``.
    rng : numpy Generator or seed, required when ``eps`` is None.

    Returns
    -------
    NoisySample with ``x_alpha = sqrt(sigma(a)) x + sqrt(sigma(-a)) eps``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"x must be a vector, got shape {x.shape}")
    if eps is None:
        if rng is None:
            raise ValueError("supply eps or an rng to draw it from")
        eps = np.random.default_rng(rng).standard_normal(x.shape[0])
    else:
        eps = np.asarray(eps, dtype=float)
    if eps.shape != x.shape:
        raise ValueError(
            f"dimension mismatch: x has dimension {x.shape[0]} "
            f"but eps has dimension {eps.shape[0] if eps.ndim == 1 else eps.shape}"
        )
    if not isinstance(alpha, LogSnr):
        alpha = LogSnr(float(alpha))
    x_alpha = np.sqrt(alpha.signal_weight) * x + np.sqrt(alpha.noise_weight) * eps
    return NoisySample(x_alpha=x_alpha, eps=eps, alpha=alpha)


@dataclass(frozen=True)
class LogSnrSampler:
    """Truncated-logistic importance distribution over log-SNR values.

    Draws lie in ``[loc - clip*scale, loc + clip*scale]`` and each comes with
    the weight ``1/pdf(a)``, so that ``mean(weight * g(a))`` over the draws is
    an unbiased estimate of the integral of ``g`` over the interval.  The pdf
    is the logistic density renormalized over the interval.
    """

    loc: float = 1.0
    scale: float = 2.0
    clip: float = 3.0
    n_draws: int = 100

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.clip <= 0:
            raise ValueError(f"clip must be positive, got {self.clip}")
        if self.n_draws < 1:
            raise ValueError(f"n_draws must be at least 1, got {self.n_draws}")

    @property
    def support(self) -> tuple[float, float]:
        half = self.clip * self.scale
        return (self.loc - half, self.loc + half)

    @property
    def _truncated_mass(self) -> float:
        # CDF mass of the untruncated logistic inside the interval.
        return float(expit(self.clip) - expit(-self.clip))

    def pdf(self, alpha):
        """Renormalized density; zero outside the truncation interval."""
        alpha = np.asarray(as_alpha(alpha), dtype=float)
        z = (alpha - self.loc) / self.scale
        dens = expit(z) * expit(-z) / (self.scale * self._truncated_mass)
        lo, hi = self.support
        return np.where((alpha >= lo) & (alpha <= hi), dens, 0.0)

    def sample(self, rng) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``n_draws`` (alpha, weight) pairs, deterministic given the seed.

        ``rng`` may be an int seed, a ``SeedSequence`` or a ``Generator``.
        """
        rng = np.random.default_rng(rng)
        u = rng.uniform(expit(-self.clip), expit(self.clip), size=self.n_draws)
        z = np.log(u) - np.log1p(-u)
        alphas = self.loc + self.scale * z
        weights = self.scale * self._truncated_mass / (expit(z) * expit(-z))
        return alphas, weights
