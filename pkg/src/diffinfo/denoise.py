"""Minimum-mean-square-error denoisers for Gaussian and mixture data.

The optimal noise predictor for the channel in :mod:`diffinfo.channel` is the
posterior mean E[eps | x_a].  For a Gaussian source N(mu, C) the corrupted
marginal at log-SNR a is N(sqrt(sigma(a)) mu, S) with
S = sigma(a) C + sigma(-a) I, and

    eps_hat(x_a) = sqrt(sigma(-a)) * S^{-1} (x_a - sqrt(sigma(a)) mu).

For a mixture, eps_hat is the responsibility-weighted combination of the
per-component predictors, with responsibilities taken under the corrupted
marginals.  Responsibilities are computed in the log domain so that
far-separated components underflow to zero weight instead of NaN.

Conditioning is by token: a :class:`ConditionId` carries a label and/or
context tokens, and selects the mixture components consistent with every one
of its tokens (intersection of the ``condition_map`` entries), with weights
renormalized.  Conditioning on context alone therefore marginalizes over all
labels consistent with that context.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Protocol, runtime_checkable

import numpy as np
from scipy.special import logsumexp

from .channel import as_alpha, noise_weight, signal_weight


@dataclass(frozen=True)
class ConditionId:
    """A conditioning event: a label token, context tokens, or both."""

    label: str | None = None
    context: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "context", tuple(self.context))
        if self.label is None and not self.context:
            raise ValueError("a condition must carry a label or at least one context token")

    @property
    def tokens(self) -> tuple[str, ...]:
        if self.label is None:
            return self.context
        return (self.label,) + self.context

    def context_only(self) -> "ConditionId":
        """The same event with the label dropped (context must be non-empty)."""
        return ConditionId(label=None, context=self.context)


@dataclass(frozen=True, eq=False)
class Sample:
    """A data point with optional conditioning payloads.

    ``condition`` is handed verbatim to the conditional denoiser and
    ``context`` to the context-only denoiser; for token-conditioned mixtures
    these are :class:`ConditionId` instances, but any payload the denoiser
    understands (e.g. a float for a conditional-Gaussian family) is allowed.
    """

    x: np.ndarray
    condition: Any = None
    context: Any = None

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))


@runtime_checkable
class Denoiser(Protocol):
    """Noise-prediction interface.

    ``predict_eps`` accepts a single point of shape (d,) with a scalar
    log-SNR, or a batch of shape (n, d) with a scalar or per-row log-SNR, and
    returns an array of the same shape as ``x_alpha``.  Implementations are
    deterministic: identical inputs yield identical outputs.
    """

    @property
    def dim(self) -> int: ...

    def predict_eps(self, x_alpha, alpha, condition=None) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class GmmSpec:
    """A Gaussian mixture with token-addressable component subsets.

    ``condition_map`` maps each vocabulary token to the components consistent
    with it; a :class:`ConditionId` selects the intersection of its tokens'
    entries.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    condition_map: Any = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        cov = np.asarray(self.covariances, dtype=float)
        if cov.ndim == 2:
            cov = cov[None, :, :]
        k, d = mu.shape
        if w.shape != (k,):
            raise ValueError(f"expected {k} weights, got shape {w.shape}")
        if cov.shape != (k, d, d):
            raise ValueError(f"expected covariances of shape {(k, d, d)}, got {cov.shape}")
        if np.any(w <= 0):
            raise ValueError("component weights must be positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"component weights must sum to 1, got {w.sum()!r}")
        for i in range(k):
            if not np.allclose(cov[i], cov[i].T, rtol=0, atol=1e-12):
                raise ValueError(f"component {i} covariance is not symmetric")
            try:
                np.linalg.cholesky(cov[i])
            except np.linalg.LinAlgError:
                raise ValueError(f"component {i} covariance is not positive definite") from None
        cmap = {}
        for token, idx in dict(self.condition_map).items():
            idx = tuple(int(i) for i in idx)
            if not idx:
                raise ValueError(f"condition token {token!r} maps to no components")
            if any(i < 0 or i >= k for i in idx):
                raise ValueError(f"condition token {token!r} has component index out of range")
            cmap[str(token)] = idx
        for arr in (w, mu, cov):
            arr.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)
        object.__setattr__(self, "condition_map", MappingProxyType(cmap))

    @classmethod
    def single(cls, mean, covariance) -> "GmmSpec":
        return cls(weights=[1.0], means=[np.atleast_1d(mean)], covariances=[np.atleast_2d(covariance)])

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def vocabulary(self) -> frozenset[str]:
        return frozenset(self.condition_map)

    def components_for(self, condition) -> np.ndarray:
        """Component indices consistent with ``condition`` (all, if None)."""
        if condition is None:
            return np.arange(self.n_components)
        if not isinstance(condition, ConditionId):
            raise TypeError(f"expected ConditionId or None, got {type(condition).__name__}")
        selected = set(range(self.n_components))
        for token in condition.tokens:
            if token not in self.condition_map:
                raise ValueError(
                    f"unknown condition token {token!r}; vocabulary is {sorted(self.condition_map)}"
                )
            selected &= set(self.condition_map[token])
        if not selected:
            raise ValueError(f"condition {condition} selects no components")
        return np.array(sorted(selected))

    def conditional_weights(self, indices) -> np.ndarray:
        w = self.weights[np.asarray(indices)]
        return w / w.sum()

    def restrict(self, condition) -> "GmmSpec":
        """The conditional mixture given ``condition`` as a standalone spec."""
        idx = self.components_for(condition)
        pos = {int(k): j for j, k in enumerate(idx)}
        cmap = {}
        for token, comps in self.condition_map.items():
            kept = tuple(pos[c] for c in comps if c in pos)
            if kept:
                cmap[token] = kept
        return GmmSpec(
            weights=self.conditional_weights(idx),
            means=self.means[idx],
            covariances=self.covariances[idx],
            condition_map=cmap,
        )

    def sample(self, n, rng) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``n`` points and their component indices."""
        rng = np.random.default_rng(rng)
        comps = rng.choice(self.n_components, size=n, p=self.weights)
        chols = np.linalg.cholesky(self.covariances)
        z = rng.standard_normal((n, self.dim))
        x = self.means[comps] + np.einsum("nij,nj->ni", chols[comps], z)
        return x, comps


class GmmDenoiser:
    """Exact posterior-mean noise predictor for a :class:`GmmSpec` source."""

    def __init__(self, spec: GmmSpec):
        self.spec = spec

    @property
    def dim(self) -> int:
        return self.spec.dim

    def predict_eps(self, x_alpha, alpha, condition=None) -> np.ndarray:
        x2, a, single = self._as_batch(x_alpha, alpha)
        log_resp, eps_k = self._component_terms(x2, a, condition)
        resp = np.exp(log_resp)
        eps_hat = np.einsum("nk,nkd->nd", resp, eps_k)
        return eps_hat[0] if single else eps_hat

    def responsibilities(self, x_alpha, alpha, condition=None) -> np.ndarray:
        """Posterior component probabilities under the corrupted marginal."""
        x2, a, single = self._as_batch(x_alpha, alpha)
        log_resp, _ = self._component_terms(x2, a, condition)
        resp = np.exp(log_resp)
        return resp[0] if single else resp

    def _as_batch(self, x_alpha, alpha):
        x = np.asarray(x_alpha, dtype=float)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.shape[1] != self.dim:
            raise ValueError(
                f"dimension mismatch: denoiser has dimension {self.dim} "
                f"but x_alpha has dimension {x2.shape[1]}"
            )
        a = np.broadcast_to(np.asarray(as_alpha(alpha), dtype=float), (x2.shape[0],))
        return x2, a, single

    def _component_terms(self, x2, a, condition):
        spec = self.spec
        idx = spec.components_for(condition)
        w = spec.conditional_weights(idx)
        sa, sna = signal_weight(a), noise_weight(a)
        n, d = x2.shape
        eye = np.eye(d)
        log_joint = np.empty((n, idx.size))
        eps_k = np.empty((n, idx.size, d))
        for j, k in enumerate(idx):
            mean_k = np.sqrt(sa)[:, None] * spec.means[k]
            cov_k = sa[:, None, None] * spec.covariances[k] + sna[:, None, None] * eye
            diff = x2 - mean_k
            sol = np.linalg.solve(cov_k, diff[..., None])[..., 0]
            _, logdet = np.linalg.slogdet(cov_k)
            maha = np.einsum("ni,ni->n", diff, sol)
            log_joint[:, j] = np.log(w[j]) - 0.5 * (d * np.log(2 * np.pi) + logdet + maha)
            eps_k[:, j] = np.sqrt(sna)[:, None] * sol
        log_resp = log_joint - logsumexp(log_joint, axis=1, keepdims=True)
        return log_resp, eps_k


def gaussian_mmse(spec: GmmSpec) -> GmmDenoiser:
    """Closed-form denoiser for single-Gaussian data."""
    if spec.n_components != 1:
        raise ValueError(f"expected a single-Gaussian spec, got {spec.n_components} components")
    return GmmDenoiser(spec)


def gmm_mmse(spec: GmmSpec) -> GmmDenoiser:
    """Closed-form denoiser for Gaussian-mixture data."""
    return GmmDenoiser(spec)


@dataclass(frozen=True)
class ZeroDenoiser:
    """Predicts zero noise everywhere; useful as a flow/MSE baseline."""

    dim: int

    def predict_eps(self, x_alpha, alpha, condition=None) -> np.ndarray:
        return np.zeros_like(np.asarray(x_alpha, dtype=float))
