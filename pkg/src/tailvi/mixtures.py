"""Diagonal-Gaussian mixtures used both as targets and as variational families.

Densities, spatial gradients and parameter gradients are all evaluated with
posterior responsibilities computed in log-space, so far-separated
components do not underflow.

Point arguments may be a single ``(d,)`` vector or a ``(n, d)`` batch; the
outputs gain a leading ``n`` axis accordingly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

__all__ = [
    "DiagGaussianMixture",
    "FlatParamGrad",
    "ReparamSample",
    "ReparamBatch",
    "log_density",
    "grad_x_log_density",
    "log_density_and_grad",
    "score_grad_log_q",
    "sample_reparam",
    "sample_reparam_batch",
    "sample_exact",
    "pathwise_vjp",
    "pathwise_vjp_batch",
    "mixture_moments",
]

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class DiagGaussianMixture:
    """Mixture ``sum_k softmax(logits)_k N(means_k, diag(exp(2 log_stds_k)))``."""

    logits: np.ndarray
    means: np.ndarray
    log_stds: np.ndarray

    def __post_init__(self):
        logits = np.array(self.logits, dtype=float).reshape(-1)
        means = np.array(self.means, dtype=float)
        log_stds = np.array(self.log_stds, dtype=float)
        if means.ndim == 1:
            means = means.reshape(logits.size, -1)
        if log_stds.ndim == 1:
            log_stds = log_stds.reshape(means.shape)
        if logits.size < 1 or means.ndim != 2 or means.shape[1] < 1:
            raise ValueError("need k >= 1 components of dimension d >= 1")
        if means.shape[0] != logits.size or log_stds.shape != means.shape:
            raise ValueError(
                f"shape mismatch: logits {logits.shape}, means {means.shape}, log_stds {log_stds.shape}"
            )
        for name, arr in (("logits", logits), ("means", means), ("log_stds", log_stds)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            arr.setflags(write=False)
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "log_stds", log_stds)

    @property
    def k(self) -> int:
        return self.logits.size

    @property
    def d(self) -> int:
        return self.means.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return softmax(self.logits)

    @property
    def stds(self) -> np.ndarray:
        return np.exp(self.log_stds)

    @property
    def n_params(self) -> int:
        return self.k * (1 + 2 * self.d)

    @classmethod
    def gaussian(cls, mean, std=1.0):
        """Single-component mixture."""
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        log_std = np.log(np.broadcast_to(np.asarray(std, dtype=float), mean.shape))
        return cls(np.zeros(1), mean[None, :], log_std[None, :])

    def flatten(self) -> np.ndarray:
        """Parameters as one vector ordered (logits, means, log_stds)."""
        return np.concatenate([self.logits, self.means.ravel(), self.log_stds.ravel()])

    def with_flat(self, flat) -> "DiagGaussianMixture":
        """A mixture of the same shape with parameters taken from ``flat``."""
        flat = np.asarray(flat, dtype=float)
        k, d = self.k, self.d
        if flat.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {flat.shape}")
        return DiagGaussianMixture(
            flat[:k], flat[k : k + k * d].reshape(k, d), flat[k + k * d :].reshape(k, d)
        )

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "d": self.d,
            "logits": self.logits.tolist(),
            "means": self.means.tolist(),
            "log_stds": self.log_stds.tolist(),
        }

    @classmethod
    def from_dict(cls, record: dict) -> "DiagGaussianMixture":
        mix = cls(record["logits"], record["means"], record["log_stds"])
        if ("k" in record and record["k"] != mix.k) or ("d" in record and record["d"] != mix.d):
            raise ValueError("declared k/d do not match the parameter arrays")
        return mix

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DiagGaussianMixture":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class FlatParamGrad:
    """Gradient with respect to (logits, means, log_stds).

    Arrays may carry a leading batch axis when produced per sample.
    """

    d_logits: np.ndarray
    d_means: np.ndarray
    d_log_stds: np.ndarray

    def __add__(self, other):
        return FlatParamGrad(
            self.d_logits + other.d_logits,
            self.d_means + other.d_means,
            self.d_log_stds + other.d_log_stds,
        )

    def __mul__(self, scale):
        return FlatParamGrad(self.d_logits * scale, self.d_means * scale, self.d_log_stds * scale)

    __rmul__ = __mul__

    def flatten(self) -> np.ndarray:
        """Vector ordered like :meth:`DiagGaussianMixture.flatten` (unbatched only)."""
        return np.concatenate([self.d_logits.ravel(), self.d_means.ravel(), self.d_log_stds.ravel()])

    def contract(self, weights) -> "FlatParamGrad":
        """Weighted sum over the leading batch axis, in ascending index order."""
        weights = np.asarray(weights, dtype=float)
        return FlatParamGrad(
            np.tensordot(weights, self.d_logits, axes=1),
            np.tensordot(weights, self.d_means, axes=1),
            np.tensordot(weights, self.d_log_stds, axes=1),
        )

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.d_logits))
            and np.all(np.isfinite(self.d_means))
            and np.all(np.isfinite(self.d_log_stds))
        )

    @classmethod
    def zeros_like(cls, mix: DiagGaussianMixture):
        return cls(np.zeros(mix.k), np.zeros((mix.k, mix.d)), np.zeros((mix.k, mix.d)))


def _points(mix, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != mix.d or x.ndim not in (1, 2):
        raise ValueError(f"expected points of dimension {mix.d}, got shape {x.shape}")
    return x


def _component_terms(mix, x):
    """Standardized residuals and per-component joint log densities, batched."""
    xb = np.atleast_2d(x)
    inv_std = np.exp(-mix.log_stds)
    z = (xb[:, None, :] - mix.means[None]) * inv_std[None]  # (n, k, d)
    log_comp = (
        -0.5 * np.sum(z * z, axis=-1)
        - np.sum(mix.log_stds, axis=-1)[None]
        - 0.5 * mix.d * _LOG_2PI
    )
    log_joint = log_comp + (mix.logits - logsumexp(mix.logits))[None]  # (n, k)
    return z, inv_std, log_joint


def log_density(mix: DiagGaussianMixture, x):
    """``log q(x)`` for one point or a batch of points."""
    x = _points(mix, x)
    _, _, log_joint = _component_terms(mix, x)
    out = logsumexp(log_joint, axis=-1)
    return out[0] if x.ndim == 1 else out


def _responsibilities(log_joint):
    return np.exp(log_joint - logsumexp(log_joint, axis=-1, keepdims=True))


def log_density_and_grad(mix: DiagGaussianMixture, x):
    """``(log q(x), grad_x log q(x))`` sharing one pass over the components."""
    x = _points(mix, x)
    z, inv_std, log_joint = _component_terms(mix, x)
    lse = logsumexp(log_joint, axis=-1, keepdims=True)
    r = np.exp(log_joint - lse)
    grad = -np.einsum("nk,nkd->nd", r, z * inv_std[None])
    if x.ndim == 1:
        return lse[0, 0], grad[0]
    return lse[:, 0], grad


def grad_x_log_density(mix: DiagGaussianMixture, x):
    """Spatial gradient ``sum_k r_k(x) (mu_k - x) / sigma_k**2``."""
    x = _points(mix, x)
    z, inv_std, log_joint = _component_terms(mix, x)
    r = _responsibilities(log_joint)
    out = -np.einsum("nk,nkd->nd", r, z * inv_std[None])
    return out[0] if x.ndim == 1 else out


def score_grad_log_q(mix: DiagGaussianMixture, x) -> FlatParamGrad:
    """Gradient of ``log q(x)`` with respect to the mixture parameters.

    For a batch of points the returned arrays have a leading ``n`` axis.
    """
    x = _points(mix, x)
    z, inv_std, log_joint = _component_terms(mix, x)
    r = _responsibilities(log_joint)
    d_logits = r - mix.weights[None]
    d_means = r[..., None] * z * inv_std[None]
    d_log_stds = r[..., None] * (z * z - 1.0)
    if x.ndim == 1:
        return FlatParamGrad(d_logits[0], d_means[0], d_log_stds[0])
    return FlatParamGrad(d_logits, d_means, d_log_stds)


@dataclass(frozen=True)
class ReparamSample:
    """One relaxed draw together with the noise that produced it.

    ``x = sum_k soft_weights[k] * (means[k] + stds[k] * gaussian_seeds[k])``
    with ``soft_weights = softmax((logits + gumbel_seeds) / temperature)``.
    """

    x: np.ndarray
    gaussian_seeds: np.ndarray
    gumbel_seeds: np.ndarray
    soft_weights: np.ndarray
    temperature: float


@dataclass(frozen=True)
class ReparamBatch:
    """``n`` relaxed draws stored as stacked arrays."""

    x: np.ndarray  # (n, d)
    gaussian_seeds: np.ndarray  # (n, k, d)
    gumbel_seeds: np.ndarray  # (n, k)
    soft_weights: np.ndarray  # (n, k)
    temperature: float

    def __len__(self):
        return self.x.shape[0]

    def __getitem__(self, i) -> ReparamSample:
        return ReparamSample(
            self.x[i], self.gaussian_seeds[i], self.gumbel_seeds[i], self.soft_weights[i], self.temperature
        )

    @classmethod
    def stack(cls, samples) -> "ReparamBatch":
        samples = list(samples)
        temps = {s.temperature for s in samples}
        if len(temps) != 1:
            raise ValueError("all samples must share one temperature")
        return cls(
            np.stack([s.x for s in samples]),
            np.stack([s.gaussian_seeds for s in samples]),
            np.stack([s.gumbel_seeds for s in samples]),
            np.stack([s.soft_weights for s in samples]),
            temps.pop(),
        )


def relaxed_point(mix: DiagGaussianMixture, gaussian_seeds, gumbel_seeds, temperature):
    """Deterministic map from noise to ``(x, soft_weights)``; batched over leading axes."""
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    soft = softmax((mix.logits + gumbel_seeds) / temperature, axis=-1)
    y = mix.means + mix.stds * gaussian_seeds
    x = np.sum(soft[..., None] * y, axis=-2)
    return x, soft


def sample_reparam(mix: DiagGaussianMixture, temperature: float, rng) -> ReparamSample:
    """Draw one Gumbel-Softmax relaxed sample."""
    gumbel = rng.gumbel(size=mix.k)
    eps = rng.standard_normal((mix.k, mix.d))
    x, soft = relaxed_point(mix, eps, gumbel, temperature)
    return ReparamSample(x, eps, gumbel, soft, float(temperature))


def sample_reparam_batch(mix: DiagGaussianMixture, n: int, temperature: float, rng) -> ReparamBatch:
    """Draw ``n`` relaxed samples in one vectorized call."""
    gumbel = rng.gumbel(size=(n, mix.k))
    eps = rng.standard_normal((n, mix.k, mix.d))
    x, soft = relaxed_point(mix, eps, gumbel, temperature)
    return ReparamBatch(x, eps, gumbel, soft, float(temperature))


def sample_exact(mix: DiagGaussianMixture, n: int, rng) -> np.ndarray:
    """Exact draws with categorical component selection (no relaxation)."""
    comp = rng.choice(mix.k, size=n, p=mix.weights)
    eps = rng.standard_normal((n, mix.d))
    return mix.means[comp] + mix.stds[comp] * eps


def pathwise_vjp_batch(mix: DiagGaussianMixture, batch: ReparamBatch, cotangents) -> FlatParamGrad:
    """Per-sample products ``c_i^T dx_i/dtheta`` with a leading batch axis.

    The samples must have been drawn from ``mix`` at its current parameters;
    this is not checked.
    """
    c = np.asarray(cotangents, dtype=float)
    s = batch.soft_weights
    stds = mix.stds
    y = mix.means[None] + stds[None] * batch.gaussian_seeds
    d_means = s[..., None] * c[:, None, :]
    d_log_stds = d_means * stds[None] * batch.gaussian_seeds
    cy = np.einsum("nkd,nd->nk", y, c)
    cx = np.sum(s * cy, axis=-1, keepdims=True)
    d_logits = s * (cy - cx) / batch.temperature
    return FlatParamGrad(d_logits, d_means, d_log_stds)


def pathwise_vjp(mix: DiagGaussianMixture, sample: ReparamSample, cotangent) -> FlatParamGrad:
    """``cotangent^T dx/dtheta`` through the affine map and the Gumbel-Softmax weights."""
    batch = ReparamBatch(
        sample.x[None], sample.gaussian_seeds[None], sample.gumbel_seeds[None],
        sample.soft_weights[None], sample.temperature,
    )
    g = pathwise_vjp_batch(mix, batch, np.asarray(cotangent, dtype=float)[None])
    return FlatParamGrad(g.d_logits[0], g.d_means[0], g.d_log_stds[0])


def mixture_moments(mix: DiagGaussianMixture):
    """Per-dimension marginal mean and variance of the mixture."""
    w = mix.weights
    mean = w @ mix.means
    second = w @ (np.exp(2.0 * mix.log_stds) + mix.means**2)
    return mean, second - mean**2
