"""Divergences described through their gradient weight functions.

Every divergence used for optimization here is specified only by the two
weight functions that appear in its gradient estimators::

    rho(t)   = f'(t) t - f(t)        (score-function weights)
    omega(t) = rho'(t) t = f''(t) t^2 (reparameterization weights)

evaluated at the density ratio ``t = p(x) / q(x)``.  The convex ``f`` itself
is never reconstructed.  Batch-level families (``TailAdaptive`` and
``MaxAlpha``) have no pointwise form; their weights are defined on a whole
batch of log-ratios through ranks or the argmax.

All ratio arithmetic is carried out on log-ratios.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "Alpha",
    "ForwardKL",
    "ReverseKL",
    "MaxAlpha",
    "TailAdaptive",
    "DivergenceSpec",
    "WeightMode",
    "WeightVector",
    "UnsupportedWeightingError",
    "NonConvexError",
    "parse_spec",
    "spec_label",
    "rho_weight",
    "omega_weight",
    "empirical_tail_ccdf",
    "batch_weights",
    "alpha_divergence_mc",
    "f_divergence_quadrature",
]


class UnsupportedWeightingError(ValueError):
    """Raised when a divergence has no well-defined weights in the requested mode."""


class NonConvexError(ValueError):
    """Raised when a supplied second derivative is negative somewhere."""


@dataclass(frozen=True)
class Alpha:
    """Alpha-divergence with ``f(t) = t**alpha / (alpha (alpha - 1))``."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not math.isfinite(a):
            raise ValueError(f"alpha must be finite, got {self.alpha!r}")
        if a in (0.0, 1.0):
            raise ValueError(
                "alpha=0 and alpha=1 are the KL limits; use ForwardKL or ReverseKL"
            )
        object.__setattr__(self, "alpha", a)

    @property
    def label(self) -> str:
        return f"alpha:{self.alpha:g}"


@dataclass(frozen=True)
class ForwardKL:
    """KL(q || p), the alpha -> 0 limit (``f(t) = -log t``)."""

    @property
    def label(self) -> str:
        return "kl-forward"


@dataclass(frozen=True)
class ReverseKL:
    """KL(p || q), the alpha -> 1 limit (``f(t) = t log t``)."""

    @property
    def label(self) -> str:
        return "kl-reverse"


@dataclass(frozen=True)
class MaxAlpha:
    """The alpha -> +inf limit: all weight on the largest ratio in the batch."""

    @property
    def label(self) -> str:
        return "alpha:max"


@dataclass(frozen=True)
class TailAdaptive:
    """Rank-based weights ``F_hat(w_i) ** beta`` with ``beta`` in ``[-1, 0)``.

    ``beta = -1`` sits outside the range where the weight moments are
    guaranteed finite, but it is the recommended practical setting and is
    therefore the default.
    """

    beta: float = -1.0

    def __post_init__(self):
        b = float(self.beta)
        if not (-1.0 <= b < 0.0):
            raise ValueError(f"tail-adaptive beta must lie in [-1, 0), got {self.beta!r}")
        object.__setattr__(self, "beta", b)

    @property
    def label(self) -> str:
        return f"tail-adaptive:{self.beta:g}"


DivergenceSpec = Union[Alpha, ForwardKL, ReverseKL, MaxAlpha, TailAdaptive]

_POINTWISE = (Alpha, ForwardKL, ReverseKL)


class WeightMode(enum.Enum):
    OMEGA = "omega"
    RHO = "rho"


def parse_spec(text: str) -> DivergenceSpec:
    """Parse the canonical text form of a divergence.

    Accepted forms are ``kl-forward``, ``kl-reverse``, ``alpha:<value>``,
    ``alpha:max`` and ``tail-adaptive:<beta>``.  ``alpha:0`` and ``alpha:1``
    are read as the corresponding KL directions.

    >>> parse_spec("tail-adaptive:-1")
    TailAdaptive(beta=-1.0)
    >>> parse_spec("alpha:0.5")
    Alpha(alpha=0.5)
    """
    raw = text.strip().lower()
    if raw == "kl-forward":
        return ForwardKL()
    if raw == "kl-reverse":
        return ReverseKL()
    name, sep, value = raw.partition(":")
    if not sep or not value:
        raise ValueError(f"cannot parse divergence spec {text!r}")
    if name == "alpha":
        if value in ("max", "inf", "+inf"):
            return MaxAlpha()
        a = float(value)
        if a == 0.0:
            return ForwardKL()
        if a == 1.0:
            return ReverseKL()
        return Alpha(a)
    if name == "tail-adaptive":
        return TailAdaptive(float(value))
    raise ValueError(f"unknown divergence family {name!r} in {text!r}")


def spec_label(spec: DivergenceSpec) -> str:
    """Canonical text form of ``spec`` (inverse of :func:`parse_spec`)."""
    return spec.label


def _check_pointwise(spec, t):
    if not isinstance(spec, _POINTWISE):
        raise UnsupportedWeightingError(
            f"{spec.label} weights are defined on a batch, not pointwise"
        )
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)) or np.any(~np.isfinite(t)):
        raise ValueError("density ratio must be positive and finite")
    return t


def rho_weight(spec: DivergenceSpec, t):
    """Score-function weight ``rho_f(t) = f'(t) t - f(t)``.

    Accepts a scalar or an array of positive ratios.
    """
    t = _check_pointwise(spec, t)
    if isinstance(spec, Alpha):
        out = t ** spec.alpha / spec.alpha
    elif isinstance(spec, ForwardKL):
        out = np.log(t) - 1.0
    else:
        out = t.copy()
    return out[()] if out.ndim == 0 else out


def omega_weight(spec: DivergenceSpec, t):
    """Reparameterization weight ``omega_f(t) = f''(t) t**2`` (always >= 0)."""
    t = _check_pointwise(spec, t)
    if isinstance(spec, Alpha):
        out = t ** spec.alpha
    elif isinstance(spec, ForwardKL):
        out = np.ones_like(t)
    else:
        out = t.copy()
    return out[()] if out.ndim == 0 else out


def _as_log_weights(log_w) -> np.ndarray:
    log_w = np.asarray(log_w, dtype=float)
    if log_w.ndim != 1 or log_w.size == 0:
        raise ValueError("log-weights must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(log_w)):
        raise ValueError("log-weights must be finite")
    return log_w


def empirical_tail_ccdf(log_w) -> np.ndarray:
    """Empirical tail probability ``#{j : w_j >= w_i} / n`` at every sample.

    Ties are counted inclusively, so every entry is at least ``1/n`` and
    equal inputs receive equal values.

    Examples
    --------
    >>> empirical_tail_ccdf(np.log([1.0, 2.0, 4.0]))
    array([1.        , 0.66666667, 0.33333333])
    """
    log_w = _as_log_weights(log_w)
    n = log_w.size
    ordered = np.sort(log_w)
    # count of entries strictly below log_w[i]; the rest are >= log_w[i]
    below = np.searchsorted(ordered, log_w, side="left")
    return (n - below) / n


@dataclass(frozen=True)
class WeightVector:
    """Self-normalized per-sample weights.

    Attributes
    ----------
    normalized : ndarray, shape (n,)
        Non-negative weights summing to one.
    normalizer_log : float
        Log of the unnormalized weight sum (``z_omega`` or ``z_rho``).
    ess : float
        Effective sample size ``1 / sum(normalized**2)``, clipped to ``[1, n]``.
    """

    normalized: np.ndarray
    normalizer_log: float
    ess: float

    @classmethod
    def from_normalized(cls, normalized, normalizer_log):
        normalized = np.asarray(normalized, dtype=float)
        n = normalized.size
        ess = float(np.clip(1.0 / np.sum(normalized**2), 1.0, n))
        return cls(normalized, float(normalizer_log), ess)

    @classmethod
    def from_log_unnormalized(cls, log_u):
        z = logsumexp(log_u)
        return cls.from_normalized(np.exp(log_u - z), z)

    def __len__(self):
        return self.normalized.size

    @property
    def max_fraction(self) -> float:
        return float(self.normalized.max())


def batch_weights(spec: DivergenceSpec, log_w, mode: WeightMode = WeightMode.OMEGA) -> WeightVector:
    """Normalized weights for a batch of log density ratios.

    Parameters
    ----------
    spec : DivergenceSpec
    log_w : array_like, shape (n,)
        ``log p(x_i) - log q(x_i)``.
    mode : WeightMode
        ``OMEGA`` for reparameterization gradients, ``RHO`` for score-function
        gradients.  The two coincide for ``TailAdaptive`` and ``MaxAlpha``.

    Notes
    -----
    In ``RHO`` mode an ``Alpha`` spec yields ``softmax(alpha * log_w)``: the
    constant ``1/alpha`` in ``rho`` cancels under normalization (for negative
    alpha the magnitudes ``|rho|`` are normalized).  ``ForwardKL`` has a
    sign-indefinite ``rho = log t - 1`` and is rejected in ``RHO`` mode.
    """
    log_w = _as_log_weights(log_w)
    mode = WeightMode(mode)
    n = log_w.size

    if isinstance(spec, TailAdaptive):
        log_u = spec.beta * np.log(empirical_tail_ccdf(log_w))
        return WeightVector.from_log_unnormalized(log_u)

    if isinstance(spec, MaxAlpha):
        onehot = np.zeros(n)
        onehot[int(np.argmax(log_w))] = 1.0  # argmax returns the lowest index on ties
        return WeightVector.from_normalized(onehot, log_w.max())

    if isinstance(spec, ForwardKL):
        if mode is WeightMode.RHO:
            raise UnsupportedWeightingError(
                "forward KL has sign-indefinite rho weights and cannot be self-normalized"
            )
        return WeightVector.from_normalized(np.full(n, 1.0 / n), math.log(n))

    if isinstance(spec, ReverseKL):
        return WeightVector.from_log_unnormalized(log_w)

    if isinstance(spec, Alpha):
        wv = WeightVector.from_log_unnormalized(spec.alpha * log_w)
        if mode is WeightMode.RHO:
            return WeightVector(wv.normalized, wv.normalizer_log - math.log(abs(spec.alpha)), wv.ess)
        return wv

    raise TypeError(f"not a divergence spec: {spec!r}")


def alpha_divergence_mc(alpha: float, log_w) -> float:
    """Monte-Carlo estimate of the alpha-divergence from samples of ``q``.

    ``(mean(w**alpha) - 1) / (alpha (alpha - 1))`` with the mean taken in
    log-space.
    """
    alpha = float(alpha)
    if alpha in (0.0, 1.0):
        raise ValueError("alpha-divergence is undefined at alpha in {0, 1}")
    log_w = _as_log_weights(log_w)
    log_mean = logsumexp(alpha * log_w) - math.log(log_w.size)
    return float(np.expm1(log_mean) / (alpha * (alpha - 1.0)))


def f_divergence_quadrature(
    f_second: Callable[[np.ndarray], np.ndarray],
    p,
    q,
    mc_samples: int = 100_000,
    mu_grid: np.ndarray | None = None,
    rng_seed=None,
    *,
    n_nodes: int = 4000,
    mu_min: float = 1e-4,
) -> float:
    """Evaluate ``D_f(p || q)`` from ``f''`` alone via the hinge representation.

    Computes ``int f''(mu) E_q[(w - mu)_+] dmu - int_0^1 f''(mu) (1 - mu) dmu``
    by the trapezoidal rule on a log-spaced grid, reusing a single batch of
    ratios ``w = p(x)/q(x)``, ``x ~ q`` for every node.

    The ratios are rescaled to have sample mean one.  ``E_q[w] = 1`` holds
    exactly, and without the rescaling the Monte-Carlo error in the mean is
    amplified by ``int f''`` near zero, which diverges for ``f'' = 1/mu``.

    Parameters
    ----------
    f_second : callable
        Vectorized second derivative of ``f``; must be non-negative.
    p, q : DiagGaussianMixture
    mc_samples : int
    mu_grid : ndarray, optional
        Quadrature nodes.  Defaults to ``n_nodes`` log-spaced points on
        ``[mu_min, 10 * max(w)]`` with ``mu = 1`` included as a node.
    rng_seed : int or numpy Generator, optional
    """
    from .mixtures import log_density, sample_exact

    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    rng = np.random.default_rng(rng_seed)
    x = sample_exact(q, mc_samples, rng)
    log_w = log_density(p, x) - log_density(q, x)
    log_w = log_w - (logsumexp(log_w) - math.log(log_w.size))
    w = np.sort(np.exp(log_w))

    if mu_grid is None:
        mu_max = 10.0 * max(w[-1], 1.0)
        lower = np.geomspace(mu_min, 1.0, n_nodes // 2)
        upper = np.geomspace(1.0, mu_max, n_nodes - n_nodes // 2 + 1)[1:]
        mu_grid = np.concatenate([lower, upper])
    else:
        mu_grid = np.sort(np.asarray(mu_grid, dtype=float))
        if mu_grid[0] <= 0:
            raise ValueError("quadrature nodes must be positive")

    h = np.asarray(f_second(mu_grid), dtype=float)
    if np.any(h < 0) or not np.all(np.isfinite(h)):
        raise NonConvexError("f'' must be finite and non-negative on the grid")

    # E[(w - mu)_+] for all nodes at once from the sorted sample
    n = w.size
    tail_sums = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
    idx = np.searchsorted(w, mu_grid, side="right")
    hinge = (tail_sums[idx] - mu_grid * (n - idx)) / n

    integral = np.trapezoid(h * hinge, mu_grid)
    inside = mu_grid <= 1.0
    c = np.trapezoid(h[inside] * (1.0 - mu_grid[inside]), mu_grid[inside])
    return float(integral - c)
