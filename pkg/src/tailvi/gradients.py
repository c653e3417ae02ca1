"""Update directions for f-divergence VI with a mixture variational family.

``reparam_update`` is the pathwise estimator: weights ``omega_i`` times the
vector-Jacobian product of ``d x_i / d theta`` with
``grad_x log(p/q)(x_i)``.  ``score_update`` uses ``rho_i`` times
``grad_theta log q(x_i)``.  Both return the ascent direction ``delta`` with
``theta <- theta + step * delta`` decreasing the divergence.

Batches must be consumed right after they are drawn; a batch drawn under
old parameters silently gives a wrong direction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .divergences import (
    Alpha,
    DivergenceSpec,
    ForwardKL,
    WeightMode,
    WeightVector,
    batch_weights,
)
from .mixtures import (
    DiagGaussianMixture,
    FlatParamGrad,
    ReparamBatch,
    log_density_and_grad,
    pathwise_vjp_batch,
    sample_reparam_batch,
    score_grad_log_q,
)

__all__ = [
    "SampleBatch",
    "GradientEstimate",
    "evaluate_batch",
    "draw_batch",
    "reparam_update",
    "score_update",
    "reparam_contributions",
    "score_contributions",
]


@dataclass(frozen=True)
class SampleBatch:
    points: np.ndarray
    log_p: np.ndarray
    log_q: np.ndarray
    log_ratio: np.ndarray
    grad_x_log_p: np.ndarray
    grad_x_log_q: np.ndarray
    reparam: Optional[ReparamBatch] = None

    def __len__(self):
        return self.points.shape[0]

    def with_log_p(self, log_p) -> "SampleBatch":
        """Copy with ``log_p`` (and hence ``log_ratio``) replaced; used to inject synthetic ratios."""
        log_p = np.asarray(log_p, dtype=float)
        return SampleBatch(
            self.points, log_p, self.log_q, log_p - self.log_q,
            self.grad_x_log_p, self.grad_x_log_q, self.reparam,
        )


@dataclass(frozen=True)
class GradientEstimate:
    direction: FlatParamGrad
    weights: WeightVector
    batch_size: int


def evaluate_batch(p: DiagGaussianMixture, q: DiagGaussianMixture, samples) -> SampleBatch:
    """Densities and spatial gradients of ``p`` and ``q`` at the given samples.

    ``samples`` is a :class:`ReparamBatch` (pathwise batch) or a plain
    ``(n, d)`` array of points (score-function only).
    """
    if p.d != q.d:
        raise ValueError(f"target has dimension {p.d} but variational family has {q.d}")
    if isinstance(samples, ReparamBatch):
        reparam, points = samples, samples.x
    else:
        reparam, points = None, np.atleast_2d(np.asarray(samples, dtype=float))
    log_p, grad_p = log_density_and_grad(p, points)
    log_q, grad_q = log_density_and_grad(q, points)
    return SampleBatch(points, log_p, log_q, log_p - log_q, grad_p, grad_q, reparam)


def draw_batch(p: DiagGaussianMixture, q: DiagGaussianMixture, n: int, temperature: float, rng) -> SampleBatch:
    return evaluate_batch(p, q, sample_reparam_batch(q, n, temperature, rng))


def reparam_contributions(q: DiagGaussianMixture, batch: SampleBatch) -> FlatParamGrad:
    """Per-sample pathwise terms ``dx_i/dtheta^T grad_x log(p/q)(x_i)``.

    The ratio's own dependence on ``theta`` is held fixed; only the sampling
    path carries gradient.
    """
    if batch.reparam is None:
        raise ValueError("pathwise update needs a batch drawn with sample_reparam_batch")
    cot = batch.grad_x_log_p - batch.grad_x_log_q
    return pathwise_vjp_batch(q, batch.reparam, cot)


def reparam_update(spec: DivergenceSpec, q: DiagGaussianMixture, batch: SampleBatch) -> GradientEstimate:
    weights = batch_weights(spec, batch.log_ratio, WeightMode.OMEGA)
    direction = reparam_contributions(q, batch).contract(weights.normalized)
    return GradientEstimate(direction, weights, len(batch))


def score_contributions(q: DiagGaussianMixture, batch: SampleBatch) -> FlatParamGrad:
    """Per-sample ``grad_theta log q(x_i)``."""
    return score_grad_log_q(q, batch.points)


def score_update(spec: DivergenceSpec, q: DiagGaussianMixture, batch: SampleBatch) -> GradientEstimate:
    """Score-function direction ``sum_i rho_i grad log q(x_i) / z``.

    Forward KL uses the plain REINFORCE average with ``rho = log w - 1``.
    For ``Alpha`` the self-normalized weights are rescaled by ``1/alpha``
    (the ratio ``rho/omega``), which puts the direction on the same scale
    as :func:`reparam_update` and keeps its sign right for negative alpha.
    """
    n = len(batch)
    scores = score_contributions(q, batch)
    if isinstance(spec, ForwardKL):
        rho = batch.log_ratio - 1.0
        uniform = WeightVector.from_normalized(np.full(n, 1.0 / n), math.log(n))
        return GradientEstimate(scores.contract(rho / n), uniform, n)
    weights = batch_weights(spec, batch.log_ratio, WeightMode.RHO)
    coef = weights.normalized
    if isinstance(spec, Alpha):
        coef = coef / spec.alpha
    return GradientEstimate(scores.contract(coef), weights, n)
