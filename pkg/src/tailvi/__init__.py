"""Variational inference with tail-adaptive f-divergences.

The core pieces are rank-based importance weights
(:func:`tailvi.divergences.batch_weights`), the pathwise and score-function
update directions in :mod:`tailvi.gradients`, and Gaussian-mixture
variational families in :mod:`tailvi.mixtures`.
"""
from .divergences import (
    Alpha,
    ForwardKL,
    MaxAlpha,
    ReverseKL,
    TailAdaptive,
    WeightMode,
    WeightVector,
    alpha_divergence_mc,
    batch_weights,
    empirical_tail_ccdf,
    f_divergence_quadrature,
    omega_weight,
    parse_spec,
    rho_weight,
)
from .gradients import GradientEstimate, SampleBatch, evaluate_batch, reparam_update, score_update
from .mixtures import DiagGaussianMixture, FlatParamGrad, ReparamSample

__version__ = "0.1.0"
