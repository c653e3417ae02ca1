"""Oracle checks behind ``tailvi validate``.

Each check compares a library path against an independent route
(closed forms, central finite differences) and returns a ``Check``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .divergences import f_divergence_quadrature
from .gradients import draw_batch, reparam_contributions, score_contributions
from .mixtures import (
    DiagGaussianMixture,
    grad_x_log_density,
    log_density,
    pathwise_vjp,
    relaxed_point,
    sample_reparam,
    score_grad_log_q,
)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def random_mixture(rng, k=None, d=None) -> DiagGaussianMixture:
    k = int(rng.integers(1, 5)) if k is None else k
    d = int(rng.integers(1, 4)) if d is None else d
    return DiagGaussianMixture(
        rng.normal(size=k), rng.normal(scale=1.5, size=(k, d)), rng.uniform(-0.5, 0.5, size=(k, d))
    )


def central_difference(fn, theta, step=1e-5):
    theta = np.asarray(theta, dtype=float)
    out = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        out[i] = (fn(theta + e) - fn(theta - e)) / (2 * step)
    return out


def relative_error(a, b) -> float:
    a, b = np.ravel(a), np.ravel(b)
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))


def check_gradients(n_instances=100, seed=0, tol=1e-4):
    rng = np.random.default_rng(seed)
    worst = {"grad_x_log_density": 0.0, "score_grad_log_q": 0.0, "pathwise_vjp": 0.0}
    for _ in range(n_instances):
        mix = random_mixture(rng)
        x = rng.normal(scale=2.0, size=mix.d)

        fd = central_difference(lambda y: log_density(mix, y), x)
        worst["grad_x_log_density"] = max(worst["grad_x_log_density"], relative_error(grad_x_log_density(mix, x), fd))

        fd = central_difference(lambda th: log_density(mix.with_flat(th), x), mix.flatten())
        worst["score_grad_log_q"] = max(worst["score_grad_log_q"], relative_error(score_grad_log_q(mix, x).flatten(), fd))

        sample = sample_reparam(mix, 0.5, rng)
        cot = rng.normal(size=mix.d)

        def pushed(th):
            x_th, _ = relaxed_point(mix.with_flat(th), sample.gaussian_seeds, sample.gumbel_seeds, sample.temperature)
            return cot @ x_th

        fd = central_difference(pushed, mix.flatten())
        worst["pathwise_vjp"] = max(worst["pathwise_vjp"], relative_error(pathwise_vjp(mix, sample, cot).flatten(), fd))
    return [Check(f"finite differences: {k}", v <= tol, f"max rel err {v:.2e} (tol {tol:g})") for k, v in worst.items()]


def check_quadrature(mc_samples=100_000, seed=0, rtol=0.05):
    var_q = 0.81
    a = 1.0 - 1.0 / (2.0 * var_q)
    chi2 = math.sqrt(var_q) / math.sqrt(2.0 * a) - 1.0
    got = f_divergence_quadrature(lambda m: np.full_like(m, 2.0), DiagGaussianMixture.gaussian(0.0, 1.0),
                                  DiagGaussianMixture.gaussian(0.0, math.sqrt(var_q)), mc_samples, rng_seed=seed)
    out = [Check("quadrature chi^2", abs(got / chi2 - 1) <= rtol, f"{got:.5f} vs closed form {chi2:.5f}")]
    kl = 0.3**2 / 2
    got = f_divergence_quadrature(lambda m: 1.0 / m, DiagGaussianMixture.gaussian(0.0, 1.0),
                                  DiagGaussianMixture.gaussian(0.3, 1.0), mc_samples, rng_seed=seed)
    out.append(Check("quadrature KL", abs(got / kl - 1) <= rtol, f"{got:.5f} vs closed form {kl:.5f}"))
    return out


def check_unbiasedness(n_reparam=100_000, n_score=1_000_000, seed=0, theta=0.5):
    """Forward-KL directions for q = N(theta, 1), p = N(0, 1) against -theta."""
    rng = np.random.default_rng(seed)
    p = DiagGaussianMixture.gaussian(0.0, 1.0)
    q = DiagGaussianMixture.gaussian(theta, 1.0)
    out = []
    batch = draw_batch(p, q, n_reparam, 0.1, rng)
    c = reparam_contributions(q, batch).d_means[:, 0, 0]
    mean, se = c.mean(), c.std(ddof=1) / math.sqrt(c.size)
    out.append(Check("reparam forward KL mean", abs(mean + theta) <= 3 * se + 1e-9, f"{mean:.5f} +- {se:.1e}"))
    batch = draw_batch(p, q, n_score, 0.1, rng)
    c = (batch.log_ratio - 1.0) * score_contributions(q, batch).d_means[:, 0, 0]
    mean, se = c.mean(), c.std(ddof=1) / math.sqrt(c.size)
    out.append(Check("score forward KL mean", abs(mean + theta) <= 3 * se, f"{mean:.5f} +- {se:.1e}"))
    return out


def run_all(seed=0):
    return check_gradients(seed=seed) + check_quadrature(seed=seed) + check_unbiasedness(seed=seed)
