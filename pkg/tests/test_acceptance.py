"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
happen; they are also collected in the terminal summary.
"""
import math
import time
from fractions import Fraction

import numpy as np

from conftest import central_diff, make_mixture, rel_err
from tailvi.divergences import Alpha, ForwardKL, TailAdaptive, batch_weights, empirical_tail_ccdf
from tailvi.divergences import f_divergence_quadrature
from tailvi.experiment import ExperimentConfig, run_experiment
from tailvi.gradients import draw_batch, reparam_contributions, reparam_update, score_contributions, score_update
from tailvi.mixtures import (
    DiagGaussianMixture,
    grad_x_log_density,
    log_density,
    pathwise_vjp,
    relaxed_point,
    sample_reparam,
    score_grad_log_q,
)
from tailvi.tails import hill_estimate


def test_rank_weight_law(acceptance_report):
    start = time.perf_counter()
    n = 10_000
    log_w = np.random.default_rng(0).permutation(np.linspace(-20.0, 20.0, n))
    lhs = math.fsum(empirical_tail_ccdf(log_w) ** -0.5) / n
    rhs = math.fsum((np.arange(1, n + 1) / n) ** -0.5) / n
    elapsed = time.perf_counter() - start
    ok = lhs == rhs and abs(rhs - 2.0) <= 0.05 and elapsed < 1.0
    acceptance_report("1 rank-weight law", ok, f"mean {lhs:.6f} vs rank sum {rhs:.6f} (|.-2| = {abs(rhs - 2):.4f}), {elapsed:.2f}s")
    assert ok


def test_gaussian_ratio_tail_index(acceptance_report):
    start = time.perf_counter()
    sp, sq = 2.0, 1.0
    hits, ests = 0, []
    for seed in range(20):
        x = np.random.default_rng(seed).normal(scale=sq, size=100_000)
        log_w = math.log(sq / sp) + 0.5 * x**2 * (1 / sq**2 - 1 / sp**2)
        est = hill_estimate(log_w, 1000)
        ests.append(est)
        hits += 1.03 <= est <= 1.63
    elapsed = time.perf_counter() - start
    ok = hits >= 18 and elapsed < 10.0
    acceptance_report("2 gaussian-ratio tail index", ok,
                      f"{hits}/20 seeds in [1.03, 1.63], range [{min(ests):.3f}, {max(ests):.3f}], {elapsed:.2f}s")
    assert ok


def test_gradient_correctness(acceptance_report):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = dict(grad_x_log_density=0.0, score_grad_log_q=0.0, pathwise_vjp=0.0)
    for _ in range(100):
        mix = make_mixture(rng)
        x = rng.normal(scale=2.0, size=mix.d)
        fd = central_diff(lambda y: log_density(mix, y), x)
        worst["grad_x_log_density"] = max(worst["grad_x_log_density"], rel_err(grad_x_log_density(mix, x), fd))
        fd = central_diff(lambda th: log_density(mix.with_flat(th), x), mix.flatten())
        worst["score_grad_log_q"] = max(worst["score_grad_log_q"], rel_err(score_grad_log_q(mix, x).flatten(), fd))

        sample = sample_reparam(mix, 0.5, rng)
        cot = rng.normal(size=mix.d)

        def pushed(th):
            point, _ = relaxed_point(mix.with_flat(th), sample.gaussian_seeds, sample.gumbel_seeds, sample.temperature)
            return cot @ point

        fd = central_diff(pushed, mix.flatten())
        worst["pathwise_vjp"] = max(worst["pathwise_vjp"], rel_err(pathwise_vjp(mix, sample, cot).flatten(), fd))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-4 and elapsed < 10.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    acceptance_report("3 gradient correctness", ok, f"max rel err {detail}; {elapsed:.2f}s")
    assert ok


def test_estimator_unbiasedness(acceptance_report):
    theta = 0.5
    p, q = DiagGaussianMixture.gaussian(0.0, 1.0), DiagGaussianMixture.gaussian(theta, 1.0)
    rng = np.random.default_rng(7)

    batch = draw_batch(p, q, 100_000, 0.1, rng)
    r_dir = reparam_update(ForwardKL(), q, batch).direction.d_means[0, 0]
    per = reparam_contributions(q, batch).d_means[:, 0, 0]
    r_se = per.std(ddof=1) / math.sqrt(per.size)
    # the pathwise term is exactly -theta for every draw here, so the SE is 0
    r_ok = abs(r_dir + theta) <= 3 * r_se + 1e-12

    batch = draw_batch(p, q, 1_000_000, 0.1, rng)
    s_dir = score_update(ForwardKL(), q, batch).direction.d_means[0, 0]
    per = (batch.log_ratio - 1.0) * score_contributions(q, batch).d_means[:, 0, 0]
    s_se = per.std(ddof=1) / math.sqrt(per.size)
    s_ok = abs(s_dir + theta) <= 3 * s_se
    ok = r_ok and s_ok
    acceptance_report("4 estimator unbiasedness", ok,
                      f"reparam {r_dir:.6f} (se {r_se:.1e}), score {s_dir:.5f} (se {s_se:.1e}) vs -0.5")
    assert ok


def test_hessian_quadrature(acceptance_report):
    var_q = 0.81
    # E_q[(p/q)^2] - 1 for p = N(0, 1), q = N(0, var_q)
    chi2 = math.sqrt(var_q) / math.sqrt(2.0 - 1.0 / var_q) - 1.0
    got_chi2 = f_divergence_quadrature(lambda m: np.full_like(m, 2.0), DiagGaussianMixture.gaussian(0.0, 1.0),
                                       DiagGaussianMixture.gaussian(0.0, math.sqrt(var_q)), 100_000, rng_seed=0)
    got_kl = f_divergence_quadrature(lambda m: 1.0 / m, DiagGaussianMixture.gaussian(0.0, 1.0),
                                     DiagGaussianMixture.gaussian(0.3, 1.0), 100_000, rng_seed=0)
    e1, e2 = abs(got_chi2 / chi2 - 1), abs(got_kl / 0.045 - 1)
    ok = e1 <= 0.05 and e2 <= 0.05
    acceptance_report("5 hessian quadrature", ok,
                      f"chi^2 {got_chi2:.5f} vs {chi2:.5f} ({e1:.1%}), KL {got_kl:.5f} vs 0.045 ({e2:.1%})")
    assert ok


def test_mixture_mode_shift_ordering(acceptance_report, tmp_path):
    start = time.perf_counter()
    cfg = ExperimentConfig(dimension=10, non_gaussianity=5.0, target_components=10, batch_size=256,
                           iterations=2000, trials=10, seed=0,
                           divergence_specs=(TailAdaptive(-1.0), ForwardKL()),
                           output_path=str(tmp_path / "mixture.csv"))
    _, summary = run_experiment(cfg)
    elapsed = time.perf_counter() - start
    by_spec = {rec[0]: rec for rec in summary}
    ta, kl = by_spec["tail-adaptive:-1"], by_spec["kl-forward"]
    ok = ta[3] < kl[3] and ta[2] == 0 and elapsed < 600
    acceptance_report("6 mixture mode-shift ordering", ok,
                      f"tail-adaptive {ta[3]:.3f} (se {ta[4]:.3f}, {ta[2]} aborted) vs forward KL "
                      f"{kl[3]:.3f} (se {kl[4]:.3f}), {elapsed:.0f}s")
    assert ok


def test_extreme_ratio_robustness(acceptance_report):
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    q = DiagGaussianMixture(np.zeros(3), rng.normal(size=(3, 2)), np.zeros((3, 2)))
    p = DiagGaussianMixture(np.zeros(2), rng.normal(size=(2, 2)), np.zeros((2, 2)))
    batch = draw_batch(p, q, 64, 0.1, rng)
    log_p = batch.log_q + rng.normal(size=len(batch))
    log_p[17] = batch.log_q[17] + 700.0
    batch = batch.with_log_p(log_p)
    n = len(batch)

    # rank oracle by brute force, in exact rationals
    lr = batch.log_ratio
    ranks = [Fraction(sum(1 for b in lr if b >= a), n) for a in lr]
    raw = [1 / r for r in ranks]
    top = max(range(n), key=lambda i: lr[i])
    bound = Fraction(n) / (n + sum(raw) - raw[top])

    ta = reparam_update(TailAdaptive(-1.0), q, batch)
    al = reparam_update(Alpha(2.0), q, batch)
    ta_ok = (ta.direction.is_finite() and np.all(np.isfinite(ta.weights.normalized))
             and ta.weights.max_fraction <= float(bound) * (1 + 1e-12) and ta.weights.ess > 1)
    al_ok = (al.weights.ess == 1.0 and al.direction.is_finite() and np.all(np.isfinite(al.weights.normalized))
             and batch_weights(Alpha(2.0), lr).max_fraction == 1.0)
    elapsed = time.perf_counter() - start
    ok = ta_ok and al_ok and elapsed < 1.0
    acceptance_report("7 extreme-ratio robustness", ok,
                      f"tail-adaptive max frac {ta.weights.max_fraction:.4f} <= {float(bound):.4f}, ess "
                      f"{ta.weights.ess:.2f}; alpha:2 ess {al.weights.ess:g}; {elapsed:.2f}s")
    assert ok


def test_determinism(acceptance_report, tmp_path):
    def run(name):
        cfg = ExperimentConfig(dimension=3, non_gaussianity=3.0, batch_size=64, iterations=50, eval_every=25,
                               trials=2, eval_samples=2000, seed=42,
                               divergence_specs=("tail-adaptive:-1", "kl-forward", "alpha:0.5"),
                               output_path=str(tmp_path / name))
        run_experiment(cfg)
        return (tmp_path / name).read_bytes()

    a, b = run("a.csv"), run("b.csv")
    ok = a == b and len(a) > 0
    acceptance_report("8 determinism", ok, f"two runs byte-identical ({len(a)} bytes)")
    assert ok
