"""Gaussian-mixture VI experiment: random targets, training loop, CSV metrics."""
from __future__ import annotations

import configparser
import csv
import io
import logging
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .divergences import DivergenceSpec, TailAdaptive, ForwardKL, parse_spec
from .gradients import draw_batch, reparam_update, score_update
from .mixtures import DiagGaussianMixture, log_density, mixture_moments, sample_exact
from .optim import apply_step, make_optimizer
from .tails import DegenerateTailError, default_k, hill_estimate

__all__ = [
    "ExperimentConfig",
    "MetricsRow",
    "CSV_COLUMNS",
    "SUMMARY_COLUMNS",
    "make_random_target",
    "init_variational",
    "mode_shift_distance",
    "moment_mse",
    "run_trial",
    "run_experiment",
    "load_config_file",
    "format_rows",
]

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "trial", "spec", "iteration", "mode_shift", "mean_mse_log10",
    "var_mse_log10", "ess", "max_weight_fraction", "hill_alpha",
)
SUMMARY_COLUMNS = (
    "spec", "trials", "aborted",
    "mode_shift_mean", "mode_shift_se",
    "mean_mse_log10_mean", "mean_mse_log10_se",
    "var_mse_log10_mean", "var_mse_log10_se",
)


@dataclass(frozen=True)
class ExperimentConfig:
    dimension: int = 2
    non_gaussianity: float = 5.0
    target_components: int = 10
    proposal_components: int = 20
    batch_size: int = 256
    iterations: int = 10_000
    learning_rate: float = 0.05
    optimizer: str = "adagrad"
    gumbel_temperature: float = 0.1
    divergence_specs: tuple = (TailAdaptive(-1.0), ForwardKL())
    trials: int = 10
    seed: int = 0
    output_path: str = "results.csv"
    eval_every: int = 100
    estimator: str = "reparam"
    eval_samples: int = 10_000
    jobs: int = 1

    def __post_init__(self):
        specs = tuple(parse_spec(s) if isinstance(s, str) else s for s in self.divergence_specs)
        object.__setattr__(self, "divergence_specs", specs)
        for name in ("dimension", "target_components", "proposal_components", "batch_size",
                     "trials", "eval_every", "eval_samples", "jobs"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.non_gaussianity < 0:
            raise ValueError("non_gaussianity must be >= 0")
        if not self.gumbel_temperature > 0:
            raise ValueError("gumbel_temperature must be positive")
        if not specs:
            raise ValueError("at least one divergence spec is required")
        if self.estimator not in ("reparam", "score"):
            raise ValueError("estimator must be 'reparam' or 'score'")
        if self.eval_samples < 2:
            raise ValueError("eval_samples must be >= 2")

    @property
    def summary_path(self) -> str:
        root, ext = os.path.splitext(self.output_path)
        return f"{root}_summary{ext or '.csv'}"


# config-file keys and CLI flags share names; values are converted by field type
_KEY_ALIASES = {
    "dim": "dimension",
    "scale": "non_gaussianity",
    "batch": "batch_size",
    "iters": "iterations",
    "lr": "learning_rate",
    "temperature": "gumbel_temperature",
    "spec": "divergence_specs",
    "specs": "divergence_specs",
    "out": "output_path",
    "k": "target_components",
}


def _field_types():
    return {f.name: f.type for f in fields(ExperimentConfig)}


def coerce_config_value(name: str, raw):
    """Convert a text value for config field ``name``."""
    kind = _field_types()[name]
    if name == "divergence_specs":
        if isinstance(raw, str):
            raw = [s for s in raw.replace(";", ",").split(",") if s.strip()]
        return tuple(parse_spec(s) if isinstance(s, str) else s for s in raw)
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return str(raw)


def canonical_key(key: str) -> str:
    key = key.strip().lower().replace("-", "_")
    key = _KEY_ALIASES.get(key, key)
    if key not in _field_types():
        raise KeyError(f"unknown configuration key {key!r}")
    return key


def load_config_file(path) -> dict:
    """Read ``key = value`` lines (``#`` comments allowed) into config fields."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.read_string("[experiment]\n" + text, source=str(path))
    return {canonical_key(k): coerce_config_value(canonical_key(k), v) for k, v in parser["experiment"].items()}


@dataclass(frozen=True)
class MetricsRow:
    trial: int
    spec: str
    iteration: int
    mode_shift: float
    mean_mse_log10: float
    var_mse_log10: float
    ess: float
    max_weight_fraction: float
    hill_alpha: Optional[float] = None

    def as_tuple(self):
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


def make_random_target(d: int, s: float, k: int, rng) -> DiagGaussianMixture:
    """Equal-weight unit-variance mixture with means uniform on ``[-s, s]^d``."""
    if s < 0:
        raise ValueError("s must be non-negative")
    means = rng.uniform(-s, s, size=(k, d))
    return DiagGaussianMixture(np.zeros(k), means, np.zeros((k, d)))


def init_variational(d: int, proposal_components: int, rng) -> DiagGaussianMixture:
    """Uniform weights, standard-normal means, unit scales."""
    m = proposal_components
    return DiagGaussianMixture(np.zeros(m), rng.standard_normal((m, d)), np.zeros((m, d)))


def mode_shift_distance(target_means, q_means) -> float:
    """Average distance from each target mode to its nearest variational mode."""
    a = np.atleast_2d(np.asarray(target_means, dtype=float))
    b = np.atleast_2d(np.asarray(q_means, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("mean sets must be non-empty")
    if a.shape[1] != b.shape[1]:
        raise ValueError("mean sets have different dimensions")
    dist = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return float(dist.min(axis=1).mean())


def moment_mse(target: DiagGaussianMixture, q: DiagGaussianMixture):
    """Per-dimension averaged squared errors of the mixture mean and variance."""
    if target.d != q.d:
        raise ValueError("dimension mismatch")
    mp, vp = mixture_moments(target)
    mq, vq = mixture_moments(q)
    return float(np.mean((mp - mq) ** 2)), float(np.mean((vp - vq) ** 2))


def _log10(x: float) -> float:
    return math.log10(x) if x > 0 else -math.inf


def _trial_seeds(seed: int, trial: int, label: str):
    """(setup, training) seed sequences; setup is shared by all specs of a trial."""
    setup = np.random.SeedSequence([seed, trial])
    training = np.random.SeedSequence([seed, trial, zlib.crc32(label.encode())])
    return setup, training


def _metrics(config, trial, label, it, target, q, weights, eval_rng):
    shift = mode_shift_distance(target.means, q.means)
    mean_mse, var_mse = moment_mse(target, q)
    x = sample_exact(q, config.eval_samples, eval_rng)
    log_w = log_density(target, x) - log_density(q, x)
    try:
        hill = hill_estimate(log_w, default_k(log_w.size))
    except DegenerateTailError:
        hill = None
    return MetricsRow(
        trial, label, it, shift, _log10(mean_mse), _log10(var_mse),
        weights.ess, weights.max_fraction, hill,
    )


def run_trial(config: ExperimentConfig, trial_index: int, spec: DivergenceSpec | None = None) -> list:
    """Train one variational mixture under ``spec`` and return its metric rows.

    Rows are recorded at iteration 0, every ``eval_every`` iterations, and
    at the final iteration.  If the parameters or the direction become
    non-finite the trial stops with a row of NaN metrics.
    """
    spec = config.divergence_specs[0] if spec is None else spec
    label = spec.label
    setup_seq, train_seq = _trial_seeds(config.seed, trial_index, label)
    target_rng, init_rng = (np.random.default_rng(s) for s in setup_seq.spawn(2))
    train_rng, eval_rng = (np.random.default_rng(s) for s in train_seq.spawn(2))

    target = make_random_target(config.dimension, config.non_gaussianity, config.target_components, target_rng)
    q = init_variational(config.dimension, config.proposal_components, init_rng)
    params = q.flatten()
    opt = make_optimizer(config.optimizer, params.size, config.learning_rate)
    update = reparam_update if config.estimator == "reparam" else score_update

    rows = []
    for it in range(config.iterations + 1):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                batch = draw_batch(target, q, config.batch_size, config.gumbel_temperature, train_rng)
                est = update(spec, q, batch)
            if it % config.eval_every == 0 or it == config.iterations:
                rows.append(_metrics(config, trial_index, label, it, target, q, est.weights, eval_rng))
            if it == config.iterations:
                break
            params, opt = apply_step(opt, params, est.direction.flatten())
            q = q.with_flat(params)
        except (ValueError, FloatingPointError) as exc:
            log.warning("trial %d (%s) aborted at iteration %d: %s", trial_index, label, it, exc)
            nan = math.nan
            rows.append(MetricsRow(trial_index, label, it, nan, nan, nan, nan, nan, None))
            break
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.9g}"


def format_rows(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _summarize(config, all_rows):
    out = []
    for spec in config.divergence_specs:
        finals = {}
        for r in all_rows:
            if r.spec == spec.label:
                finals[r.trial] = r  # rows are in iteration order; keep the last
        done = [r for r in finals.values() if math.isfinite(r.mode_shift)]
        stats = [spec.label, len(finals), len(finals) - len(done)]
        for col in ("mode_shift", "mean_mse_log10", "var_mse_log10"):
            vals = np.array([getattr(r, col) for r in done], dtype=float)
            if vals.size == 0:
                stats += [math.nan, math.nan]
                continue
            mean = float(np.mean(vals))
            se = float(np.std(vals, ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.nan
            stats += [mean, se]
        out.append(tuple(stats))
    return out


def _run_job(args):
    config, trial, spec = args
    return run_trial(config, trial, spec)


def run_experiment(config: ExperimentConfig):
    """Run every (trial, spec) pair and write the metrics and summary CSVs.

    Returns ``(rows, summary_rows)``.  Output is a pure function of the config.
    """
    jobs = [(config, t, s) for t in range(config.trials) for s in config.divergence_specs]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    rows = [r for res in results for r in res]
    summary = _summarize(config, rows)

    for path, text in (
        (config.output_path, format_rows(CSV_COLUMNS, (r.as_tuple() for r in rows))),
        (config.summary_path, format_rows(SUMMARY_COLUMNS, summary)),
    ):
        try:
            parent = Path(path).parent
            parent.mkdir(parents=True, exist_ok=True)
            Path(path).write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write results to {path}: {exc}") from exc
    return rows, summary
