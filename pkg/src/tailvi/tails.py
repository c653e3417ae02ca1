"""Tail-index diagnostics for importance weights.

The tail index ``a*`` of ``w = p(x)/q(x)`` decides which moments of the
weights exist: ``E[w**a] < inf`` iff ``a < a*``.  These helpers estimate it
from samples (Hill) and give its closed form for a pair of centred
Gaussians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "INFINITE_INDEX",
    "DegenerateTailError",
    "TailIndexReport",
    "default_k",
    "hill_estimate",
    "analytic_gaussian_ratio_tail_index",
    "moment_existence_probe",
    "tail_report",
]

#: Returned when the ratio is bounded, i.e. every moment exists.
INFINITE_INDEX = math.inf


class DegenerateTailError(ValueError):
    """The top order statistics are all equal, so the Hill denominator is zero."""


@dataclass(frozen=True)
class TailIndexReport:
    hill_estimate: float
    order_statistics_used: int
    sample_size: int
    analytic_index: Optional[float] = None


def default_k(n: int) -> int:
    """``floor(n**0.6)`` capped at ``n/10`` and floored at 2."""
    return max(2, min(int(math.floor(n**0.6 + 1e-9)), n // 10))


def hill_estimate(log_w, k: int) -> float:
    """Hill estimator of the tail index from the ``k`` largest log-weights.

    ``k / sum_{i=1..k} (L_(n-i) - L_(n-k-1))`` where ``L`` is ``log_w``
    sorted ascending (0-based).  Only log-spacings enter, so a constant shift
    of ``log_w`` leaves the estimate unchanged.
    """
    log_w = np.asarray(log_w, dtype=float).ravel()
    n = log_w.size
    if not 2 <= k < n:
        raise ValueError(f"need 2 <= k < n, got k={k}, n={n}")
    if not np.all(np.isfinite(log_w)):
        raise ValueError("log-weights must be finite")
    ordered = np.sort(log_w)
    spacings = ordered[n - k :] - ordered[n - k - 1]
    total = spacings.sum()
    if total <= 0.0:
        raise DegenerateTailError("top order statistics are all equal; Hill estimate undefined")
    return float(k / total)


def analytic_gaussian_ratio_tail_index(sigma_p: float, sigma_q: float) -> float:
    """Tail index of ``N(0, sigma_p^2) / N(0, sigma_q^2)`` under ``x ~ q``.

    ``sigma_p^2 / (sigma_p^2 - sigma_q^2)`` when ``sigma_p > sigma_q``;
    otherwise the ratio is bounded and :data:`INFINITE_INDEX` is returned.
    """
    if not (sigma_p > 0 and sigma_q > 0):
        raise ValueError("scales must be positive")
    if sigma_p <= sigma_q:
        return INFINITE_INDEX
    vp, vq = sigma_p**2, sigma_q**2
    return vp / (vp - vq)


def moment_existence_probe(log_w, alpha: float) -> float:
    """Log of the empirical ``alpha``-th moment, ``log mean(w**alpha)``.

    This is a diagnostic only.  When ``alpha`` exceeds the tail index the
    value keeps growing with the sample size instead of settling; it makes
    no claim about statistical significance.
    """
    log_w = np.asarray(log_w, dtype=float).ravel()
    if log_w.size == 0:
        raise ValueError("need at least one log-weight")
    return float(logsumexp(alpha * log_w) - math.log(log_w.size))


def tail_report(log_w, k: Optional[int] = None, analytic_index: Optional[float] = None) -> TailIndexReport:
    log_w = np.asarray(log_w, dtype=float).ravel()
    n = log_w.size
    k = default_k(n) if k is None else k
    return TailIndexReport(hill_estimate(log_w, k), k, n, analytic_index)
