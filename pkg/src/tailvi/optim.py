"""Adagrad and Adam on flat parameter vectors.

Directions are ascent directions (see ``gradients``), so every update adds
to the parameters.  States are immutable; ``apply_step`` returns new ones.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

import numpy as np

__all__ = ["AdagradState", "AdamState", "OptimizerState", "make_optimizer", "apply_step"]


@dataclass(frozen=True)
class AdagradState:
    accumulator: np.ndarray
    lr: float = 0.05
    numeric_floor: float = 1e-8


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    numeric_floor: float = 1e-8


OptimizerState = Union[AdagradState, AdamState]


def make_optimizer(name: str, n_params: int, lr: float, **kwargs) -> OptimizerState:
    name = name.lower()
    if name == "adagrad":
        return AdagradState(np.zeros(n_params), lr, **kwargs)
    if name == "adam":
        return AdamState(np.zeros(n_params), np.zeros(n_params), 0, lr, **kwargs)
    raise ValueError(f"unknown optimizer {name!r} (expected 'adagrad' or 'adam')")


def apply_step(state: OptimizerState, params, direction):
    """Move ``params`` along ``direction``; returns ``(new_params, new_state)``."""
    params = np.asarray(params, dtype=float)
    g = np.asarray(direction, dtype=float)
    if params.shape != g.shape:
        raise ValueError(f"parameter/direction shape mismatch: {params.shape} vs {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("direction contains non-finite entries")

    if isinstance(state, AdagradState):
        if state.accumulator.shape != g.shape:
            raise ValueError("optimizer state does not match parameter count")
        acc = state.accumulator + g * g
        new = params + state.lr * g / (np.sqrt(acc) + state.numeric_floor)
        return new, replace(state, accumulator=acc)

    if isinstance(state, AdamState):
        if state.m.shape != g.shape:
            raise ValueError("optimizer state does not match parameter count")
        t = state.step + 1
        m = state.beta1 * state.m + (1.0 - state.beta1) * g
        v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        new = params + state.lr * m_hat / (np.sqrt(v_hat) + state.numeric_floor)
        return new, replace(state, m=m, v=v, step=t)

    raise TypeError(f"unknown optimizer state {type(state).__name__}")
