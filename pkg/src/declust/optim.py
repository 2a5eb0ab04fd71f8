"""AdamW with decoupled weight decay, in a pure-functional style.

State and parameters are never mutated; each step returns fresh copies so
runs are reproducible and snapshots are free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class OptimError(ValueError):
    """Raised for shape mismatches or non-finite gradients."""


@dataclass(frozen=True)
class OptimizerState:
    """First/second moment accumulators keyed like the parameters."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0


def init_state(tensors: dict[str, np.ndarray]) -> OptimizerState:
    return OptimizerState(
        m={k: np.zeros_like(t) for k, t in tensors.items()},
        v={k: np.zeros_like(t) for k, t in tensors.items()},
        step=0,
    )


def adamw_step(
    tensors: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    lr: float = 3e-5,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.01,
):
    """One AdamW update; returns (new_tensors, new_state).

    Weight decay is decoupled: w <- w - lr*decay*w is applied separately from
    the bias-corrected moment update, so decay never leaks into the moments.
    """
    if set(tensors) != set(grads):
        raise OptimError(f"parameter/gradient key mismatch: {sorted(set(tensors) ^ set(grads))}")
    step = state.step + 1
    new_t: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for key in sorted(tensors):
        w, g = tensors[key], grads[key]
        if w.shape != g.shape:
            raise OptimError(f"shape mismatch for {key!r}: {w.shape} vs {g.shape}")
        if not np.isfinite(g).all():
            raise OptimError(f"non-finite gradient for {key!r}")
        m = beta1 * state.m[key] + (1.0 - beta1) * g
        v = beta2 * state.v[key] + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**step)
        v_hat = v / (1.0 - beta2**step)
        new_t[key] = w - lr * (m_hat / (np.sqrt(v_hat) + eps) + weight_decay * w)
        new_m[key] = m
        new_v[key] = v
    return new_t, OptimizerState(new_m, new_v, step)
