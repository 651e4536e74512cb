"""Adam with a staircase learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdamConfig:
    lr0: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_factor: float = 0.9
    decay_every: int = 2000


def staircase_lr(cfg: AdamConfig, step: int) -> float:
    """lr0 * factor^floor(step / every)."""
    return cfg.lr0 * cfg.decay_factor ** (step // cfg.decay_every)


class AdamState:
    """First/second moment buffers plus the step counter."""

    def __init__(self, params: dict[str, np.ndarray]):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.step = 0


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    cfg: AdamConfig = AdamConfig(),
) -> float:
    """One bias-corrected Adam update, in place. Returns the lr used."""
    lr = staircase_lr(cfg, state.step)
    state.step += 1
    t = state.step
    correction1 = 1.0 - cfg.beta1**t
    correction2 = 1.0 - cfg.beta2**t
    for name, g in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        params[name] -= (lr * m_hat / (np.sqrt(v_hat) + cfg.eps)).astype(params[name].dtype)
    return lr
