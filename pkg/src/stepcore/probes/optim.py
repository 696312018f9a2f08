"""Adaptive moment optimizer with decoupled weight decay, plus cosine
annealing. Written out from the published update rule so trajectories are
bit-reproducible at float64 for a given seed, independent of any
framework's internals.
"""

from __future__ import annotations

import math

import numpy as np


class AdamW:
    """Per-parameter moment estimates with bias correction; weight decay
    is applied directly to the parameter, scaled by the current lr."""

    def __init__(
        self,
        params: list[np.ndarray],
        lr: float = 3e-4,
        weight_decay: float = 1e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p) for p in params]
        self._v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            p -= self.lr * (m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p)


class CosineSchedule:
    """Anneal lr from its initial value to zero over ``total_steps``."""

    def __init__(self, optimizer: AdamW, total_steps: int):
        if total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        self.optimizer = optimizer
        self.base_lr = optimizer.lr
        self.total_steps = total_steps
        self._step = 0

    def step(self) -> None:
        self._step = min(self._step + 1, self.total_steps)
        self.optimizer.lr = 0.5 * self.base_lr * (
            1.0 + math.cos(math.pi * self._step / self.total_steps)
        )
