"""Adaptive-moment optimizers, gradient clipping, and learning-rate schedules."""

from __future__ import annotations

import math
from typing import Iterable, Mapping

import numpy as np

from ..errors import ConfigError, NumericError
from .tensor import Tensor

__all__ = [
    "Adam",
    "AdamW",
    "clip_gradients",
    "global_grad_norm",
    "PlateauHalving",
    "CosineAnnealing",
    "ConstantLr",
]


class Adam:
    """Adam with bias correction; weight decay is folded into the gradient.

    Moments live per parameter and always share its shape. The step counter
    increases by exactly one per accepted update; a NaN/Inf gradient refuses
    the whole step before any state is touched.
    """

    decoupled = False

    def __init__(self, params: Mapping[str, Tensor], lr: float = 1e-4,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.params = dict(params)
        self.lr = float(lr)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = float(weight_decay)
        self.step_count = 0
        self._m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self._v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> None:
        grads = {}
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for parameter '{name}'; step refused")
            grads[name] = g

        self.step_count += 1
        t = self.step_count
        bias1 = 1.0 - self.beta1 ** t
        bias2 = 1.0 - self.beta2 ** t
        for name, p in self.params.items():
            g = grads[name]
            if self.weight_decay:
                if self.decoupled:
                    p.data *= 1.0 - self.lr * self.weight_decay
                else:
                    g = g + self.weight_decay * p.data
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / bias1
            v_hat = v / bias2
            p.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype)


class AdamW(Adam):
    """Adam with decoupled weight decay, applied before the moment update."""

    decoupled = True


def global_grad_norm(grads: Iterable[np.ndarray]) -> float:
    total = 0.0
    for g in grads:
        total += float(np.sum(np.asarray(g, dtype=np.float64) ** 2))
    return math.sqrt(total)


def clip_gradients(grads, max_norm: float = 1.0) -> float:
    """Scale the whole gradient set so its global L2 norm is <= ``max_norm``.

    Accepts a mapping name -> array or an iterable of arrays; scales in place
    and returns the pre-clip norm. Direction is preserved exactly.
    """
    arrays = list(grads.values()) if isinstance(grads, Mapping) else list(grads)
    norm = global_grad_norm(arrays)
    if norm > max_norm:
        factor = max_norm / norm
        for g in arrays:
            g *= factor
    return norm


class PlateauHalving:
    """Halve the rate after ``patience`` epochs without a strictly lower loss.

    Any decrease below the best seen value resets the stale counter; the rate
    is exactly base * 2**-k after k halvings.
    """

    kind = "plateau-halving"

    def __init__(self, base_lr: float, patience: int = 3):
        if patience < 1:
            raise ConfigError(f"patience must be >= 1, got {patience}")
        self.base_lr = float(base_lr)
        self.patience = patience
        self.rate = float(base_lr)
        self.best: float | None = None
        self.stale = 0

    def update(self, val_loss: float) -> float:
        """Record one epoch's validation loss and return the rate to use next."""
        if self.best is None or val_loss < self.best:
            self.best = val_loss
            self.stale = 0
        else:
            self.stale += 1
            if self.stale >= self.patience:
                self.rate /= 2.0
                self.stale = 0
        return self.rate


class CosineAnnealing:
    """Cosine decay base * 0.5 * (1 + cos(pi * t / T)) over a horizon of T epochs."""

    kind = "cosine-annealing"

    def __init__(self, base_lr: float, total_epochs: int):
        if total_epochs < 1:
            raise ConfigError(f"cosine horizon must be >= 1, got {total_epochs}")
        self.base_lr = float(base_lr)
        self.total_epochs = total_epochs
        self.rate = float(base_lr)

    def rate_at(self, epoch: int) -> float:
        t = min(max(epoch, 0), self.total_epochs)
        self.rate = self.base_lr * 0.5 * (1.0 + math.cos(math.pi * t / self.total_epochs))
        return self.rate


class ConstantLr:
    kind = "constant"

    def __init__(self, base_lr: float):
        self.base_lr = float(base_lr)
        self.rate = float(base_lr)
