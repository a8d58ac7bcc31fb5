"""Adam with linear warm-up followed by linear decay."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass
class OptimizerState:
    base_lr: float = 2e-4
    warmup_frac: float = 0.1
    total_steps: int | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def lr_at(self, step: int) -> float:
        return lr_at(step, self.base_lr, self.total_steps, self.warmup_frac)


def lr_at(step: int, base_lr: float, total_steps: int | None, warmup_frac: float = 0.1) -> float:
    """Learning rate after ``step`` updates: 0 -> base over the warm-up, then down to 0.

    ``total_steps=None`` means a constant ``base_lr``.
    """
    if not total_steps:
        return base_lr
    warm = warmup_frac * total_steps
    if step < warm:
        return base_lr * step / warm
    if total_steps <= warm:
        return base_lr
    return base_lr * max(0.0, (total_steps - step) / (total_steps - warm))


def adam_step(state: OptimizerState, params: dict, grads: dict | None = None,
              lr: float | None = None, clip_norm: float | None = None) -> float:
    """Apply one Adam update in place to ``params`` (name -> Tensor).

    ``grads`` defaults to each tensor's ``.grad``. Update ``t`` (1-based)
    uses ``lr_at(t)`` unless ``lr`` is given. Returns the rate used.
    """
    if grads is None:
        grads = {name: p.grad for name, p in params.items()}
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient for parameter {name!r}")
    if clip_norm is not None:
        total = np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values()))
        if total > clip_norm:
            scale = clip_norm / total
            grads = {k: g * scale for k, g in grads.items()}
    state.step += 1
    t = state.step
    rate = state.lr_at(t) if lr is None else lr
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.values)
            state.v[name] = np.zeros_like(p.values)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        upd = (rate / c1) * m / (np.sqrt(v / c2) + state.eps)
        p.values -= upd.astype(p.values.dtype, copy=False)
    return rate
