"""Adam with bias correction, over flat name -> array maps."""

from dataclasses import dataclass
from typing import Dict

import numpy as np

from .errors import NumericalError, ShapeError


@dataclass
class AdamConfig:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class AdamState:
    def __init__(self):
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def _ensure(self, name, shape):
        if name not in self.m:
            self.m[name] = np.zeros(shape, np.float32)
            self.v[name] = np.zeros(shape, np.float32)


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
    cfg: AdamConfig,
    t: int,
):
    """One in-place update; t is 1-based. Non-finite gradients abort the step."""
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    for name, g in grads.items():
        if g is not None and not np.isfinite(g).all():
            raise NumericalError(f"non-finite gradient for {name}; step aborted")
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        elif g.shape != p.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.shape} for {name}")
        state._ensure(name, p.shape)
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        p -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
