from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import Parameter


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    weight_decay: float = 1e-5
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


def adam_step(params: list[Parameter], state: AdamState) -> None:
    """One Adam update in place; L2 weight decay is added to the gradient."""
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    if len(state.m) != len(params):
        raise ValueError("optimizer state does not match parameter list")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, m, v in zip(params, state.m, state.v):
        if m.shape != p.data.shape:
            raise ValueError("moment buffer shape mismatch")
        g = p.grad + state.weight_decay * p.data if state.weight_decay else p.grad
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        update = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.data -= update.astype(p.data.dtype, copy=False)


class Adam:
    def __init__(self, params: list[Parameter], **hyper):
        self.params = params
        self.state = AdamState(**hyper)

    def step(self):
        adam_step(self.params, self.state)

    def zero_grad(self):
        for p in self.params:
            p.grad[...] = 0
