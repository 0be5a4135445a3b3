"""AdamW with decoupled weight decay, operating on lists of numpy arrays."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamWState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


@dataclass
class AdamW:
    lr: float = 1e-4
    weight_decay: float = 1e-5
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    state: AdamWState = field(default=None, repr=False)

    def step(self, params, grads):
        """Return updated copies of ``params``; the moment state advances in place."""
        if self.state is None:
            self.state = AdamWState.zeros_like(params)
        new, self.state = adamw_step(params, grads, self.state, self.lr, self.weight_decay,
                                     self.betas, self.eps)
        return new


def adamw_step(params, grads, state, lr, weight_decay, betas=(0.9, 0.999), eps=1e-8):
    b1, b2 = betas
    t = state.t + 1
    out, ms, vs = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p = p * (1 - lr * weight_decay) - lr * m_hat / (np.sqrt(v_hat) + eps)
        out.append(p)
        ms.append(m)
        vs.append(v)
    return out, AdamWState(ms, vs, t)
