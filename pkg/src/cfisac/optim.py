"""Adam optimizer with bias correction, operating on named parameter arrays."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, MutableMapping

import numpy as np

Array = np.ndarray


@dataclass
class AdamState:
    """First/second moment estimates plus the step counter.

    Defaults beta1=0.9, beta2=0.999, eps=1e-8 are the optimizer's canonical
    values; only the learning rate is experiment-specific.
    """

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, Array] = field(default_factory=dict)
    v: dict[str, Array] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Mapping[str, Array], lr: float = 1e-4, **kw) -> "AdamState":
        state = cls(lr=lr, **kw)
        state.m = {k: np.zeros_like(p) for k, p in params.items()}
        state.v = {k: np.zeros_like(p) for k, p in params.items()}
        return state


def adam_step(params: MutableMapping[str, Array],
              grads: Mapping[str, Array],
              state: AdamState) -> None:
    """One Adam update, in place on `params`.

    Rejects the whole step (state untouched) if any gradient is non-finite,
    naming the offending parameter.
    """
    for name in params:
        g = grads[name]
        if g.shape != params[name].shape:
            raise ValueError(f"adam_step: gradient shape {g.shape} != parameter "
                             f"shape {params[name].shape} for '{name}'")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"adam_step: non-finite gradient for parameter '{name}'")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
