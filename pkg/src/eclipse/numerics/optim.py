"""Adam with classic (coupled) L2 weight decay."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Array, DimensionError, Tensor


@dataclass
class AdamState:
    """First/second moment accumulators keyed by parameter name."""
    step_count: int = 0
    m: dict[str, Array] = field(default_factory=dict)
    v: dict[str, Array] = field(default_factory=dict)

    def to_jsonable(self) -> dict:
        return {
            "step_count": self.step_count,
            "m": {k: v.ravel().tolist() for k, v in self.m.items()},
            "v": {k: v.ravel().tolist() for k, v in self.v.items()},
        }

    @classmethod
    def from_jsonable(cls, obj: dict, params: dict[str, Tensor]) -> "AdamState":
        state = cls(step_count=int(obj["step_count"]))
        for key in ("m", "v"):
            store = getattr(state, key)
            for name, flat in obj[key].items():
                store[name] = np.asarray(flat, dtype=np.float64).reshape(
                    params[name].shape
                )
        return state


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, Array],
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """In-place Adam update; missing gradients are treated as zero.

    Weight decay is added to the gradient (coupled L2), so decay also
    passes through the moment estimates.
    """
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        elif g.shape != p.data.shape:
            raise DimensionError(
                f"adam_step: grad shape {g.shape} != param shape {p.data.shape} "
                f"for {name!r}"
            )
        if weight_decay:
            g = g + weight_decay * p.data
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
