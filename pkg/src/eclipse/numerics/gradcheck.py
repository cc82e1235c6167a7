"""Central finite-difference gradient checking.

The numeric side only ever calls the forward pass, so it stays an
independent oracle for whatever the tape computes.
"""
from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .tensor import Array, Tape, Tensor


def numeric_grad(forward: Callable[[], Tensor], wrt: Tensor,
                 h: float = 1e-5) -> Array:
    """d forward() / d wrt via central differences, entry by entry."""
    grad = np.zeros_like(wrt.data)
    flat = wrt.data.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = float(forward().data)
        flat[i] = keep - h
        down = float(forward().data)
        flat[i] = keep
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic: Array, numeric: Array) -> float:
    """max over entries of |analytic - numeric| / (|analytic| + 1e-8)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    return float(np.max(np.abs(analytic - numeric) / (np.abs(analytic) + 1e-8)))


def check_gradients(forward: Callable[[], Tensor],
                    wrt: Iterable[Tensor], h: float = 1e-5) -> float:
    """Worst relative error between tape gradients and finite differences."""
    wrt = list(wrt)
    with Tape() as tape:
        loss = forward()
    grads = tape.backward(loss)
    worst = 0.0
    for t in wrt:
        analytic = grads.get(t, np.zeros_like(t.data))
        numeric = numeric_grad(forward, t, h=h)
        worst = max(worst, relative_error(analytic, numeric))
    return worst
