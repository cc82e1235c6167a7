"""Linear, MLP, and LSTM-cell building blocks on top of the tape ops."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import (
    DimensionError,
    Tensor,
    add,
    matmul,
    mul,
    narrow,
    sigmoid,
    tanh,
)


def init_weight(n_out: int, n_in: int, rng: np.random.Generator) -> Tensor:
    """uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init, biases elsewhere zero."""
    bound = 1.0 / np.sqrt(n_in)
    return Tensor(rng.uniform(-bound, bound, size=(n_out, n_in)), requires_grad=True)


@dataclass
class LinearParams:
    w: Tensor  # (out, in)
    b: Tensor  # (out,)

    @property
    def out_features(self) -> int:
        return self.w.shape[0]


def init_linear(n_out: int, n_in: int, rng: np.random.Generator) -> LinearParams:
    return LinearParams(w=init_weight(n_out, n_in, rng),
                        b=Tensor(np.zeros(n_out), requires_grad=True))


def linear(p: LinearParams, x: Tensor) -> Tensor:
    return add(matmul(p.w, x), p.b)


@dataclass
class MlpParams:
    """Stack of linear layers with tanh between them (none after the last)."""
    layers: list[LinearParams] = field(default_factory=list)


def init_mlp(sizes: list[int], rng: np.random.Generator) -> MlpParams:
    if len(sizes) < 2:
        raise DimensionError("init_mlp: need at least input and output sizes")
    return MlpParams([init_linear(sizes[i + 1], sizes[i], rng)
                      for i in range(len(sizes) - 1)])


def mlp(p: MlpParams, x: Tensor) -> Tensor:
    h = x
    for i, layer in enumerate(p.layers):
        h = linear(layer, h)
        if i + 1 < len(p.layers):
            h = tanh(h)
    return h


@dataclass
class LstmCellParams:
    """Fused gate parameters, gate order i, f, g, o along the first axis."""
    w_ih: Tensor  # (4*hidden, input)
    w_hh: Tensor  # (4*hidden, hidden)
    b: Tensor     # (4*hidden,)
    hidden_size: int


def init_lstm(input_size: int, hidden_size: int,
              rng: np.random.Generator) -> LstmCellParams:
    return LstmCellParams(
        w_ih=init_weight(4 * hidden_size, input_size, rng),
        w_hh=init_weight(4 * hidden_size, hidden_size, rng),
        b=Tensor(np.zeros(4 * hidden_size), requires_grad=True),
        hidden_size=hidden_size,
    )


def lstm_step(p: LstmCellParams, x: Tensor, c_prev: Tensor,
              h_prev: Tensor) -> tuple[Tensor, Tensor]:
    """One LSTM cell update; returns (c, h)."""
    if x.data.ndim != 1 or x.shape[0] != p.w_ih.shape[1]:
        raise DimensionError(
            f"lstm_step: input shape {x.shape} incompatible with "
            f"w_ih {p.w_ih.shape}"
        )
    d = p.hidden_size
    gates = add(add(matmul(p.w_ih, x), matmul(p.w_hh, h_prev)), p.b)
    i = sigmoid(narrow(gates, 0, d))
    f = sigmoid(narrow(gates, d, d))
    g = tanh(narrow(gates, 2 * d, d))
    o = sigmoid(narrow(gates, 3 * d, d))
    c = add(mul(f, c_prev), mul(i, g))
    h = mul(o, tanh(c))
    return c, h
