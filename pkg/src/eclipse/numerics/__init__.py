"""Tensor arithmetic, autodiff tape, layers, optimizer, checkpoints."""
from .tensor import (
    Array,
    DimensionError,
    DomainError,
    NumericsError,
    Tape,
    Tensor,
    add,
    concat,
    embedding_lookup,
    exp,
    gather,
    log,
    log_softmax,
    matmul,
    mul,
    narrow,
    neg,
    pick,
    row,
    set_nan_guard,
    sigmoid,
    softmax,
    stack,
    sub,
    tanh,
    tensor,
    total,
    zeros,
)
from .layers import (
    LinearParams,
    LstmCellParams,
    MlpParams,
    init_linear,
    init_lstm,
    init_mlp,
    init_weight,
    linear,
    lstm_step,
    mlp,
)
from .optim import AdamState, adam_step
from .checkpoint import (
    apply_params,
    atomic_write_text,
    load_params,
    save_params,
)
from .gradcheck import check_gradients, numeric_grad, relative_error

__all__ = [
    "Array", "DimensionError", "DomainError", "NumericsError", "Tape",
    "Tensor", "add", "concat", "embedding_lookup", "exp", "gather", "log",
    "log_softmax", "matmul", "mul", "narrow", "neg", "pick", "set_nan_guard",
    "row", "sigmoid", "softmax", "stack", "sub", "tanh", "tensor", "total", "zeros",
    "LinearParams", "LstmCellParams", "MlpParams", "init_linear", "init_lstm",
    "init_mlp", "init_weight", "linear", "lstm_step", "mlp",
    "AdamState", "adam_step",
    "apply_params", "atomic_write_text", "load_params", "save_params",
    "check_gradients", "numeric_grad", "relative_error",
]
