"""Reverse-mode differentiable tensor engine and neural layer primitives."""

from .engine import (
    Tensor,
    backward,
    cross_entropy,
    clamp_warning_count,
    no_grad,
    reset_clamp_warnings,
    softmax,
    tensor,
)
from .layers import (
    AttentionParams,
    LinearParams,
    LstmParams,
    LstmState,
    Parameter,
    additive_attention,
    embedding_lookup,
    linear,
    lstm_step,
    uniform_init,
)
from .optim import Adam
from .gradcheck import finite_difference_grad

__all__ = [
    "Adam",
    "AttentionParams",
    "LinearParams",
    "LstmParams",
    "LstmState",
    "Parameter",
    "Tensor",
    "additive_attention",
    "backward",
    "clamp_warning_count",
    "cross_entropy",
    "embedding_lookup",
    "finite_difference_grad",
    "linear",
    "lstm_step",
    "no_grad",
    "reset_clamp_warnings",
    "softmax",
    "tensor",
    "uniform_init",
]
