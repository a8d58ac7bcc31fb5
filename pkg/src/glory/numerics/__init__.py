from .layers import (AttentionParams, GruParams, PoolParams, attention_pool, attention_weights,
                     gru_cell, multi_head_self_attention, scaled_dot_attention)
from .optim import NonFiniteGradientError, OptimizerState, adam_step, lr_at
from .tensor import (Tensor, as_tensor, concat, index, log_softmax, masked_softmax, matmul, mean,
                     segment_sum, sigmoid, softmax, stack, sum_, tanh)

__all__ = [
    "AttentionParams", "GruParams", "PoolParams", "attention_pool", "attention_weights", "gru_cell",
    "multi_head_self_attention", "scaled_dot_attention", "NonFiniteGradientError", "OptimizerState",
    "adam_step", "lr_at", "Tensor", "as_tensor", "concat", "index", "log_softmax", "masked_softmax",
    "matmul", "mean", "segment_sum", "sigmoid", "softmax", "stack", "sum_", "tanh",
]
