"""Attention, attention pooling and GRU building blocks on :class:`Tensor`."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, as_tensor, masked_softmax, matmul, mul, reshape, sigmoid, swapaxes, tanh


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, dtype=np.float32) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


def _param(values, name) -> Tensor:
    return Tensor(values, requires_grad=True, name=name)


@dataclass
class AttentionParams:
    """Per-head projections packed column-wise: head ``i`` owns columns
    ``i*d_k:(i+1)*d_k`` of ``W_Q``, ``W_K`` and ``W_V``."""

    W_Q: Tensor
    W_K: Tensor
    W_V: Tensor
    W_O: Tensor
    heads: int

    @property
    def d_model(self) -> int:
        return self.W_Q.shape[0]

    @property
    def d_k(self) -> int:
        return self.W_Q.shape[1] // self.heads

    @classmethod
    def init(cls, rng, d_model: int, heads: int, prefix: str = "", dtype=np.float32) -> "AttentionParams":
        if d_model % heads:
            raise ValueError(f"d_model={d_model} not divisible by heads={heads}")
        mats = [_param(glorot(rng, d_model, d_model, dtype), f"{prefix}{n}")
                for n in ("W_Q", "W_K", "W_V", "W_O")]
        return cls(*mats, heads=heads)

    def named(self, prefix: str = "") -> dict[str, Tensor]:
        return {f"{prefix}W_Q": self.W_Q, f"{prefix}W_K": self.W_K,
                f"{prefix}W_V": self.W_V, f"{prefix}W_O": self.W_O}


@dataclass
class PoolParams:
    W: Tensor  # [d, hidden]
    q: Tensor  # [hidden]

    @classmethod
    def init(cls, rng, d: int, hidden: int, prefix: str = "", dtype=np.float32) -> "PoolParams":
        W = _param(glorot(rng, d, hidden, dtype), f"{prefix}W")
        q = _param(rng.uniform(-0.1, 0.1, size=hidden).astype(dtype), f"{prefix}q")
        return cls(W, q)

    def named(self, prefix: str = "") -> dict[str, Tensor]:
        return {f"{prefix}W": self.W, f"{prefix}q": self.q}


@dataclass
class GruParams:
    W_z: Tensor
    U_z: Tensor
    b_z: Tensor
    W_r: Tensor
    U_r: Tensor
    b_r: Tensor
    W_h: Tensor
    U_h: Tensor
    b_h: Tensor

    @classmethod
    def init(cls, rng, d: int, prefix: str = "", dtype=np.float32) -> "GruParams":
        kw = {}
        for gate in ("z", "r", "h"):
            kw[f"W_{gate}"] = _param(glorot(rng, d, d, dtype), f"{prefix}W_{gate}")
            kw[f"U_{gate}"] = _param(glorot(rng, d, d, dtype), f"{prefix}U_{gate}")
            kw[f"b_{gate}"] = _param(np.zeros(d, dtype=dtype), f"{prefix}b_{gate}")
        return cls(**kw)

    @property
    def hidden(self) -> int:
        return self.W_z.shape[1]

    def named(self, prefix: str = "") -> dict[str, Tensor]:
        return {f"{prefix}{k}": v for k, v in vars(self).items()}


def scaled_dot_attention(Q, K, V, mask=None) -> Tensor:
    """softmax(Q K^T / sqrt(d_k)) V over the last two axes.

    ``mask`` is True for valid key positions and broadcasts against the
    ``[..., n, m]`` logit array. A query row with no valid key outputs zeros.
    """
    Q, K, V = as_tensor(Q), as_tensor(K), as_tensor(V)
    d_k = Q.shape[-1]
    logits = mul(matmul(Q, swapaxes(K, -1, -2)), 1.0 / math.sqrt(d_k))
    weights = masked_softmax(logits, mask, axis=-1)
    return matmul(weights, V)


def _split_heads(x: Tensor, heads: int) -> Tensor:
    *lead, n, d = x.shape
    return swapaxes(reshape(x, (*lead, n, heads, d // heads)), -2, -3)


def _merge_heads(x: Tensor) -> Tensor:
    *lead, h, n, dk = x.shape
    return reshape(swapaxes(x, -2, -3), (*lead, n, h * dk))


def multi_head_self_attention(X, params: AttentionParams, mask=None) -> Tensor:
    """Multi-head self-attention over rows of ``X`` ([..., n, d_model]).

    ``mask`` ([..., n], True = real row) hides padded rows as keys.
    """
    X = as_tensor(X)
    if X.shape[-1] != params.d_model:
        raise ValueError(f"input width {X.shape[-1]} != attention d_model {params.d_model}")
    h = params.heads
    Q = _split_heads(matmul(X, params.W_Q), h)
    K = _split_heads(matmul(X, params.W_K), h)
    V = _split_heads(matmul(X, params.W_V), h)
    key_mask = None
    if mask is not None:
        key_mask = np.asarray(mask, dtype=bool)[..., None, None, :]
    heads = scaled_dot_attention(Q, K, V, key_mask)
    return matmul(_merge_heads(heads), params.W_O)


def attention_weights(X, params: PoolParams, mask=None) -> Tensor:
    X = as_tensor(X)
    logits = matmul(tanh(matmul(X, params.W)), params.q)
    return masked_softmax(logits, mask, axis=-1)


def attention_pool(X, params: PoolParams, mask=None) -> Tensor:
    """Softmax(q . tanh(W x_i))-weighted sum of the rows of ``X`` ([..., n, d])."""
    X = as_tensor(X)
    alpha = attention_weights(X, params, mask)
    pooled = matmul(reshape(alpha, (*alpha.shape[:-1], 1, alpha.shape[-1])), X)
    return reshape(pooled, (*X.shape[:-2], X.shape[-1]))


def gru_cell(m, h, params: GruParams) -> Tensor:
    """One GRU update with input ``m`` and state ``h`` (rows of width hidden)."""
    m, h = as_tensor(m), as_tensor(h)
    d = params.hidden
    if m.shape[-1] != params.W_z.shape[0] or h.shape[-1] != d:
        raise ValueError(f"gru_cell size mismatch: m {m.shape}, h {h.shape}, hidden {d}")
    z = sigmoid(matmul(m, params.W_z) + matmul(h, params.U_z) + params.b_z)
    r = sigmoid(matmul(m, params.W_r) + matmul(h, params.U_r) + params.b_r)
    cand = tanh(matmul(m, params.W_h) + matmul(r * h, params.U_h) + params.b_h)
    return (1.0 - z) * h + z * cand
