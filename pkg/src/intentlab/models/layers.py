"""Trainable layers: affine stacks, projection heads, cross-attention blocks.

Parameters are plain Tensors with ``requires_grad=True``, collected into
ordered name -> Tensor mappings so checkpoints serialize deterministically.
Weights start Glorot-uniform, biases at zero, layer norms at identity.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..errors import ConfigError, DimensionError
from ..numerics.tensor import (
    Tensor,
    add,
    concat,
    default_dtype,
    dropout,
    layernorm,
    matmul,
    relu,
    reshape,
    scale,
    softmax,
    tensor_mean,
    transpose,
)

__all__ = [
    "glorot_uniform",
    "Linear",
    "Mlp",
    "ProjectionHead",
    "scaled_dot_attention",
    "MultiHeadAttention",
    "CrossAttentionBlock",
]


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(default_dtype())


class Linear:
    """Affine map x @ w + b (bias optional)."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, name: str,
                 bias: bool = True):
        self.name = name
        self.w = Tensor(glorot_uniform(rng, d_in, d_out), requires_grad=True)
        self.b = (Tensor(np.zeros(d_out, dtype=default_dtype()), requires_grad=True)
                  if bias else None)

    def __call__(self, x: Tensor) -> Tensor:
        y = matmul(x, self.w)
        return add(y, self.b) if self.b is not None else y

    def parameters(self) -> dict[str, Tensor]:
        params = {f"{self.name}.w": self.w}
        if self.b is not None:
            params[f"{self.name}.b"] = self.b
        return params


class Mlp:
    """Affine layers with ReLU between every pair; no activation on the output."""

    def __init__(self, d_in: int, hidden_dims: Sequence[int], d_out: int,
                 rng: np.random.Generator, name: str):
        dims = [d_in, *hidden_dims, d_out]
        self.layers = [
            Linear(dims[i], dims[i + 1], rng, f"{name}.{i}")
            for i in range(len(dims) - 1)
        ]

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers[:-1]:
            x = relu(layer(x))
        return self.layers[-1](x)

    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for layer in self.layers:
            params.update(layer.parameters())
        return params


class ProjectionHead:
    """Two affine layers with a ReLU between, mapping into the shared space."""

    def __init__(self, d_in: int, hidden_dim: int, output_dim: int,
                 rng: np.random.Generator, name: str):
        self.input_dim = d_in
        self.output_dim = output_dim
        self.fc1 = Linear(d_in, hidden_dim, rng, f"{name}.fc1")
        self.fc2 = Linear(hidden_dim, output_dim, rng, f"{name}.fc2")

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(relu(self.fc1(x)))

    def parameters(self) -> dict[str, Tensor]:
        return {**self.fc1.parameters(), **self.fc2.parameters()}


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor,
                         return_weights: bool = False):
    """softmax(q k^T / sqrt(d)) v over the last two axes.

    Accepts (L, d) or head-batched (H, L, d) operands. Weight rows sum to 1.
    """
    d = q.shape[-1]
    if k.shape[-1] != d or v.shape[-2] != k.shape[-2]:
        raise DimensionError(
            f"attention shapes disagree: q {q.shape}, k {k.shape}, v {v.shape}"
        )
    kt = transpose(k, (0, 2, 1)) if k.ndim == 3 else transpose(k)
    scores = scale(matmul(q, kt), 1.0 / math.sqrt(d))
    weights = softmax(scores, axis=-1)
    out = matmul(weights, v)
    if return_weights:
        return out, weights
    return out


class MultiHeadAttention:
    """Cross-attention: queries from one stream, keys/values from another."""

    def __init__(self, model_dim: int, n_heads: int, rng: np.random.Generator,
                 name: str):
        if model_dim % n_heads != 0:
            raise ConfigError(
                f"head count {n_heads} must divide model dim {model_dim}"
            )
        self.model_dim = model_dim
        self.n_heads = n_heads
        self.head_dim = model_dim // n_heads
        self.wq = Linear(model_dim, model_dim, rng, f"{name}.wq")
        # a key-projection bias shifts every score for a query by the same
        # amount, which softmax cancels exactly; it is omitted as dead weight
        self.wk = Linear(model_dim, model_dim, rng, f"{name}.wk", bias=False)
        self.wv = Linear(model_dim, model_dim, rng, f"{name}.wv")
        self.wo = Linear(model_dim, model_dim, rng, f"{name}.wo")

    def _split_heads(self, x: Tensor) -> Tensor:
        length = x.shape[0]
        return transpose(reshape(x, (length, self.n_heads, self.head_dim)), (1, 0, 2))

    def __call__(self, query: Tensor, key_value: Tensor) -> Tensor:
        lq = query.shape[0]
        q = self._split_heads(self.wq(query))
        k = self._split_heads(self.wk(key_value))
        v = self._split_heads(self.wv(key_value))
        heads = scaled_dot_attention(q, k, v)
        merged = reshape(transpose(heads, (1, 0, 2)), (lq, self.model_dim))
        return self.wo(merged)

    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for sub in (self.wq, self.wk, self.wv, self.wo):
            params.update(sub.parameters())
        return params


class CrossAttentionBlock:
    """Post-norm decoder block: cross-attention and feed-forward sublayers,
    each with a residual connection, dropout on the sublayer output, and
    layer normalization."""

    def __init__(self, model_dim: int, n_heads: int, ff_dim: int,
                 dropout_rate: float, rng: np.random.Generator, name: str):
        self.dropout_rate = dropout_rate
        self.attention = MultiHeadAttention(model_dim, n_heads, rng, f"{name}.attn")
        self.ff1 = Linear(model_dim, ff_dim, rng, f"{name}.ff1")
        self.ff2 = Linear(ff_dim, model_dim, rng, f"{name}.ff2")
        dt = default_dtype()
        self.ln1_gain = Tensor(np.ones(model_dim, dtype=dt), requires_grad=True)
        self.ln1_bias = Tensor(np.zeros(model_dim, dtype=dt), requires_grad=True)
        self.ln2_gain = Tensor(np.ones(model_dim, dtype=dt), requires_grad=True)
        self.ln2_bias = Tensor(np.zeros(model_dim, dtype=dt), requires_grad=True)
        self.name = name

    def __call__(self, query: Tensor, key_value: Tensor, training: bool = False,
                 rng: np.random.Generator | None = None) -> Tensor:
        attn = self.attention(query, key_value)
        if training and self.dropout_rate > 0:
            attn = dropout(attn, self.dropout_rate, rng, training=True)
        x = layernorm(add(query, attn), self.ln1_gain, self.ln1_bias)
        ff = self.ff2(relu(self.ff1(x)))
        if training and self.dropout_rate > 0:
            ff = dropout(ff, self.dropout_rate, rng, training=True)
        return layernorm(add(x, ff), self.ln2_gain, self.ln2_bias)

    def parameters(self) -> dict[str, Tensor]:
        params = dict(self.attention.parameters())
        params.update(self.ff1.parameters())
        params.update(self.ff2.parameters())
        params[f"{self.name}.ln1.gain"] = self.ln1_gain
        params[f"{self.name}.ln1.bias"] = self.ln1_bias
        params[f"{self.name}.ln2.gain"] = self.ln2_gain
        params[f"{self.name}.ln2.bias"] = self.ln2_bias
        return params


def mean_pool_rows(x: Tensor) -> Tensor:
    """Mean over the token axis of an (L, d) tensor, kept 2-d as (1, d)."""
    return tensor_mean(x, axis=0, keepdims=True)


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    return concat(parts, axis=0)
