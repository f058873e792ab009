"""Numeric substrate: tensors with reverse-mode autodiff, optimizers, RNG."""

from .optim import (
    Adam,
    AdamW,
    ConstantLr,
    CosineAnnealing,
    PlateauHalving,
    clip_gradients,
    global_grad_norm,
)
from .rng import derive_seed, make_rng
from .tensor import (
    Tensor,
    add,
    concat,
    cosine_matrix,
    cosine_similarity,
    cross_entropy,
    default_dtype,
    dropout,
    exp,
    gradients,
    l2_normalize_rows,
    layernorm,
    log,
    matmul,
    mul,
    neg,
    precision,
    relu,
    reshape,
    scale,
    softmax,
    sub,
    tensor_mean,
    tensor_sum,
    transpose,
)

__all__ = [
    "Tensor",
    "add",
    "sub",
    "mul",
    "neg",
    "scale",
    "matmul",
    "transpose",
    "reshape",
    "concat",
    "tensor_sum",
    "tensor_mean",
    "relu",
    "exp",
    "log",
    "softmax",
    "l2_normalize_rows",
    "cosine_similarity",
    "cosine_matrix",
    "cross_entropy",
    "layernorm",
    "dropout",
    "gradients",
    "precision",
    "default_dtype",
    "Adam",
    "AdamW",
    "clip_gradients",
    "global_grad_norm",
    "PlateauHalving",
    "CosineAnnealing",
    "ConstantLr",
    "derive_seed",
    "make_rng",
]
