"""Central finite-difference oracle for the reverse-mode gradients.

The oracle never touches the tape: it re-runs the forward computation with
perturbed parameter entries and differences the scalar outputs. A registered
suite covers every differentiable operation plus composed graphs; the CLI
``gradcheck`` command runs it in both float32 and float64 modes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .rng import make_rng
from .tensor import (
    Tensor,
    add,
    cosine_similarity,
    cross_entropy,
    gradients,
    layernorm,
    matmul,
    precision,
    relu,
    softmax,
    tensor_sum,
    mul,
)

# Difference quotients are only valid when no probe steps across a ReLU
# kink. Cases whose graphs contain ReLUs are rebuilt from derived seeds
# until every preactivation keeps at least this margin; probe shifts are
# bounded by h * max|input| which stays well below it for h <= 1e-3.
_KINK_MARGIN = 0.03


def _kink_safe(*preacts: np.ndarray) -> bool:
    return min(float(np.abs(p).min()) for p in preacts) > _KINK_MARGIN

__all__ = [
    "finite_difference_gradients",
    "relative_error",
    "check_gradients",
    "GradCheckCase",
    "default_suite",
    "run_suite",
]


def finite_difference_gradients(f: Callable[[], Tensor], params: Sequence[Tensor],
                                h: float) -> list[np.ndarray]:
    """d f / d p by central differences, one entry at a time."""
    grads = []
    for p in params:
        g = np.zeros_like(p.data, dtype=np.float64)
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            f_plus = float(f().data)
            flat[i] = original - h
            f_minus = float(f().data)
            flat[i] = original
            g.reshape(-1)[i] = (f_plus - f_minus) / (2.0 * h)
        grads.append(g.astype(p.dtype))
    return grads


def relative_error(ad: np.ndarray, fd: np.ndarray) -> float:
    ad = np.asarray(ad, dtype=np.float64)
    fd = np.asarray(fd, dtype=np.float64)
    denom = max(np.linalg.norm(ad), np.linalg.norm(fd), 1e-12)
    return float(np.linalg.norm(ad - fd) / denom)


def check_gradients(f: Callable[[], Tensor], params: Sequence[Tensor],
                    h: float) -> float:
    """Max relative error between tape gradients and the difference oracle."""
    ad = gradients(f(), params)
    fd = finite_difference_gradients(f, params, h)
    return max(relative_error(a, b) for a, b in zip(ad, fd))


@dataclass
class GradCheckCase:
    name: str
    build: Callable[[], tuple[Callable[[], Tensor], list[Tensor]]]


def _weighted_sum(t: Tensor, coeffs: np.ndarray) -> Tensor:
    return tensor_sum(mul(t, Tensor(coeffs)))


def default_suite() -> list[GradCheckCase]:
    """One case per differentiable operation, plus three composed graphs."""
    # model layers are imported lazily so the numerics package stays standalone
    from ..models.contrastive import info_nce, total_contrastive_loss
    from ..models.layers import CrossAttentionBlock, Mlp, ProjectionHead

    def matmul_case():
        rng = make_rng(11, "gradcheck-matmul")
        a = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
        b = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
        return (lambda: tensor_sum(matmul(a, b))), [a, b]

    def relu_case():
        rng = make_rng(12, "gradcheck-relu")
        # entries bounded away from the kink so the difference quotient is clean
        raw = rng.uniform(0.5, 1.5, size=12) * rng.choice([-1.0, 1.0], size=12)
        x = Tensor(raw, requires_grad=True)
        c = rng.normal(size=12)
        return (lambda: _weighted_sum(relu(x), c)), [x]

    def softmax_case():
        rng = make_rng(13, "gradcheck-softmax")
        x = Tensor(rng.normal(size=(5,)).reshape(1, 5), requires_grad=True)
        c = rng.normal(size=(1, 5))
        return (lambda: _weighted_sum(softmax(x, axis=-1), c)), [x]

    def layernorm_case():
        rng = make_rng(14, "gradcheck-layernorm")
        x = Tensor(rng.normal(size=(3, 6)), requires_grad=True)
        gain = Tensor(rng.normal(size=6), requires_grad=True)
        bias = Tensor(rng.normal(size=6), requires_grad=True)
        c = rng.normal(size=(3, 6))
        return (lambda: _weighted_sum(layernorm(x, gain, bias), c)), [x, gain, bias]

    def cosine_case():
        rng = make_rng(15, "gradcheck-cosine")
        a = Tensor(rng.normal(size=5), requires_grad=True)
        b = Tensor(rng.normal(size=5), requires_grad=True)
        return (lambda: cosine_similarity(a, b)), [a, b]

    def cross_entropy_case():
        rng = make_rng(16, "gradcheck-xent")
        logits = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        labels = np.array([0, 2, 1])
        return (lambda: cross_entropy(logits, labels)), [logits]

    def info_nce_case():
        rng = make_rng(17, "gradcheck-infonce")
        a = Tensor(rng.normal(size=(4, 6)), requires_grad=True)
        b = Tensor(rng.normal(size=(4, 6)), requires_grad=True)
        return (lambda: info_nce(a, b, temperature=0.07)), [a, b]

    def _block_ff_preacts(block, q, kv):
        # mirrors the block forward up to its feed-forward nonlinearity
        attn = block.attention(q, kv)
        x = layernorm(add(q, attn), block.ln1_gain, block.ln1_bias)
        return block.ff1(x).data

    def attention_block_case():
        for attempt in range(200):
            rng = make_rng(18, "gradcheck-attn", attempt)
            block = CrossAttentionBlock(model_dim=8, n_heads=2, ff_dim=12,
                                        dropout_rate=0.0, rng=rng, name="blk")
            q = Tensor(rng.normal(size=(3, 8)), requires_grad=True)
            kv = Tensor(rng.normal(size=(4, 8)), requires_grad=True)
            if _kink_safe(_block_ff_preacts(block, q, kv)):
                break
        c = rng.normal(size=(3, 8))
        params = [q, kv] + list(block.parameters().values())
        return (lambda: _weighted_sum(block(q, kv, training=False), c)), params

    def projection_head_case():
        for attempt in range(200):
            rng = make_rng(19, "gradcheck-proj", attempt)
            head = ProjectionHead(7, hidden_dim=8, output_dim=9, rng=rng,
                                  name="head")
            x = Tensor(rng.normal(size=(3, 7)), requires_grad=True)
            if _kink_safe(head.fc1(x).data):
                break
        c = rng.normal(size=(3, 9))
        params = [x] + list(head.parameters().values())
        return (lambda: _weighted_sum(head(x), c)), params

    def composed_alignment_case():
        # three projection heads feeding the summed pairwise contrastive loss
        for attempt in range(200):
            rng = make_rng(20, "gradcheck-composed-align", attempt)
            heads = {
                m: ProjectionHead(5, hidden_dim=6, output_dim=7, rng=rng, name=m)
                for m in ("text", "video", "audio")
            }
            batch = {m: Tensor(rng.normal(size=(3, 5))) for m in heads}
            # all-negative hidden rows project to the zero vector (zero-init
            # output bias), which cosine similarity rejects; require margin
            # at the kinks and healthy projected row norms
            row_norms = np.concatenate(
                [np.linalg.norm(heads[m](batch[m]).data, axis=1) for m in heads])
            if (_kink_safe(*(heads[m].fc1(batch[m]).data for m in heads))
                    and row_norms.min() > 0.05):
                break
        params: list[Tensor] = []
        for head in heads.values():
            params.extend(head.parameters().values())

        def f():
            loss, _ = total_contrastive_loss(batch, heads, temperature=0.2)
            return loss

        return f, params

    def _mlp_preacts(mlp, x):
        preacts = []
        for layer in mlp.layers[:-1]:
            x = layer(x)
            preacts.append(x.data)
            x = relu(x)
        return preacts

    def composed_mlp_case():
        for attempt in range(200):
            rng = make_rng(21, "gradcheck-composed-mlp", attempt)
            mlp = Mlp(6, (5, 4), 3, rng=rng, name="mlp")
            x = Tensor(rng.normal(size=(4, 6)), requires_grad=True)
            if _kink_safe(*_mlp_preacts(mlp, x)):
                break
        labels = np.array([0, 1, 2, 1])
        params = [x] + list(mlp.parameters().values())
        return (lambda: cross_entropy(mlp(x), labels)), params

    def composed_attention_classifier_case():
        for attempt in range(200):
            rng = make_rng(22, "gradcheck-composed-attn", attempt)
            block = CrossAttentionBlock(model_dim=6, n_heads=3, ff_dim=8,
                                        dropout_rate=0.0, rng=rng, name="blk")
            out_proj = ProjectionHead(6, hidden_dim=5, output_dim=4, rng=rng,
                                      name="out")
            q = Tensor(rng.normal(size=(2, 6)), requires_grad=True)
            kv = Tensor(rng.normal(size=(3, 6)), requires_grad=True)
            h = block(q, kv, training=False)
            if _kink_safe(_block_ff_preacts(block, q, kv),
                          out_proj.fc1(h).data):
                break
        labels = np.array([1, 3])
        params = [q, kv] + list(block.parameters().values()) \
            + list(out_proj.parameters().values())

        def f():
            h = block(q, kv, training=False)
            return cross_entropy(out_proj(h), labels)

        return f, params

    return [
        GradCheckCase("matmul", matmul_case),
        GradCheckCase("relu", relu_case),
        GradCheckCase("softmax", softmax_case),
        GradCheckCase("layernorm", layernorm_case),
        GradCheckCase("cosine_similarity", cosine_case),
        GradCheckCase("cross_entropy", cross_entropy_case),
        GradCheckCase("info_nce", info_nce_case),
        GradCheckCase("attention_block", attention_block_case),
        GradCheckCase("projection_head", projection_head_case),
        GradCheckCase("composed_alignment", composed_alignment_case),
        GradCheckCase("composed_mlp", composed_mlp_case),
        GradCheckCase("composed_attention_classifier", composed_attention_classifier_case),
    ]


def run_suite(dtype=np.float32) -> list[tuple[str, float, bool]]:
    """Run every registered case; returns (name, max relative error, passed)."""
    if np.dtype(dtype) == np.float64:
        h, tol = 1e-5, 1e-7
    else:
        h, tol = 1e-3, 1e-3
    results = []
    with precision(dtype):
        for case in default_suite():
            f, params = case.build()
            err = check_gradients(f, params, h)
            results.append((case.name, err, err < tol))
    return results
