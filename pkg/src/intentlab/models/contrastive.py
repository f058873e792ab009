"""Cross-modal alignment: InfoNCE objectives and the projection-head trainer.

Each modality gets a two-layer projection head into a shared embedding
space. Training pulls the three views of the same clip together with a
sum of pairwise InfoNCE terms: text->video, video->audio, audio->text.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ..errors import ConfigError, DimensionError
from ..numerics.optim import AdamW
from ..numerics.rng import make_rng
from ..numerics.tensor import (
    Tensor,
    cosine_matrix,
    cross_entropy,
    exp,
    mul,
    scale,
)
from .layers import ProjectionHead

__all__ = [
    "MODALITIES",
    "CONTRAST_PAIRS",
    "info_nce",
    "total_contrastive_loss",
    "retrieval_accuracy",
    "ContrastiveAligner",
]

MODALITIES = ("video", "audio", "text")

# anchor -> candidate direction for each pairwise term
CONTRAST_PAIRS = (("text", "video"), ("video", "audio"), ("audio", "text"))


def info_nce(anchors: Tensor, candidates: Tensor, temperature: float = 0.07,
             inv_temperature: Tensor | None = None) -> Tensor:
    """Contrastive loss over a batch of paired embeddings.

    Row i of ``anchors`` must match row i of ``candidates``; every other row
    is a negative. Logits are cosine similarities divided by the temperature,
    and the loss is mean cross-entropy against the diagonal.
    """
    if anchors.ndim != 2 or candidates.ndim != 2:
        raise DimensionError("info_nce expects 2-d embedding batches")
    if anchors.shape != candidates.shape:
        raise DimensionError(
            f"anchor batch {anchors.shape} does not match "
            f"candidate batch {candidates.shape}"
        )
    sims = cosine_matrix(anchors, candidates)
    if inv_temperature is not None:
        logits = mul(sims, exp(inv_temperature))
    else:
        if temperature <= 0:
            raise ConfigError(f"temperature must be positive, got {temperature}")
        logits = scale(sims, 1.0 / temperature)
    labels = np.arange(anchors.shape[0])
    return cross_entropy(logits, labels)


def total_contrastive_loss(batch: dict[str, Tensor],
                           heads: dict[str, "ProjectionHead"],
                           temperature: float = 0.07,
                           inv_temperature: Tensor | None = None,
                           symmetric: bool = False):
    """Sum of the three pairwise InfoNCE terms over projected embeddings.

    Returns (total, per_term) where per_term maps "text_video" etc. to the
    detached scalar value of that term.
    """
    missing = [m for m in MODALITIES if m not in batch]
    if missing:
        raise ConfigError(f"batch is missing modalities: {missing}")
    projected = {m: heads[m](batch[m]) for m in MODALITIES}
    total: Tensor | None = None
    per_term: dict[str, float] = {}
    for anchor, candidate in CONTRAST_PAIRS:
        term = info_nce(projected[anchor], projected[candidate],
                        temperature=temperature, inv_temperature=inv_temperature)
        if symmetric:
            reverse = info_nce(projected[candidate], projected[anchor],
                               temperature=temperature,
                               inv_temperature=inv_temperature)
            term = scale(term + reverse, 0.5)
        per_term[f"{anchor}_{candidate}"] = float(term.data)
        total = term if total is None else total + term
    assert total is not None
    return total, per_term


def retrieval_accuracy(queries: np.ndarray, candidates: np.ndarray) -> float:
    """Fraction of query rows whose nearest candidate (cosine) is its own row."""
    if queries.shape != candidates.shape:
        raise DimensionError(
            f"query batch {queries.shape} does not match "
            f"candidate batch {candidates.shape}"
        )
    qn = queries / np.linalg.norm(queries, axis=1, keepdims=True)
    cn = candidates / np.linalg.norm(candidates, axis=1, keepdims=True)
    hits = (qn @ cn.T).argmax(axis=1) == np.arange(queries.shape[0])
    return float(hits.mean())


class ContrastiveAligner(BaseEstimator, TransformerMixin):
    """Learns per-modality projection heads by cross-modal contrastive training.

    Parameters
    ----------
    embed_dim : width of the shared embedding space (also the head output).
    hidden_dim : hidden width of each projection head; defaults to embed_dim.
    temperature : softmax temperature for the InfoNCE logits.
    learnable_temperature : if True, train log(1/temperature) jointly.
    symmetric : if True, average each pairwise term with its reverse direction.
    n_epochs, batch_size, lr, weight_decay : AdamW training hyperparameters.
    seed : base seed; all randomness is derived from it.
    """

    def __init__(self, embed_dim: int = 768, hidden_dim: int | None = None,
                 temperature: float = 0.07, learnable_temperature: bool = False,
                 symmetric: bool = False, n_epochs: int = 50,
                 batch_size: int = 64, lr: float = 2e-4,
                 weight_decay: float = 0.0, seed: int = 0):
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.temperature = temperature
        self.learnable_temperature = learnable_temperature
        self.symmetric = symmetric
        self.n_epochs = n_epochs
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.seed = seed

    def _validate_views(self, X: dict[str, np.ndarray],
                        expect_dims: dict[str, int] | None = None
                        ) -> dict[str, np.ndarray]:
        if not isinstance(X, dict):
            raise ConfigError("expected a dict of modality -> feature matrix")
        missing = [m for m in MODALITIES if m not in X]
        if missing:
            raise ConfigError(f"missing modalities: {missing}")
        views: dict[str, np.ndarray] = {}
        n = None
        for m in MODALITIES:
            a = np.asarray(X[m], dtype=np.float32)
            if a.ndim != 2:
                raise DimensionError(f"{m} features must be 2-d, got {a.ndim}-d")
            if n is None:
                n = a.shape[0]
            elif a.shape[0] != n:
                raise DimensionError(
                    f"{m} has {a.shape[0]} rows, expected {n}"
                )
            if expect_dims is not None and a.shape[1] != expect_dims[m]:
                raise DimensionError(
                    f"{m} features have dim {a.shape[1]}, "
                    f"expected {expect_dims[m]}"
                )
            views[m] = a
        if n == 0:
            raise DimensionError("cannot align an empty batch")
        return views

    def fit(self, X: dict[str, np.ndarray], y=None):
        if self.temperature <= 0:
            raise ConfigError(
                f"temperature must be positive, got {self.temperature}"
            )
        views = self._validate_views(X)
        n = views["video"].shape[0]
        hidden = self.hidden_dim if self.hidden_dim is not None else self.embed_dim

        self.input_dims_ = {m: views[m].shape[1] for m in MODALITIES}
        self.heads_ = {
            m: ProjectionHead(self.input_dims_[m], hidden, self.embed_dim,
                              make_rng(self.seed, f"head-{m}"), name=f"head_{m}")
            for m in MODALITIES
        }
        params: dict[str, Tensor] = {}
        for head in self.heads_.values():
            params.update(head.parameters())
        inv_tau: Tensor | None = None
        if self.learnable_temperature:
            inv_tau = Tensor(np.float32(np.log(1.0 / self.temperature)),
                             requires_grad=True)
            params["log_inv_temperature"] = inv_tau
        optimizer = AdamW(params, lr=self.lr, weight_decay=self.weight_decay)

        self.history_ = []
        for epoch in range(self.n_epochs):
            order = make_rng(self.seed, "align-epoch", epoch).permutation(n)
            sums = {f"{a}_{c}": 0.0 for a, c in CONTRAST_PAIRS}
            total_sum = 0.0
            n_batches = 0
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                batch = {m: Tensor(views[m][idx]) for m in MODALITIES}
                kwargs = ({"inv_temperature": inv_tau} if inv_tau is not None
                          else {"temperature": self.temperature})
                loss, terms = total_contrastive_loss(
                    batch, self.heads_, symmetric=self.symmetric, **kwargs)
                for p in params.values():
                    p.grad = None
                loss.backward()
                optimizer.step()
                total_sum += float(loss.data)
                for k, v in terms.items():
                    sums[k] += v
                n_batches += 1
            record = {"epoch": epoch,
                      "loss": total_sum / n_batches}
            record.update({k: v / n_batches for k, v in sums.items()})
            if inv_tau is not None:
                record["temperature"] = float(np.exp(-inv_tau.data))
            self.history_.append(record)
        self.log_inv_temperature_ = (float(inv_tau.data)
                                     if inv_tau is not None else None)
        return self

    def _check_fitted(self):
        if not hasattr(self, "heads_"):
            raise NotFittedError(
                "this ContrastiveAligner instance is not fitted yet")

    def encode(self, modality: str, X: np.ndarray) -> np.ndarray:
        """Project one modality's pooled features into the shared space."""
        self._check_fitted()
        if modality not in MODALITIES:
            raise ConfigError(f"unknown modality {modality!r}")
        a = np.asarray(X, dtype=np.float32)
        if a.ndim != 2 or a.shape[1] != self.input_dims_[modality]:
            raise DimensionError(
                f"{modality} features must be (n, {self.input_dims_[modality]}), "
                f"got {a.shape}"
            )
        return self.heads_[modality](Tensor(a)).data.copy()

    def transform(self, X: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Project every modality; returns a dict of (n, embed_dim) arrays."""
        self._check_fitted()
        views = self._validate_views(X, expect_dims=self.input_dims_)
        return {m: self.encode(m, views[m]) for m in MODALITIES}
