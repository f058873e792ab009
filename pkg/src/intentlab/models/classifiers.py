"""Supervised intent classifiers over pre-extracted features.

Three estimators share one training discipline (mini-batch cross-entropy,
best-validation-loss checkpointing, seeded shuffling):

- MlpIntentClassifier: pooled features concatenated into one vector,
  3 affine layers with ReLU between.
- CrossAttentionIntentClassifier: token sequences fused by a stack of
  cross-attention decoder blocks; one stream queries the others.
- FinetunedIntentClassifier: frozen contrastive projection heads embed
  each modality into the shared space; a small dropout-regularized MLP
  is trained on the concatenated embeddings.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from ..errors import ConfigError, DimensionError, LabelError, NumericError
from ..numerics.optim import (
    Adam,
    AdamW,
    ConstantLr,
    CosineAnnealing,
    PlateauHalving,
    clip_gradients,
)
from ..numerics.rng import make_rng
from ..numerics.tensor import Tensor, concat, cross_entropy, dropout, relu, softmax
from .contrastive import MODALITIES, ContrastiveAligner
from .layers import CrossAttentionBlock, Linear, Mlp, mean_pool_rows

__all__ = [
    "MlpIntentClassifier",
    "CrossAttentionIntentClassifier",
    "FinetunedIntentClassifier",
    "write_history_csv",
]


def write_history_csv(history: Sequence[dict], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=["epoch", "split", "loss",
                                               "accuracy", "lr"])
        writer.writeheader()
        for row in history:
            writer.writerow(row)


def _check_labels(y, n_classes: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise LabelError(f"labels must be 1-d, got shape {y.shape}")
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise LabelError(
            f"labels must lie in [0, {n_classes}), got range "
            f"[{y.min()}, {y.max()}]"
        )
    return y.astype(np.int64)


def _snapshot(params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {k: p.data.copy() for k, p in params.items()}


def _restore(params: dict[str, Tensor], snap: dict[str, np.ndarray]) -> None:
    for k, p in params.items():
        p.data = snap[k].copy()


class _TrainLoopMixin:
    """Shared epoch loop: seeded shuffling, gradient clipping, per-epoch
    train/val logging, plateau or cosine learning-rate control, and
    best-validation-loss weight snapshots restored at the end."""

    def _run_training(self, n_train: int, batch_loss, split_eval,
                      has_val: bool) -> None:
        params = self.params_
        if self.optimizer == "adamw":
            opt = AdamW(params, lr=self.lr, weight_decay=self.weight_decay)
        else:
            opt = Adam(params, lr=self.lr, weight_decay=self.weight_decay)
        if self.schedule == "plateau":
            sched = PlateauHalving(self.lr, patience=self.patience)
        elif self.schedule == "cosine":
            sched = CosineAnnealing(self.lr, total_epochs=max(self.n_epochs, 1))
        elif self.schedule == "constant":
            sched = ConstantLr(self.lr)
        else:
            raise ConfigError(f"unknown schedule {self.schedule!r}")

        self.history_ = []
        best = np.inf
        best_snap = _snapshot(params)
        self.best_epoch_ = -1
        lr = self.lr
        for epoch in range(self.n_epochs):
            if isinstance(sched, CosineAnnealing):
                lr = sched.rate_at(epoch)
            opt.lr = lr
            order = make_rng(self.seed, "epoch", epoch).permutation(n_train)
            for start in range(0, n_train, self.batch_size):
                idx = order[start:start + self.batch_size]
                loss = batch_loss(idx, epoch)
                if not np.isfinite(loss.data):
                    raise NumericError(f"non-finite loss at epoch {epoch}")
                for p in params.values():
                    p.grad = None
                loss.backward()
                if self.clip_norm is not None:
                    clip_gradients([p.grad for p in params.values()
                                    if p.grad is not None], self.clip_norm)
                opt.step()
            train_loss, train_acc = split_eval("train")
            if has_val:
                val_loss, val_acc = split_eval("val")
            else:
                val_loss, val_acc = train_loss, train_acc
            self.history_.append({"epoch": epoch, "split": "train",
                                  "loss": train_loss, "accuracy": train_acc,
                                  "lr": lr})
            self.history_.append({"epoch": epoch, "split": "val",
                                  "loss": val_loss, "accuracy": val_acc,
                                  "lr": lr})
            if val_loss < best:
                best = val_loss
                best_snap = _snapshot(params)
                self.best_epoch_ = epoch
            if isinstance(sched, PlateauHalving):
                lr = sched.update(val_loss)
        _restore(params, best_snap)
        self.best_val_loss_ = float(best)

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError(
                f"this {type(self).__name__} instance is not fitted yet")

    def export_weights(self) -> dict[str, np.ndarray]:
        self._check_fitted()
        return _snapshot(self.params_)

    def import_weights(self, arrays: dict[str, np.ndarray]) -> None:
        self._check_fitted()
        missing = sorted(set(self.params_) ^ set(arrays))
        if missing:
            raise ConfigError(f"weight names do not match model: {missing[:5]}")
        for k, p in self.params_.items():
            if tuple(arrays[k].shape) != p.shape:
                raise DimensionError(
                    f"{k}: stored shape {arrays[k].shape} != model {p.shape}")
            p.data = arrays[k].astype(p.data.dtype).copy()


class MlpIntentClassifier(_TrainLoopMixin, BaseEstimator, ClassifierMixin):
    """Feed-forward classifier on concatenated pooled features."""

    optimizer = "adam"
    schedule = "plateau"

    def __init__(self, hidden_dims: tuple[int, ...] = (1024, 512),
                 n_classes: int = 23, n_epochs: int = 30, batch_size: int = 4,
                 lr: float = 1e-4, weight_decay: float = 1e-5,
                 patience: int = 3, clip_norm: float | None = 1.0,
                 seed: int = 0):
        self.hidden_dims = hidden_dims
        self.n_classes = n_classes
        self.n_epochs = n_epochs
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.patience = patience
        self.clip_norm = clip_norm
        self.seed = seed

    def _build(self, d_in: int) -> None:
        self.net_ = Mlp(d_in, tuple(self.hidden_dims), self.n_classes,
                        make_rng(self.seed, "mlp-init"), name="mlp")
        self.params_ = self.net_.parameters()
        self.n_features_in_ = d_in
        self.classes_ = np.arange(self.n_classes)

    def _logits(self, X: np.ndarray) -> Tensor:
        return self.net_(Tensor(X))

    def _split_metrics(self, X: np.ndarray, y: np.ndarray) -> tuple[float, float]:
        losses = []
        correct = 0
        for start in range(0, len(y), 256):
            logits = self._logits(X[start:start + 256])
            losses.append(float(cross_entropy(logits, y[start:start + 256]).data)
                          * len(y[start:start + 256]))
            correct += int((logits.data.argmax(axis=1) == y[start:start + 256]).sum())
        return sum(losses) / len(y), correct / len(y)

    def fit(self, X, y, X_val=None, y_val=None):
        X = np.asarray(X, dtype=np.float32)
        if X.ndim != 2 or X.shape[0] == 0:
            raise DimensionError(f"X must be a non-empty 2-d matrix, got {X.shape}")
        y = _check_labels(y, self.n_classes)
        if len(y) != len(X):
            raise LabelError(f"{len(X)} samples but {len(y)} labels")
        has_val = X_val is not None
        if has_val:
            X_val = np.asarray(X_val, dtype=np.float32)
            y_val = _check_labels(y_val, self.n_classes)
            if X_val.shape[1] != X.shape[1]:
                raise DimensionError(
                    f"validation dim {X_val.shape[1]} != train dim {X.shape[1]}")
        self._build(X.shape[1])

        def batch_loss(idx, epoch):
            return cross_entropy(self._logits(X[idx]), y[idx])

        def split_eval(split):
            if split == "val":
                return self._split_metrics(X_val, y_val)
            return self._split_metrics(X, y)

        self._run_training(len(y), batch_loss, split_eval, has_val)
        return self

    def decision_function(self, X) -> np.ndarray:
        self._check_fitted()
        X = np.asarray(X, dtype=np.float32)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise DimensionError(
                f"X must be (n, {self.n_features_in_}), got {X.shape}")
        return self._logits(X).data.copy()

    def predict_proba(self, X) -> np.ndarray:
        logits = self.decision_function(X)
        return softmax(Tensor(logits), axis=-1).data

    def predict(self, X) -> np.ndarray:
        return self.decision_function(X).argmax(axis=1)


class CrossAttentionIntentClassifier(_TrainLoopMixin, BaseEstimator,
                                     ClassifierMixin):
    """Token-level fusion: one modality's tokens query the others through a
    stack of cross-attention decoder blocks; the mean-pooled query state
    feeds the classification head.

    X is a sequence of samples, each a dict of modality -> (tokens, dim)
    array. All samples must supply the same modalities. Blocks alternate
    between the two preferred key/value streams (video on even blocks,
    audio on odd); when a preferred stream is absent the remaining
    non-query stream substitutes, and a lone modality attends to itself.
    """

    optimizer = "adam"
    schedule = "plateau"

    def __init__(self, model_dim: int = 512, n_heads: int = 8,
                 n_blocks: int = 4, ff_dim: int = 2048,
                 dropout_rate: float = 0.2, n_classes: int = 23,
                 n_epochs: int = 30, batch_size: int = 4, lr: float = 1e-4,
                 weight_decay: float = 1e-5, patience: int = 3,
                 clip_norm: float | None = 1.0, seed: int = 0,
                 query_modality: str = "text"):
        self.model_dim = model_dim
        self.n_heads = n_heads
        self.n_blocks = n_blocks
        self.ff_dim = ff_dim
        self.dropout_rate = dropout_rate
        self.n_classes = n_classes
        self.n_epochs = n_epochs
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.patience = patience
        self.clip_norm = clip_norm
        self.seed = seed
        self.query_modality = query_modality

    @staticmethod
    def _validate_samples(X, dims: dict[str, int] | None = None):
        if len(X) == 0:
            raise DimensionError("no samples")
        active = tuple(m for m in MODALITIES if m in X[0])
        if not active:
            raise ConfigError("samples carry none of the known modalities")
        out = []
        for i, sample in enumerate(X):
            if tuple(m for m in MODALITIES if m in sample) != active:
                raise ConfigError(
                    f"sample {i} modalities differ from sample 0 ({active})")
            clean = {}
            for m in active:
                a = np.asarray(sample[m], dtype=np.float32)
                if a.ndim != 2 or a.shape[0] < 1:
                    raise DimensionError(
                        f"sample {i} {m}: need a non-empty (tokens, dim) "
                        f"matrix, got shape {a.shape}")
                if dims is not None and a.shape[1] != dims[m]:
                    raise DimensionError(
                        f"sample {i} {m}: dim {a.shape[1]} != expected {dims[m]}")
                clean[m] = a
            out.append(clean)
        return out, active

    def _build(self, dims: dict[str, int], active: tuple[str, ...]) -> None:
        rng = make_rng(self.seed, "xattn-init")
        self.active_modalities_ = active
        self.query_ = (self.query_modality if self.query_modality in active
                       else active[0])
        others = [m for m in active if m != self.query_]
        self.kv_route_ = []
        for i in range(self.n_blocks):
            preferred = "video" if i % 2 == 0 else "audio"
            if preferred in others:
                self.kv_route_.append(preferred)
            elif others:
                self.kv_route_.append(others[i % len(others)])
            else:
                self.kv_route_.append(self.query_)
        self.in_proj_ = {m: Linear(dims[m], self.model_dim, rng, f"in_{m}")
                         for m in active}
        self.blocks_ = [
            CrossAttentionBlock(self.model_dim, self.n_heads, self.ff_dim,
                                self.dropout_rate, rng, f"block{i}")
            for i in range(self.n_blocks)
        ]
        self.head_ = Linear(self.model_dim, self.n_classes, rng, "head")
        self.params_ = {}
        for proj in self.in_proj_.values():
            self.params_.update(proj.parameters())
        for block in self.blocks_:
            self.params_.update(block.parameters())
        self.params_.update(self.head_.parameters())
        self.input_dims_ = dict(dims)
        self.classes_ = np.arange(self.n_classes)

    def _forward_sample(self, sample: dict[str, np.ndarray], training: bool,
                        rng) -> Tensor:
        streams = {m: self.in_proj_[m](Tensor(sample[m]))
                   for m in self.active_modalities_}
        x = streams[self.query_]
        for block, kv_name in zip(self.blocks_, self.kv_route_):
            kv = x if kv_name == self.query_ else streams[kv_name]
            x = block(x, kv, training=training, rng=rng)
        return self.head_(mean_pool_rows(x))

    def _logits(self, samples, training: bool = False, rng=None) -> Tensor:
        rows = [self._forward_sample(s, training, rng) for s in samples]
        return rows[0] if len(rows) == 1 else concat(rows, axis=0)

    def _split_metrics(self, samples, y) -> tuple[float, float]:
        losses = []
        correct = 0
        for start in range(0, len(y), 64):
            chunk = samples[start:start + 64]
            logits = self._logits(chunk)
            losses.append(float(cross_entropy(logits, y[start:start + 64]).data)
                          * len(chunk))
            correct += int((logits.data.argmax(axis=1) == y[start:start + 64]).sum())
        return sum(losses) / len(y), correct / len(y)

    def fit(self, X, y, X_val=None, y_val=None):
        samples, active = self._validate_samples(X)
        y = _check_labels(y, self.n_classes)
        if len(y) != len(samples):
            raise LabelError(f"{len(samples)} samples but {len(y)} labels")
        dims = {m: samples[0][m].shape[1] for m in active}
        has_val = X_val is not None
        if has_val:
            val_samples, _ = self._validate_samples(X_val, dims)
            y_val = _check_labels(y_val, self.n_classes)
        self._build(dims, active)
        drop_rng = make_rng(self.seed, "dropout")

        def batch_loss(idx, epoch):
            batch = [samples[i] for i in idx]
            logits = self._logits(batch, training=True, rng=drop_rng)
            return cross_entropy(logits, y[idx])

        def split_eval(split):
            if split == "val":
                return self._split_metrics(val_samples, y_val)
            return self._split_metrics(samples, y)

        self._run_training(len(y), batch_loss, split_eval, has_val)
        return self

    def decision_function(self, X) -> np.ndarray:
        self._check_fitted()
        samples, _ = self._validate_samples(X, self.input_dims_)
        out = []
        for start in range(0, len(samples), 64):
            out.append(self._logits(samples[start:start + 64]).data)
        return np.concatenate(out, axis=0)

    def predict_proba(self, X) -> np.ndarray:
        return softmax(Tensor(self.decision_function(X)), axis=-1).data

    def predict(self, X) -> np.ndarray:
        return self.decision_function(X).argmax(axis=1)


class FinetunedIntentClassifier(_TrainLoopMixin, BaseEstimator, ClassifierMixin):
    """Classifier on frozen contrastive embeddings.

    Each modality's pooled features pass through the fitted aligner's
    projection head (never updated here); the three embeddings are
    concatenated and a two-layer MLP with dropout is trained on top.
    """

    optimizer = "adamw"
    schedule = "cosine"

    def __init__(self, aligner: ContrastiveAligner | None = None,
                 hidden_dim: int = 512, dropout_rate: float = 0.3,
                 n_classes: int = 23, n_epochs: int = 30, batch_size: int = 4,
                 lr: float = 1e-4, weight_decay: float = 0.0,
                 clip_norm: float | None = None, seed: int = 0):
        self.aligner = aligner
        self.hidden_dim = hidden_dim
        self.dropout_rate = dropout_rate
        self.n_classes = n_classes
        self.n_epochs = n_epochs
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.clip_norm = clip_norm
        self.seed = seed

    # plateau patience is unused under the cosine schedule, but the shared
    # loop reads it when configured otherwise
    patience = 3

    def _embed(self, X: dict[str, np.ndarray]) -> np.ndarray:
        parts = [self.aligner.encode(m, X[m]) for m in MODALITIES]
        return np.concatenate(parts, axis=1).astype(np.float32)

    def _logits(self, X: np.ndarray, training: bool = False, rng=None) -> Tensor:
        h = relu(self.fc1_(Tensor(X)))
        if training and self.dropout_rate > 0:
            h = dropout(h, self.dropout_rate, rng, training=True)
        return self.fc2_(h)

    def _split_metrics(self, X: np.ndarray, y: np.ndarray) -> tuple[float, float]:
        losses = []
        correct = 0
        for start in range(0, len(y), 256):
            logits = self._logits(X[start:start + 256])
            losses.append(float(cross_entropy(logits, y[start:start + 256]).data)
                          * len(y[start:start + 256]))
            correct += int((logits.data.argmax(axis=1) == y[start:start + 256]).sum())
        return sum(losses) / len(y), correct / len(y)

    def fit(self, X: dict[str, np.ndarray], y, X_val=None, y_val=None):
        if self.aligner is None:
            raise ConfigError("a fitted ContrastiveAligner is required")
        if not hasattr(self.aligner, "heads_"):
            raise NotFittedError("the supplied aligner is not fitted")
        frozen_before = {
            k: p.data.copy()
            for head in self.aligner.heads_.values()
            for k, p in head.parameters().items()
        }
        Xe = self._embed(X)
        y = _check_labels(y, self.n_classes)
        if len(y) != len(Xe):
            raise LabelError(f"{len(Xe)} samples but {len(y)} labels")
        has_val = X_val is not None
        if has_val:
            Xv = self._embed(X_val)
            y_val = _check_labels(y_val, self.n_classes)

        d_in = Xe.shape[1]
        rng = make_rng(self.seed, "finetune-init")
        self.fc1_ = Linear(d_in, self.hidden_dim, rng, "clf.fc1")
        self.fc2_ = Linear(self.hidden_dim, self.n_classes, rng, "clf.fc2")
        self.params_ = {**self.fc1_.parameters(), **self.fc2_.parameters()}
        self.n_features_in_ = d_in
        self.classes_ = np.arange(self.n_classes)
        drop_rng = make_rng(self.seed, "dropout")

        def batch_loss(idx, epoch):
            return cross_entropy(self._logits(Xe[idx], training=True,
                                              rng=drop_rng), y[idx])

        def split_eval(split):
            if split == "val":
                return self._split_metrics(Xv, y_val)
            return self._split_metrics(Xe, y)

        self._run_training(len(y), batch_loss, split_eval, has_val)

        frozen_after = {
            k: p.data
            for head in self.aligner.heads_.values()
            for k, p in head.parameters().items()
        }
        changed = [k for k, before in frozen_before.items()
                   if not np.array_equal(before, frozen_after[k])]
        if changed:
            raise NumericError(
                f"frozen projection heads changed during training: {changed[:3]}")
        return self

    def decision_function(self, X: dict[str, np.ndarray]) -> np.ndarray:
        self._check_fitted()
        return self._logits(self._embed(X)).data.copy()

    def predict_proba(self, X) -> np.ndarray:
        return softmax(Tensor(self.decision_function(X)), axis=-1).data

    def predict(self, X) -> np.ndarray:
        return self.decision_function(X).argmax(axis=1)
