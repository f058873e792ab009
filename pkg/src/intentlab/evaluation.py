"""Metrics and the cross-validation experiment harness.

Metrics are computed from first principles (accuracy, per-class and
macro precision/recall/F1, confusion matrix). The harness trains one
model per fold, evaluates on that fold's held-out originals, and
aggregates means across folds; the modality ablation reruns it for all
7 modality subsets with identical folds and seeds.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, EvaluationError
from .features import FeatureStore
from .folds import FoldAssignment, split_fold
from .manifest import Manifest, VideoRecord
from .models.classifiers import (
    CrossAttentionIntentClassifier,
    FinetunedIntentClassifier,
    MlpIntentClassifier,
)
from .models.contrastive import MODALITIES, ContrastiveAligner
from .numerics.rng import derive_seed
from .taxonomy import N_CLASSES, TAXONOMY, class_by_id

__all__ = [
    "ABLATION_SUBSETS",
    "ExperimentConfig",
    "compute_metrics",
    "confusion",
    "write_confusion_csv",
    "pooled_matrix",
    "token_samples",
    "labels_of",
    "fold_hash",
    "cross_validate",
    "ablate_modalities",
    "binary_eval",
]

# the 7 modality subsets evaluated in the ablation, fixed order
ABLATION_SUBSETS: tuple[tuple[str, ...], ...] = (
    ("video",),
    ("audio",),
    ("text",),
    ("video", "audio"),
    ("video", "text"),
    ("audio", "text"),
    ("video", "audio", "text"),
)


def subset_tag(modalities: Sequence[str]) -> str:
    return "".join(m[0] for m in MODALITIES if m in modalities)


def compute_metrics(preds, labels, n_classes: int = N_CLASSES,
                    class_names: Sequence[str] | None = None) -> dict:
    """Accuracy plus per-class and macro precision/recall/F1.

    Macro averages are unweighted means over classes with nonzero support;
    zero-support classes are listed separately rather than averaged in.
    """
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape or preds.ndim != 1:
        raise EvaluationError(
            f"preds {preds.shape} and labels {labels.shape} must be equal-length 1-d")
    if len(preds) == 0:
        raise EvaluationError("cannot score an empty prediction set")
    if class_names is None:
        class_names = [str(c) for c in range(n_classes)]
    cm = confusion(preds, labels, n_classes)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    tp = np.diag(cm)
    per_class = {}
    macro_p = macro_r = macro_f = 0.0
    n_supported = 0
    zero_support = []
    for c in range(n_classes):
        p = float(tp[c] / predicted[c]) if predicted[c] else 0.0
        r = float(tp[c] / support[c]) if support[c] else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        per_class[class_names[c]] = {
            "precision": p, "recall": r, "f1": f1, "support": int(support[c]),
        }
        if support[c]:
            macro_p += p
            macro_r += r
            macro_f += f1
            n_supported += 1
        else:
            zero_support.append(class_names[c])
    return {
        "n_samples": int(len(preds)),
        "accuracy": float(tp.sum() / len(preds)),
        "macro_precision": macro_p / n_supported if n_supported else 0.0,
        "macro_recall": macro_r / n_supported if n_supported else 0.0,
        "macro_f1": macro_f / n_supported if n_supported else 0.0,
        "per_class": per_class,
        "zero_support_classes": zero_support,
    }


def confusion(preds, labels, n_classes: int = N_CLASSES) -> np.ndarray:
    """Integer count matrix, rows = true class, cols = predicted class."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise EvaluationError(
            f"preds {preds.shape} and labels {labels.shape} differ in length")
    bad = (labels < 0) | (labels >= n_classes) | (preds < 0) | (preds >= n_classes)
    if bad.any():
        raise EvaluationError(
            f"{int(bad.sum())} entries outside [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (labels, preds), 1)
    return cm


def write_confusion_csv(cm: np.ndarray, path,
                        class_names: Sequence[str] | None = None) -> None:
    n = cm.shape[0]
    if class_names is None:
        class_names = ([c.name for c in TAXONOMY] if n == N_CLASSES
                       else [str(i) for i in range(n)])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["true\\pred", *class_names])
        for i in range(n):
            writer.writerow([class_names[i], *cm[i].tolist()])


def pooled_matrix(store: FeatureStore, records: Sequence[VideoRecord],
                  modalities: Sequence[str]) -> np.ndarray:
    """Concatenated pooled features per record, modalities in canonical order."""
    active = [m for m in MODALITIES if m in modalities]
    if not active:
        raise ConfigError("no valid modalities requested")
    rows = [
        np.concatenate([store.pooled(r.features[m]) for m in active])
        for r in records
    ]
    return np.stack(rows).astype(np.float32)


def token_samples(store: FeatureStore, records: Sequence[VideoRecord],
                  modalities: Sequence[str]) -> list[dict[str, np.ndarray]]:
    active = [m for m in MODALITIES if m in modalities]
    if not active:
        raise ConfigError("no valid modalities requested")
    return [{m: store.matrix(r.features[m], m).data for m in active}
            for r in records]


def pooled_views(store: FeatureStore, records: Sequence[VideoRecord]
                 ) -> dict[str, np.ndarray]:
    """Per-modality pooled feature matrices, aligned by record order."""
    return {
        m: np.stack([store.pooled(r.features[m]) for r in records])
        for m in MODALITIES
    }


def labels_of(records: Sequence[VideoRecord], binary: bool = False) -> np.ndarray:
    if binary:
        return np.array([int(class_by_id(r.class_id).malicious)
                         for r in records], dtype=np.int64)
    return np.array([r.class_id for r in records], dtype=np.int64)


def fold_hash(folds: FoldAssignment) -> str:
    return hashlib.sha256(folds.to_json().encode("utf-8")).hexdigest()


@dataclass
class ExperimentConfig:
    """Everything a training/evaluation run depends on, hashable for stamps."""

    arch: str = "mlp"  # mlp | xattn | finetune
    modalities: tuple[str, ...] = MODALITIES
    binary: bool = False
    include_variants: bool | None = None  # None: off for baselines
    n_epochs: int = 30
    batch_size: int = 4
    lr: float = 1e-4
    weight_decay: float | None = None  # None: 1e-5 baselines, 0 finetune
    seed: int = 0
    mlp_hidden: tuple[int, ...] = (1024, 512)
    model_dim: int = 512
    n_heads: int = 8
    n_blocks: int = 4
    ff_dim: int = 2048
    dropout_rate: float | None = None  # None: 0.2 xattn, 0.3 finetune
    embed_dim: int = 768
    head_hidden_dim: int = 512
    temperature: float = 0.07
    pretrain_epochs: int = 50
    pretrain_batch: int = 64
    pretrain_lr: float = 2e-4

    def n_classes(self) -> int:
        return 2 if self.binary else N_CLASSES

    def class_names(self) -> list[str]:
        if self.binary:
            return ["benign", "malicious"]
        return [c.name for c in TAXONOMY]

    def to_json_obj(self) -> dict:
        obj = asdict(self)
        obj["modalities"] = list(self.modalities)
        obj["mlp_hidden"] = list(self.mlp_hidden)
        return obj

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_json_obj(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _build_baseline(config: ExperimentConfig, fold_seed: int):
    wd = config.weight_decay if config.weight_decay is not None else 1e-5
    if config.arch == "mlp":
        return MlpIntentClassifier(
            hidden_dims=tuple(config.mlp_hidden), n_classes=config.n_classes(),
            n_epochs=config.n_epochs, batch_size=config.batch_size,
            lr=config.lr, weight_decay=wd, seed=fold_seed)
    if config.arch == "xattn":
        rate = config.dropout_rate if config.dropout_rate is not None else 0.2
        return CrossAttentionIntentClassifier(
            model_dim=config.model_dim, n_heads=config.n_heads,
            n_blocks=config.n_blocks, ff_dim=config.ff_dim,
            dropout_rate=rate, n_classes=config.n_classes(),
            n_epochs=config.n_epochs, batch_size=config.batch_size,
            lr=config.lr, weight_decay=wd, seed=fold_seed)
    raise ConfigError(f"unknown architecture {config.arch!r}")


def _run_fold(manifest: Manifest, folds: FoldAssignment, fold: int,
              config: ExperimentConfig, store: FeatureStore):
    include = (config.include_variants if config.include_variants is not None
               else False)
    train, val = split_fold(manifest, folds, fold, include_variants=include)
    if not train or not val:
        raise EvaluationError(f"fold {fold}: empty train or validation split")
    y_train = labels_of(train, binary=config.binary)
    y_val = labels_of(val, binary=config.binary)
    fold_seed = derive_seed(config.seed, f"{config.arch}-fold", fold)

    if config.arch == "finetune":
        if tuple(config.modalities) != MODALITIES:
            raise ConfigError(
                "the fine-tuned classifier uses all three modalities")
        # contrastive pretraining sees the training folds' variants too
        pretrain_records, _ = split_fold(manifest, folds, fold,
                                         include_variants=True)
        aligner = ContrastiveAligner(
            embed_dim=config.embed_dim,
            temperature=config.temperature,
            n_epochs=config.pretrain_epochs,
            batch_size=config.pretrain_batch,
            lr=config.pretrain_lr,
            seed=derive_seed(config.seed, "align-fold", fold),
        )
        aligner.fit(pooled_views(store, pretrain_records))
        rate = config.dropout_rate if config.dropout_rate is not None else 0.3
        wd = config.weight_decay if config.weight_decay is not None else 0.0
        model = FinetunedIntentClassifier(
            aligner=aligner, hidden_dim=config.head_hidden_dim,
            dropout_rate=rate, n_classes=config.n_classes(),
            n_epochs=config.n_epochs, batch_size=config.batch_size,
            lr=config.lr, weight_decay=wd, seed=fold_seed)
        X_train = pooled_views(store, train)
        X_val = pooled_views(store, val)
    elif config.arch == "xattn":
        model = _build_baseline(config, fold_seed)
        X_train = token_samples(store, train, config.modalities)
        X_val = token_samples(store, val, config.modalities)
    else:
        model = _build_baseline(config, fold_seed)
        X_train = pooled_matrix(store, train, config.modalities)
        X_val = pooled_matrix(store, val, config.modalities)

    model.fit(X_train, y_train, X_val=X_val, y_val=y_val)
    preds = model.predict(X_val)
    return model, preds, y_val


def cross_validate(manifest: Manifest, folds: FoldAssignment,
                   config: ExperimentConfig,
                   store: FeatureStore | None = None,
                   keep_models: bool = False) -> dict:
    """Train and evaluate one model per fold; aggregate metrics across folds."""
    if store is None:
        if manifest.root is None:
            raise ConfigError("manifest has no feature root directory")
        store = FeatureStore(manifest.root)
    per_fold = []
    models = []
    all_preds: list[np.ndarray] = []
    all_labels: list[np.ndarray] = []
    for fold in range(folds.k):
        model, preds, y_val = _run_fold(manifest, folds, fold, config, store)
        metrics = compute_metrics(preds, y_val, config.n_classes(),
                                  config.class_names())
        metrics["fold"] = fold
        metrics["best_epoch"] = model.best_epoch_
        metrics["best_val_loss"] = model.best_val_loss_
        per_fold.append(metrics)
        models.append(model)
        all_preds.append(preds)
        all_labels.append(y_val)

    mean = {
        key: float(np.mean([m[key] for m in per_fold]))
        for key in ("accuracy", "macro_precision", "macro_recall", "macro_f1")
    }
    cm = confusion(np.concatenate(all_preds), np.concatenate(all_labels),
                   config.n_classes())
    report = {
        "config": config.to_json_obj(),
        "config_hash": config.config_hash(),
        "fold_hash": fold_hash(folds),
        "n_eval": int(sum(len(p) for p in all_preds)),
        "mean": mean,
        "folds": per_fold,
        "confusion": cm.tolist(),
    }
    if keep_models:
        report["_models"] = models
    return report


def ablate_modalities(manifest: Manifest, folds: FoldAssignment,
                      config: ExperimentConfig,
                      store: FeatureStore | None = None) -> dict:
    """Rerun cross-validation for all 7 modality subsets, same folds/seed."""
    if store is None:
        if manifest.root is None:
            raise ConfigError("manifest has no feature root directory")
        store = FeatureStore(manifest.root)
    arms = {}
    for subset in ABLATION_SUBSETS:
        arm_config = replace(config, modalities=subset)
        arms[subset_tag(subset)] = cross_validate(manifest, folds, arm_config,
                                                  store=store)
    return {
        "fold_hash": fold_hash(folds),
        "arms": arms,
    }


def binary_eval(manifest: Manifest, folds: FoldAssignment,
                config: ExperimentConfig,
                store: FeatureStore | None = None) -> dict:
    """Benign/malicious evaluation: same pipeline, labels collapsed to 2."""
    return cross_validate(manifest, folds, replace(config, binary=True),
                          store=store)
