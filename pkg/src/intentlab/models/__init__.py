from .checkpoint import load_checkpoint, save_checkpoint
from .classifiers import (
    CrossAttentionIntentClassifier,
    FinetunedIntentClassifier,
    MlpIntentClassifier,
    write_history_csv,
)
from .contrastive import (
    CONTRAST_PAIRS,
    MODALITIES,
    ContrastiveAligner,
    info_nce,
    retrieval_accuracy,
    total_contrastive_loss,
)
from .layers import (
    CrossAttentionBlock,
    Linear,
    Mlp,
    MultiHeadAttention,
    ProjectionHead,
    glorot_uniform,
    scaled_dot_attention,
)

__all__ = [
    "load_checkpoint",
    "save_checkpoint",
    "CrossAttentionIntentClassifier",
    "FinetunedIntentClassifier",
    "MlpIntentClassifier",
    "write_history_csv",
    "CONTRAST_PAIRS",
    "MODALITIES",
    "ContrastiveAligner",
    "info_nce",
    "retrieval_accuracy",
    "total_contrastive_loss",
    "CrossAttentionBlock",
    "Linear",
    "Mlp",
    "MultiHeadAttention",
    "ProjectionHead",
    "glorot_uniform",
    "scaled_dot_attention",
]
