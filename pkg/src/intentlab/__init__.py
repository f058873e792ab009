"""Tri-modal intent recognition over pre-extracted feature files.

The package covers the full post-encoder pipeline: dataset curation and
annotation resolution, manifest and feature-file ingestion, cross-modal
contrastive alignment, supervised fusion classifiers, and a stratified
cross-validation evaluation harness with modality ablations.
"""

__version__ = "0.1.0"

from .curation import (
    AnnotationRecord,
    CatalogEntry,
    Decision,
    collect_candidates,
    curation_report,
    resolve_annotations,
)
from .errors import (
    AugmentationError,
    ConfigError,
    CurationError,
    DimensionError,
    EvaluationError,
    FeatureFormatError,
    IntentLabError,
    LabelError,
    ManifestError,
    NumericError,
    StratificationError,
    ValidationError,
)
from .evaluation import (
    ABLATION_SUBSETS,
    ExperimentConfig,
    ablate_modalities,
    binary_eval,
    compute_metrics,
    confusion,
    cross_validate,
)
from .features import FeatureMatrix, FeatureStore, mean_pool, read_features, write_features
from .folds import FoldAssignment, assign_folds, load_folds, save_folds, split_fold
from .manifest import (
    Manifest,
    VideoRecord,
    attach_variants,
    class_stats,
    filter_subset,
    load_manifest,
    write_manifest,
)
from .models import (
    ContrastiveAligner,
    CrossAttentionIntentClassifier,
    FinetunedIntentClassifier,
    MlpIntentClassifier,
    info_nce,
    load_checkpoint,
    retrieval_accuracy,
    save_checkpoint,
    total_contrastive_loss,
)
from .taxonomy import (
    GROUP_NAMES,
    N_CLASSES,
    TAXONOMY,
    IntentClass,
    binary_collapse,
    class_by_id,
    class_by_name,
)

__all__ = [
    "__version__",
    "AnnotationRecord",
    "CatalogEntry",
    "Decision",
    "collect_candidates",
    "curation_report",
    "resolve_annotations",
    "AugmentationError",
    "ConfigError",
    "CurationError",
    "DimensionError",
    "EvaluationError",
    "FeatureFormatError",
    "IntentLabError",
    "LabelError",
    "ManifestError",
    "NumericError",
    "StratificationError",
    "ValidationError",
    "ABLATION_SUBSETS",
    "ExperimentConfig",
    "ablate_modalities",
    "binary_eval",
    "compute_metrics",
    "confusion",
    "cross_validate",
    "FeatureMatrix",
    "FeatureStore",
    "mean_pool",
    "read_features",
    "write_features",
    "FoldAssignment",
    "assign_folds",
    "load_folds",
    "save_folds",
    "split_fold",
    "Manifest",
    "VideoRecord",
    "attach_variants",
    "class_stats",
    "filter_subset",
    "load_manifest",
    "write_manifest",
    "ContrastiveAligner",
    "CrossAttentionIntentClassifier",
    "FinetunedIntentClassifier",
    "MlpIntentClassifier",
    "info_nce",
    "load_checkpoint",
    "retrieval_accuracy",
    "save_checkpoint",
    "total_contrastive_loss",
    "GROUP_NAMES",
    "N_CLASSES",
    "TAXONOMY",
    "IntentClass",
    "binary_collapse",
    "class_by_id",
    "class_by_name",
]
