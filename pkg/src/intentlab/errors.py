"""Exception hierarchy shared by all intentlab modules.

The CLI maps these onto exit codes: validation problems exit 1, numeric
failures exit 2, and I/O errors (OSError and subclasses) exit 3.
"""


class IntentLabError(Exception):
    """Base class for all intentlab errors."""


class ValidationError(IntentLabError):
    """Malformed inputs, broken invariants, bad configuration."""


class DimensionError(ValidationError):
    """Tensor or feature shapes do not line up; names both shapes."""


class LabelError(ValidationError):
    """Unknown class name or out-of-range class index."""


class ConfigError(ValidationError):
    """Invalid hyperparameter or run configuration."""


class ManifestError(ValidationError):
    """Manifest record violates the schema or a dataset invariant."""


class AugmentationError(ManifestError):
    """Variant table violates the 3-variants-per-original contract."""


class StratificationError(ValidationError):
    """Fold assignment is infeasible (a class has fewer originals than folds)."""


class CurationError(ValidationError):
    """Candidate pool and annotation records are inconsistent."""


class EvaluationError(ValidationError):
    """Predictions and labels cannot be scored together."""


class FeatureFormatError(ValidationError):
    """Feature or checkpoint file has a bad magic, version, or payload."""


class NumericError(IntentLabError):
    """NaN/Inf reached a computation, or a zero-norm vector hit cosine space."""
