"""Binary feature files: pre-extracted per-modality embedding matrices.

File layout, little-endian: magic "IHQF", u32 version (=1), u32 rows,
u32 cols, then rows*cols float32 values row-major. Rows are tokens or
segments; cols is the feature dimension.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FeatureFormatError, NumericError

__all__ = [
    "MAGIC",
    "VERSION",
    "FeatureMatrix",
    "write_features",
    "read_features",
    "read_feature_header",
    "mean_pool",
    "FeatureStore",
]

MAGIC = b"IHQF"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class FeatureMatrix:
    modality: str
    data: np.ndarray  # (rows, cols) float32

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


def write_features(path, data: np.ndarray) -> None:
    a = np.asarray(data, dtype="<f4")
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise FeatureFormatError(
            f"feature data must be a non-empty 2-d matrix, got shape {a.shape}"
        )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, a.shape[0], a.shape[1]))
        f.write(np.ascontiguousarray(a).tobytes())


def read_feature_header(path) -> tuple[int, int]:
    """Read (rows, cols) without loading the data payload."""
    with open(path, "rb") as f:
        header = f.read(_HEADER.size)
    if len(header) != _HEADER.size:
        raise FeatureFormatError(f"{path}: truncated header")
    magic, version, rows, cols = _HEADER.unpack(header)
    if magic != MAGIC:
        raise FeatureFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FeatureFormatError(f"{path}: unsupported version {version}")
    if rows < 1 or cols < 1:
        raise FeatureFormatError(f"{path}: empty matrix ({rows}x{cols})")
    return rows, cols


def read_features(path, modality: str = "") -> FeatureMatrix:
    rows, cols = read_feature_header(path)
    with open(path, "rb") as f:
        f.seek(_HEADER.size)
        payload = f.read(rows * cols * 4)
    if len(payload) != rows * cols * 4:
        raise FeatureFormatError(f"{path}: truncated payload")
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    norms = np.linalg.norm(data, axis=1)
    if np.any(norms == 0):
        bad = int(np.argmin(norms))
        raise FeatureFormatError(f"{path}: row {bad} has zero norm")
    return FeatureMatrix(modality=modality, data=data.astype(np.float32))


def mean_pool(features) -> np.ndarray:
    """Mean over token rows; the standard reduction from matrix to vector."""
    data = features.data if isinstance(features, FeatureMatrix) else np.asarray(features)
    pooled = data.mean(axis=0).astype(np.float32)
    if float(np.linalg.norm(pooled)) == 0.0:
        raise NumericError("pooled feature vector has zero norm")
    return pooled


class FeatureStore:
    """Cache of feature files resolved against a root directory.

    Manifests reference files by relative path and many records may share
    one file (variants reuse the parent's video features), so both raw
    matrices and pooled vectors are memoized by resolved path.
    """

    def __init__(self, root):
        self.root = Path(root)
        self._matrices: dict[str, FeatureMatrix] = {}
        self._pooled: dict[str, np.ndarray] = {}

    def resolve(self, ref: str) -> Path:
        return self.root / ref

    def header(self, ref: str) -> tuple[int, int]:
        return read_feature_header(self.resolve(ref))

    def matrix(self, ref: str, modality: str = "") -> FeatureMatrix:
        if ref not in self._matrices:
            self._matrices[ref] = read_features(self.resolve(ref), modality)
        return self._matrices[ref]

    def pooled(self, ref: str) -> np.ndarray:
        if ref not in self._pooled:
            self._pooled[ref] = mean_pool(self.matrix(ref))
        return self._pooled[ref]
