"""Binary feature-file format: round trips, header reads, corruption checks."""
import struct

import numpy as np
import pytest

from intentlab.errors import FeatureFormatError, NumericError
from intentlab.features import (
    FeatureStore,
    mean_pool,
    read_feature_header,
    read_features,
    write_features,
)


def test_round_trip_exact(tmp_path):
    rng = np.random.default_rng(0)
    mat = rng.normal(size=(7, 5)).astype(np.float32)
    path = tmp_path / "a" / "b" / "clip.ihqf"  # directories created on demand
    write_features(path, mat)
    back = read_features(path, "video")
    assert back.modality == "video"
    assert back.rows == 7 and back.cols == 5
    assert np.array_equal(back.data, mat)


def test_round_trip_bytes_stable(tmp_path):
    mat = np.arange(12, dtype=np.float32).reshape(3, 4) + 1
    p1, p2 = tmp_path / "one.ihqf", tmp_path / "two.ihqf"
    write_features(p1, mat)
    write_features(p2, mat)
    assert p1.read_bytes() == p2.read_bytes()


def test_header_read(tmp_path):
    mat = np.ones((9, 3), dtype=np.float32)
    path = tmp_path / "h.ihqf"
    write_features(path, mat)
    assert read_feature_header(path) == (9, 3)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.ihqf"
    path.write_bytes(b"NOPE" + struct.pack("<III", 1, 2, 2) + b"\0" * 16)
    with pytest.raises(FeatureFormatError):
        read_features(path, "video")
    with pytest.raises(FeatureFormatError):
        read_feature_header(path)


def test_bad_version_rejected(tmp_path):
    path = tmp_path / "v9.ihqf"
    path.write_bytes(b"IHQF" + struct.pack("<III", 9, 2, 2) + b"\0" * 16)
    with pytest.raises(FeatureFormatError):
        read_features(path, "video")


def test_truncated_payload_rejected(tmp_path):
    mat = np.ones((4, 4), dtype=np.float32)
    path = tmp_path / "t.ihqf"
    write_features(path, mat)
    whole = path.read_bytes()
    path.write_bytes(whole[:-8])
    with pytest.raises(FeatureFormatError):
        read_features(path, "video")


def test_zero_row_rejected_on_read(tmp_path):
    mat = np.ones((3, 4), dtype=np.float32)
    mat[1] = 0.0
    path = tmp_path / "z.ihqf"
    write_features(path, mat)
    with pytest.raises(FeatureFormatError) as exc:
        read_features(path, "video")
    assert "1" in str(exc.value)  # names the offending row


def test_write_rejects_bad_shapes(tmp_path):
    with pytest.raises(FeatureFormatError):
        write_features(tmp_path / "x.ihqf", np.ones(5, dtype=np.float32))
    with pytest.raises(FeatureFormatError):
        write_features(tmp_path / "y.ihqf", np.ones((0, 4), dtype=np.float32))


def test_mean_pool_hand_case():
    mat = np.array([[1.0, 2.0], [3.0, 6.0]], dtype=np.float32)
    pooled = mean_pool(mat)
    assert pooled.tolist() == [2.0, 4.0]
    assert pooled.dtype == np.float32


def test_mean_pool_zero_vector_rejected():
    mat = np.array([[1.0, -1.0], [-1.0, 1.0]], dtype=np.float32)
    with pytest.raises(NumericError):
        mean_pool(mat)


def test_store_caches_and_pools(tmp_path):
    rng = np.random.default_rng(1)
    mat = rng.normal(size=(5, 6)).astype(np.float32)
    write_features(tmp_path / "feats" / "clip.ihqf", mat)
    store = FeatureStore(tmp_path)
    a = store.matrix("feats/clip.ihqf", "video")
    b = store.matrix("feats/clip.ihqf", "video")
    assert a is b  # cached
    pooled = store.pooled("feats/clip.ihqf")
    assert np.allclose(pooled, mat.mean(axis=0))
    assert store.header("feats/clip.ihqf") == (5, 6)
