"""Synthetic data builders shared across the test suite.

Everything here is deterministic given the seed arguments so tests can
freeze expected values.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from intentlab.features import write_features
from intentlab.manifest import load_manifest
from intentlab.taxonomy import TAXONOMY, class_by_id


def make_triplets(n, latent_dim=16, feature_dim=24, noise=0.1, seed=0):
    """Correlated (video, audio, text) rows sharing a latent factor."""
    rng = np.random.default_rng(seed)
    latent = rng.normal(size=(n, latent_dim)).astype(np.float32)
    views = {}
    for modality in ("video", "audio", "text"):
        mix = rng.normal(size=(latent_dim, feature_dim)).astype(np.float32)
        obs = latent @ mix + noise * rng.normal(size=(n, feature_dim))
        views[modality] = obs.astype(np.float32)
    return views


def make_clusters(n_per_class, dim=24, n_classes=23, margin=6.0, noise=0.5, seed=0):
    """Linearly separable Gaussian blobs, one per class."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(n_classes, dim)).astype(np.float32) * margin
    rows = []
    labels = []
    for c in range(n_classes):
        pts = centers[c] + noise * rng.normal(size=(n_per_class, dim))
        rows.append(pts.astype(np.float32))
        labels.extend([c] * n_per_class)
    X = np.concatenate(rows, axis=0)
    y = np.asarray(labels, dtype=np.int64)
    perm = rng.permutation(len(y))
    return X[perm], y[perm]


def write_corpus(
    root,
    n_per_class=3,
    n_classes=23,
    dim=6,
    with_variants=False,
    signal="all",
    margin=6.0,
    noise=0.5,
    token_range=(2, 5),
    seed=0,
):
    """Write a miniature feature directory plus manifest.jsonl under root.

    signal: "all" plants the class signal in every modality, a modality name
    plants it only there (the rest is pure noise), "none" is pure noise.
    Returns the manifest path.
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    centers = {
        m: rng.normal(size=(n_classes, dim)).astype(np.float32) * margin
        for m in ("video", "audio", "text")
    }
    lines = []
    for class_id in range(n_classes):
        cls = class_by_id(class_id)
        for i in range(n_per_class):
            vid = f"{cls.name.lower().replace(' ', '-').replace('/', '')[:12]}-{class_id:02d}-{i:02d}"
            refs = {}
            for m in ("video", "audio", "text"):
                n_tok = int(rng.integers(token_range[0], token_range[1] + 1))
                if signal == "all" or signal == m:
                    mat = centers[m][class_id] + noise * rng.normal(size=(n_tok, dim))
                else:
                    mat = margin * rng.normal(size=(n_tok, dim))
                ref = f"feats/{m}/{vid}.ihqf"
                write_features(root / ref, mat.astype(np.float32))
                refs[m] = ref
            original = {
                "video_id": vid,
                "class": cls.name,
                "language": "en" if (class_id + i) % 3 else "de",
                "audio_clear": (class_id + i) % 4 != 0,
                "human_centric": True,
                "duration_s": float(30 + 5 * ((class_id + i) % 7)),
                "parent_id": "",
                "variant_index": 0,
                "features": refs,
            }
            lines.append(original)
            if with_variants:
                for k in (1, 2, 3):
                    vrefs = {"video": refs["video"]}
                    for m in ("audio", "text"):
                        n_tok = int(rng.integers(token_range[0], token_range[1] + 1))
                        if signal == "all" or signal == m:
                            mat = centers[m][class_id] + noise * rng.normal(size=(n_tok, dim))
                        else:
                            mat = margin * rng.normal(size=(n_tok, dim))
                        ref = f"feats/{m}/{vid}_v{k}.ihqf"
                        write_features(root / ref, mat.astype(np.float32))
                        vrefs[m] = ref
                    lines.append(
                        {
                            "video_id": f"{vid}_v{k}",
                            "class": cls.name,
                            "language": original["language"],
                            "audio_clear": True,
                            "human_centric": True,
                            "duration_s": original["duration_s"],
                            "parent_id": vid,
                            "variant_index": k,
                            "features": vrefs,
                        }
                    )
    path = root / "manifest.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for obj in lines:
            fh.write(json.dumps(obj) + "\n")
    return path


def write_latent_corpus(
    root,
    n_per_class=10,
    n_classes=23,
    latent_dim=16,
    dim=64,
    margin=3.0,
    latent_noise=0.5,
    obs_noise=10.0,
    token_range=(2, 3),
    seed=0,
):
    """Corpus whose three modalities are noisy linear views of one latent.

    Every record draws a per-sample latent around its class center; each
    modality observes it through a fixed random mixing matrix plus heavy
    independent noise. The three augmentation variants re-draw the
    observation noise for audio/text at the same latent, so cross-view
    alignment can average it away while single raw views cannot.
    Returns the manifest path.
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(n_classes, latent_dim)).astype(np.float32) * margin
    mixes = {
        m: rng.normal(size=(latent_dim, dim)).astype(np.float32)
        for m in ("video", "audio", "text")
    }

    def observe(z, m, n_tok):
        clean = z @ mixes[m]
        mat = clean[None, :] + obs_noise * rng.normal(size=(n_tok, dim))
        return mat.astype(np.float32)

    lines = []
    for class_id in range(n_classes):
        cls = class_by_id(class_id)
        for i in range(n_per_class):
            vid = f"lat-{class_id:02d}-{i:02d}"
            z = centers[class_id] + latent_noise * rng.normal(size=latent_dim)
            z = z.astype(np.float32)
            refs = {}
            for m in ("video", "audio", "text"):
                n_tok = int(rng.integers(token_range[0], token_range[1] + 1))
                ref = f"feats/{m}/{vid}.ihqf"
                write_features(root / ref, observe(z, m, n_tok))
                refs[m] = ref
            lines.append({
                "video_id": vid,
                "class": cls.name,
                "language": "en",
                "audio_clear": True,
                "human_centric": True,
                "duration_s": 60.0,
                "parent_id": "",
                "variant_index": 0,
                "features": refs,
            })
            for k in (1, 2, 3):
                vrefs = {"video": refs["video"]}
                for m in ("audio", "text"):
                    n_tok = int(rng.integers(token_range[0], token_range[1] + 1))
                    ref = f"feats/{m}/{vid}_v{k}.ihqf"
                    write_features(root / ref, observe(z, m, n_tok))
                    vrefs[m] = ref
                lines.append({
                    "video_id": f"{vid}_v{k}",
                    "class": cls.name,
                    "language": "en",
                    "audio_clear": True,
                    "human_centric": True,
                    "duration_s": 60.0,
                    "parent_id": vid,
                    "variant_index": k,
                    "features": vrefs,
                })
    path = root / "manifest.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for obj in lines:
            fh.write(json.dumps(obj) + "\n")
    return path


def load_corpus(root, **kwargs):
    return load_manifest(Path(root) / "manifest.jsonl", **kwargs)


def replica_counts():
    """Per-class original counts matching the published totals.

    16 classes hold 225 videos and 7 hold 224; the 224s are split 3 benign /
    4 malicious so the benign/malicious sums come out to 2472 / 2696.
    """
    counts = {}
    benign_short = 0
    malicious_short = 0
    for cls in TAXONOMY:
        if cls.malicious:
            if malicious_short < 4:
                counts[cls.class_id] = 224
                malicious_short += 1
            else:
                counts[cls.class_id] = 225
        else:
            if benign_short < 3:
                counts[cls.class_id] = 224
                benign_short += 1
            else:
                counts[cls.class_id] = 225
    return counts


def make_replica_records():
    """Manifest records (no feature files) with the published class counts."""
    from intentlab.manifest import VideoRecord

    records = []
    for class_id, count in sorted(replica_counts().items()):
        for i in range(count):
            records.append(
                VideoRecord(
                    video_id=f"r{class_id:02d}-{i:04d}",
                    class_id=class_id,
                    language="en",
                    audio_clear=True,
                    human_centric=True,
                    duration_s=80.1,
                    features={
                        "video": f"feats/video/r{class_id:02d}-{i:04d}.ihqf",
                        "audio": f"feats/audio/r{class_id:02d}-{i:04d}.ihqf",
                        "text": f"feats/text/r{class_id:02d}-{i:04d}.ihqf",
                    },
                )
            )
    return records
