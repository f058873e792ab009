"""Dataset manifests: per-video metadata plus feature-file references.

A manifest is JSONL, one record per line, UTF-8, fields in canonical
order: video_id, class (canonical class name), language, audio_clear,
human_centric, duration_s, parent_id, variant_index, features
{video, audio, text} as paths relative to the manifest's directory.

Originals have variant_index 0 and an empty parent_id. Augmentation
variants (variant_index 1-3) supply their own text and audio features
but must reuse the parent's video feature file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import (
    AugmentationError,
    DimensionError,
    LabelError,
    ManifestError,
)
from .features import read_feature_header
from .taxonomy import GROUP_NAMES, TAXONOMY, binary_collapse, class_by_id, class_by_name

__all__ = [
    "MODALITY_KEYS",
    "MAX_DURATION_S",
    "VideoRecord",
    "Manifest",
    "load_manifest",
    "write_manifest",
    "class_stats",
    "filter_subset",
    "attach_variants",
]

MODALITY_KEYS = ("video", "audio", "text")
MAX_DURATION_S = 240.0


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    class_id: int
    language: str
    audio_clear: bool
    human_centric: bool
    duration_s: float
    parent_id: str = ""
    variant_index: int = 0
    features: dict[str, str] = field(default_factory=dict)

    @property
    def is_augmented(self) -> bool:
        return self.variant_index > 0

    def to_json_obj(self) -> dict:
        return {
            "video_id": self.video_id,
            "class": class_by_id(self.class_id).name,
            "language": self.language,
            "audio_clear": self.audio_clear,
            "human_centric": self.human_centric,
            "duration_s": self.duration_s,
            "parent_id": self.parent_id,
            "variant_index": self.variant_index,
            "features": {m: self.features.get(m, "") for m in MODALITY_KEYS},
        }


@dataclass(frozen=True)
class Manifest:
    records: tuple[VideoRecord, ...]
    root: Path | None = None
    feature_dims: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_id(self) -> dict[str, VideoRecord]:
        return {r.video_id: r for r in self.records}

    def originals(self) -> tuple[VideoRecord, ...]:
        return tuple(r for r in self.records if not r.is_augmented)

    def variants(self) -> tuple[VideoRecord, ...]:
        return tuple(r for r in self.records if r.is_augmented)


def _parse_record(obj: dict, where: str) -> VideoRecord:
    try:
        name = obj["class"]
        features = obj["features"]
        record = VideoRecord(
            video_id=str(obj["video_id"]),
            class_id=class_by_name(name).class_id,
            language=str(obj["language"]).lower(),
            audio_clear=bool(obj["audio_clear"]),
            human_centric=bool(obj["human_centric"]),
            duration_s=float(obj["duration_s"]),
            parent_id=str(obj.get("parent_id", "")),
            variant_index=int(obj.get("variant_index", 0)),
            features={m: str(features.get(m, "")) for m in MODALITY_KEYS},
        )
    except LabelError as e:
        raise LabelError(f"{where}: {e}") from None
    except (KeyError, TypeError, ValueError) as e:
        raise ManifestError(f"{where}: malformed record ({e})") from None
    return record


def validate_manifest(records: Sequence[VideoRecord], root: Path | None,
                      check_features: bool = True) -> dict[str, int]:
    """Check all structural invariants; returns per-modality feature dims."""
    seen: dict[str, VideoRecord] = {}
    for r in records:
        if r.video_id in seen:
            raise ManifestError(f"{r.video_id}: duplicate video_id")
        seen[r.video_id] = r

    for r in records:
        if not (0 < r.duration_s < MAX_DURATION_S):
            raise ManifestError(
                f"{r.video_id}: duration {r.duration_s} s outside (0, {MAX_DURATION_S})"
            )
        if r.variant_index == 0:
            if r.parent_id:
                raise AugmentationError(
                    f"{r.video_id}: original must not name a parent"
                )
        else:
            if r.variant_index not in (1, 2, 3):
                raise AugmentationError(
                    f"{r.video_id}: variant_index {r.variant_index} outside 1-3"
                )
            parent = seen.get(r.parent_id)
            if parent is None:
                raise AugmentationError(
                    f"{r.video_id}: parent {r.parent_id!r} not in manifest"
                )
            if parent.is_augmented:
                raise AugmentationError(
                    f"{r.video_id}: parent {r.parent_id} is itself a variant"
                )
            if parent.class_id != r.class_id:
                raise AugmentationError(
                    f"{r.video_id}: class differs from parent {r.parent_id}"
                )
            if r.features.get("video") != parent.features.get("video"):
                raise AugmentationError(
                    f"{r.video_id}: video feature reference differs from parent"
                )

    dims: dict[str, int] = {}
    if check_features:
        if root is None:
            raise ManifestError("feature validation requires a root directory")
        header_cache: dict[str, tuple[int, int]] = {}
        for r in records:
            for m in MODALITY_KEYS:
                ref = r.features.get(m, "")
                if not ref:
                    raise ManifestError(f"{r.video_id}: missing {m} feature reference")
                if ref not in header_cache:
                    try:
                        header_cache[ref] = read_feature_header(root / ref)
                    except OSError as e:
                        raise ManifestError(
                            f"{r.video_id}: cannot read {m} features {ref!r} ({e})"
                        ) from None
                cols = header_cache[ref][1]
                if m in dims and dims[m] != cols:
                    raise DimensionError(
                        f"{r.video_id}: {m} feature dim {cols} != {dims[m]} "
                        "used elsewhere in the manifest"
                    )
                dims[m] = cols
    return dims


def load_manifest(path, check_features: bool = True) -> Manifest:
    path = Path(path)
    records: list[VideoRecord] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f"{path}:{lineno}: invalid JSON ({e})") from None
            records.append(_parse_record(obj, f"{path}:{lineno}"))
    root = path.parent
    dims = validate_manifest(records, root, check_features=check_features)
    return Manifest(records=tuple(records), root=root, feature_dims=dims)


def write_manifest(manifest: Manifest | Iterable[VideoRecord], path) -> None:
    records = manifest.records if isinstance(manifest, Manifest) else tuple(manifest)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r.to_json_obj(), ensure_ascii=False))
            f.write("\n")


def class_stats(manifest: Manifest) -> dict:
    """Counts over originals: per class, per group, benign/malicious, hours."""
    originals = manifest.originals()
    per_class = {c.name: 0 for c in TAXONOMY}
    per_group = {name: 0 for name in GROUP_NAMES.values()}
    benign = malicious = 0
    seconds = 0.0
    for r in originals:
        cls = class_by_id(r.class_id)
        per_class[cls.name] += 1
        per_group[GROUP_NAMES[cls.group_id]] += 1
        if binary_collapse(r.class_id) == "malicious":
            malicious += 1
        else:
            benign += 1
        seconds += r.duration_s
    out_of_range = sorted(
        name for name, n in per_class.items() if not 220 <= n <= 230
    )
    return {
        "total_originals": len(originals),
        "total_records": len(manifest.records),
        "n_variants": len(manifest.records) - len(originals),
        "benign": benign,
        "malicious": malicious,
        "hours": seconds / 3600.0,
        "per_class": per_class,
        "per_group": per_group,
        "replica_range_warnings": out_of_range,
    }


_PREDICATES: dict[str, Callable[[VideoRecord], bool]] = {
    "english_only": lambda r: r.language.split("-")[0] == "en",
    "clear_audio": lambda r: r.audio_clear,
}


def filter_subset(manifest: Manifest, predicate) -> Manifest:
    """Keep records passing the predicate; drop variants of dropped parents.

    ``predicate`` is "english_only", "clear_audio", or a callable on records.
    """
    if isinstance(predicate, str):
        if predicate not in _PREDICATES:
            raise ManifestError(
                f"unknown filter {predicate!r}; options: {sorted(_PREDICATES)}"
            )
        predicate = _PREDICATES[predicate]
    kept = [r for r in manifest.records if predicate(r)]
    kept_ids = {r.video_id for r in kept if not r.is_augmented}
    kept = [r for r in kept if not r.is_augmented or r.parent_id in kept_ids]
    return Manifest(records=tuple(kept), root=manifest.root,
                    feature_dims=dict(manifest.feature_dims))


def attach_variants(manifest: Manifest, variant_table: Iterable[dict],
                    check_features: bool = True) -> Manifest:
    """Merge augmentation variants into a manifest of originals.

    Each table entry: {parent_id, variant_index, audio, text} plus optional
    video_id (defaults to "<parent_id>_v<index>"). Every original must gain
    exactly 3 variants; a variant never brings its own video features.
    """
    if manifest.variants():
        raise AugmentationError("manifest already contains variants")
    parents = manifest.by_id()
    counts = {vid: 0 for vid in parents}
    new_records: list[VideoRecord] = []
    for entry in variant_table:
        pid = str(entry["parent_id"])
        parent = parents.get(pid)
        if parent is None:
            raise AugmentationError(f"variant table names unknown parent {pid!r}")
        if "video" in entry and entry["video"] != parent.features["video"]:
            raise AugmentationError(
                f"variant of {pid} supplies its own video features"
            )
        idx = int(entry["variant_index"])
        vid = str(entry.get("video_id", f"{pid}_v{idx}"))
        new_records.append(replace(
            parent,
            video_id=vid,
            parent_id=pid,
            variant_index=idx,
            features={
                "video": parent.features["video"],
                "audio": str(entry["audio"]),
                "text": str(entry["text"]),
            },
        ))
        counts[pid] += 1
    wrong = sorted(vid for vid, n in counts.items() if n != 3)
    if wrong:
        raise AugmentationError(
            f"each original needs exactly 3 variants; wrong counts for {wrong[:5]}"
        )
    records = tuple(manifest.records) + tuple(new_records)
    dims = validate_manifest(records, manifest.root, check_features=check_features)
    return Manifest(records=records, root=manifest.root,
                    feature_dims=dims or dict(manifest.feature_dims))
