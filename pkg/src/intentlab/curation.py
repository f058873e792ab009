"""Dataset construction: keyword-driven candidate collection over a video
catalog, then 3-annotator majority-vote resolution of the provisional labels.

Collection walks categories and their keywords in file order, matching each
keyword case-insensitively as a substring of title + description + tags,
keeps the first 5 sufficiently short matches per keyword, pools candidates
uniquely by video_id (first category wins), and finally drops entries that
are not human-centric.

Resolution keeps a candidate when at least 2 of its 3 annotators agree on
the same outcome: keep (provisional label stands), change to one identical
target class (relabeled), or remove. Anything less agreeing is discarded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import CurationError, LabelError, ManifestError
from .manifest import MAX_DURATION_S, VideoRecord
from .taxonomy import class_by_name

__all__ = [
    "CatalogEntry",
    "Decision",
    "AnnotationRecord",
    "CandidatePool",
    "Resolution",
    "load_catalog",
    "load_keywords",
    "load_annotations",
    "collect_candidates",
    "resolve_annotations",
    "curation_report",
    "kept_records",
]


@dataclass(frozen=True)
class CatalogEntry:
    video_id: str
    title: str
    description: str
    tags: tuple[str, ...]
    duration_s: float
    human_centric: bool

    def haystack(self) -> str:
        return " ".join([self.title, self.description, *self.tags]).lower()


@dataclass(frozen=True)
class Decision:
    action: str  # keep | change | remove
    to: str | None = None  # target class name, change only

    def __post_init__(self):
        if self.action not in ("keep", "change", "remove"):
            raise CurationError(f"unknown annotator action {self.action!r}")
        if self.action == "change":
            if not self.to:
                raise CurationError("change decision needs a target class")
            class_by_name(self.to)  # raises LabelError if out of taxonomy
        elif self.to is not None:
            raise CurationError(f"{self.action} decision must not name a target")


@dataclass(frozen=True)
class AnnotationRecord:
    video_id: str
    decisions: tuple[Decision, Decision, Decision]

    def __post_init__(self):
        if len(self.decisions) != 3:
            raise CurationError(
                f"{self.video_id}: expected 3 decisions, got {len(self.decisions)}"
            )


@dataclass
class CandidatePool:
    # video_id -> provisional category, insertion-ordered
    provisional: dict[str, str] = field(default_factory=dict)
    unmatched_keywords: list[tuple[str, str]] = field(default_factory=list)


@dataclass(frozen=True)
class Resolution:
    kept: dict[str, str]       # video_id -> final category (relabels included)
    relabeled: dict[str, str]  # video_id -> new category
    discarded: dict[str, str]  # video_id -> reason


def load_catalog(path) -> tuple[CatalogEntry, ...]:
    entries: list[CatalogEntry] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                entry = CatalogEntry(
                    video_id=str(obj["video_id"]),
                    title=str(obj.get("title", "")),
                    description=str(obj.get("description", "")),
                    tags=tuple(str(t) for t in obj.get("tags", [])),
                    duration_s=float(obj["duration_s"]),
                    human_centric=bool(obj["human_centric"]),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise CurationError(f"{path}:{lineno}: bad catalog entry ({e})") from None
            if entry.video_id in seen:
                raise CurationError(f"{path}:{lineno}: duplicate video_id {entry.video_id!r}")
            seen.add(entry.video_id)
            entries.append(entry)
    return tuple(entries)


def load_keywords(path) -> dict[str, list[str]]:
    """Parse "category<TAB>keyword" lines, preserving order within category."""
    keywords: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[1].strip():
                raise CurationError(
                    f"{path}:{lineno}: expected 'category<TAB>keyword'"
                )
            category, keyword = parts[0].strip(), parts[1].strip()
            class_by_name(category)  # unknown category -> label error
            keywords.setdefault(category, []).append(keyword)
    if not keywords:
        raise CurationError(f"{path}: no keywords")
    return keywords


def load_annotations(path) -> dict[str, AnnotationRecord]:
    records: dict[str, AnnotationRecord] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                decisions = tuple(
                    Decision(action=str(d["action"]), to=d.get("to"))
                    for d in obj["decisions"]
                )
                rec = AnnotationRecord(video_id=str(obj["video_id"]),
                                       decisions=decisions)  # type: ignore[arg-type]
            except (CurationError, LabelError):
                raise
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise CurationError(f"{path}:{lineno}: bad annotation ({e})") from None
            if rec.video_id in records:
                raise CurationError(f"{path}:{lineno}: duplicate annotation for {rec.video_id!r}")
            records[rec.video_id] = rec
    return records


def collect_candidates(catalog: Sequence[CatalogEntry],
                       keywords: dict[str, list[str]]) -> CandidatePool:
    pool = CandidatePool()
    for category, kws in keywords.items():
        class_by_name(category)
        for keyword in kws:
            needle = keyword.lower()
            taken = 0
            matched_any = False
            for entry in catalog:
                if needle in entry.haystack():
                    matched_any = True
                    if entry.duration_s >= MAX_DURATION_S:
                        continue
                    taken += 1
                    if entry.video_id not in pool.provisional:
                        pool.provisional[entry.video_id] = category
                    if taken == 5:
                        break
            if not matched_any:
                pool.unmatched_keywords.append((category, keyword))
    human = {e.video_id for e in catalog if e.human_centric}
    pool.provisional = {vid: cat for vid, cat in pool.provisional.items()
                        if vid in human}
    return pool


def resolve_annotations(pool: CandidatePool,
                        annotations: dict[str, AnnotationRecord]) -> Resolution:
    kept: dict[str, str] = {}
    relabeled: dict[str, str] = {}
    discarded: dict[str, str] = {}
    for vid in sorted(pool.provisional):
        record = annotations.get(vid)
        if record is None:
            raise CurationError(f"no annotation record for candidate {vid!r}")
        votes: dict[tuple[str, str | None], int] = {}
        for d in record.decisions:
            key = (d.action, d.to if d.action == "change" else None)
            votes[key] = votes.get(key, 0) + 1
        majority = [key for key, n in votes.items() if n >= 2]
        if not majority:
            discarded[vid] = "disagreement"
            continue
        action, target = majority[0]
        if action == "keep":
            kept[vid] = pool.provisional[vid]
        elif action == "change":
            assert target is not None
            kept[vid] = target
            if target != pool.provisional[vid]:
                relabeled[vid] = target
        else:
            discarded[vid] = "remove-majority"
    return Resolution(kept=kept, relabeled=relabeled, discarded=discarded)


def curation_report(pool: CandidatePool, resolution: Resolution) -> dict:
    """Per-provisional-category counts; kept excludes relabels, so
    kept + relabeled + discarded == collected in every row."""
    per_category: dict[str, dict[str, int]] = {}
    for vid, category in pool.provisional.items():
        row = per_category.setdefault(
            category, {"collected": 0, "kept": 0, "relabeled": 0, "discarded": 0})
        row["collected"] += 1
        if vid in resolution.discarded:
            row["discarded"] += 1
        elif vid in resolution.relabeled:
            row["relabeled"] += 1
        else:
            row["kept"] += 1
    totals = {"collected": 0, "kept": 0, "relabeled": 0, "discarded": 0}
    for row in per_category.values():
        for k in totals:
            totals[k] += row[k]
    return {
        "per_category": {c: per_category[c] for c in sorted(per_category)},
        "totals": totals,
        "unmatched_keywords": [list(x) for x in pool.unmatched_keywords],
    }


def kept_records(catalog: Sequence[CatalogEntry],
                 resolution: Resolution) -> tuple[VideoRecord, ...]:
    """Manifest skeleton rows (no feature references yet) for the kept set,
    canonically sorted by video_id."""
    by_id = {e.video_id: e for e in catalog}
    records = []
    for vid in sorted(resolution.kept):
        entry = by_id.get(vid)
        if entry is None:
            raise ManifestError(f"kept video {vid!r} missing from catalog")
        records.append(VideoRecord(
            video_id=vid,
            class_id=class_by_name(resolution.kept[vid]).class_id,
            language="und",
            audio_clear=True,
            human_centric=entry.human_centric,
            duration_s=entry.duration_s,
            features={m: "" for m in ("video", "audio", "text")},
        ))
    return tuple(records)
