"""Stratified cross-validation folds over manifest originals.

Per class, originals are shuffled (seeded) and dealt round-robin, so
per-class fold sizes differ by at most 1. Augmentation variants always
land in their parent's fold; evaluation splits contain originals only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import StratificationError
from .manifest import Manifest, VideoRecord
from .numerics.rng import make_rng
from .taxonomy import class_by_id

__all__ = ["FoldAssignment", "assign_folds", "save_folds", "load_folds", "split_fold"]


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    seed: int
    fold_of: dict[str, int]  # every record id, variants co-assigned with parent
    histograms: tuple[dict[str, int], ...]  # per fold, class name -> original count

    def to_json(self) -> str:
        obj = {
            "k": self.k,
            "seed": self.seed,
            "assignment": self.fold_of,
            "histograms": list(self.histograms),
        }
        return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def assign_folds(manifest: Manifest, k: int = 5, seed: int = 0) -> FoldAssignment:
    originals = manifest.originals()
    by_class: dict[int, list[VideoRecord]] = {}
    for r in originals:
        by_class.setdefault(r.class_id, []).append(r)

    too_small = sorted(
        class_by_id(cid).name for cid, rs in by_class.items() if len(rs) < k
    )
    if too_small:
        raise StratificationError(
            f"classes with fewer than {k} originals: {too_small}"
        )

    fold_of: dict[str, int] = {}
    histograms = [dict() for _ in range(k)]
    for cid in sorted(by_class):
        ids = sorted(r.video_id for r in by_class[cid])
        perm = make_rng(seed, "folds", cid).permutation(len(ids))
        name = class_by_id(cid).name
        for pos, j in enumerate(perm):
            fold = pos % k
            fold_of[ids[j]] = fold
            histograms[fold][name] = histograms[fold].get(name, 0) + 1

    for r in manifest.variants():
        fold_of[r.video_id] = fold_of[r.parent_id]

    return FoldAssignment(k=k, seed=seed, fold_of=fold_of,
                          histograms=tuple(histograms))


def save_folds(folds: FoldAssignment, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(folds.to_json(), encoding="utf-8")


def load_folds(path) -> FoldAssignment:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return FoldAssignment(
        k=int(obj["k"]),
        seed=int(obj["seed"]),
        fold_of={str(k): int(v) for k, v in obj["assignment"].items()},
        histograms=tuple({str(c): int(n) for c, n in h.items()}
                         for h in obj["histograms"]),
    )


def split_fold(manifest: Manifest, folds: FoldAssignment, fold_index: int,
               include_variants: bool = False
               ) -> tuple[tuple[VideoRecord, ...], tuple[VideoRecord, ...]]:
    """(train, validation) for one fold.

    Validation is the held-out fold's originals. Training is every other
    fold's originals, plus their variants when requested.
    """
    if not 0 <= fold_index < folds.k:
        raise StratificationError(f"fold index {fold_index} outside 0-{folds.k - 1}")
    train: list[VideoRecord] = []
    val: list[VideoRecord] = []
    for r in manifest.records:
        fold = folds.fold_of[r.video_id]
        if fold == fold_index:
            if not r.is_augmented:
                val.append(r)
        elif r.is_augmented:
            if include_variants:
                train.append(r)
        else:
            train.append(r)
    return tuple(train), tuple(val)
