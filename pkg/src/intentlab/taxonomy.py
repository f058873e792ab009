"""The fixed 23-class intent label space.

The taxonomy is compiled in, not configured: downstream code (binary
collapse, stratification, class heads) depends on this exact table.
Class ids run 0-22; groups 1-5 bundle related intents; each class is
flagged benign or malicious (11 vs 12).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import LabelError

__all__ = [
    "IntentClass",
    "TAXONOMY",
    "N_CLASSES",
    "GROUP_NAMES",
    "BENIGN_CLASS_IDS",
    "MALICIOUS_CLASS_IDS",
    "class_by_id",
    "class_by_name",
    "binary_collapse",
]


@dataclass(frozen=True)
class IntentClass:
    class_id: int
    name: str
    group_id: int
    malicious: bool


GROUP_NAMES = {
    1: "Deception",
    2: "Emotional engagement",
    3: "Information delivery",
    4: "Persuasion focused",
    5: "Reputation",
}

TAXONOMY: tuple[IntentClass, ...] = (
    IntentClass(0, "Fake expertise", 1, True),
    IntentClass(1, "Financial fraud", 1, True),
    IntentClass(2, "Social engineering", 1, True),
    IntentClass(3, "Comedy", 2, False),
    IntentClass(4, "Drama / storytelling", 2, False),
    IntentClass(5, "Fear-mongering", 2, True),
    IntentClass(6, "Outrage generation", 2, True),
    IntentClass(7, "Viral sensationalism", 2, True),
    IntentClass(8, "Academic or scientific", 3, False),
    IntentClass(9, "Guidance-or-Tutorial", 3, False),
    IntentClass(10, "Conspiracy theories", 3, True),
    IntentClass(11, "Pseudoscience", 3, True),
    IntentClass(12, "News or current event", 3, False),
    IntentClass(13, "Direct marketing", 4, False),
    IntentClass(14, "Indirect marketing", 4, False),
    IntentClass(15, "Influencer marketing", 4, True),
    IntentClass(16, "Political propaganda", 4, True),
    IntentClass(17, "Religious proselytizing", 4, True),
    IntentClass(18, "Social movement advocacy", 4, False),
    IntentClass(19, "Character assassination", 5, True),
    IntentClass(20, "Whistle-blowing", 5, False),
    IntentClass(21, "Life documentation", 5, False),
    IntentClass(22, "Personal-Promotion", 5, False),
)

N_CLASSES = len(TAXONOMY)

_BY_ID = {c.class_id: c for c in TAXONOMY}
_BY_NAME = {c.name: c for c in TAXONOMY}

BENIGN_CLASS_IDS = tuple(c.class_id for c in TAXONOMY if not c.malicious)
MALICIOUS_CLASS_IDS = tuple(c.class_id for c in TAXONOMY if c.malicious)

assert len(BENIGN_CLASS_IDS) == 11 and len(MALICIOUS_CLASS_IDS) == 12


def class_by_id(class_id: int) -> IntentClass:
    try:
        return _BY_ID[class_id]
    except KeyError:
        raise LabelError(f"unknown class_id {class_id!r}") from None


def class_by_name(name: str) -> IntentClass:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise LabelError(f"unknown class name {name!r}") from None


def binary_collapse(class_id: int) -> str:
    """Collapse a class id to its coarse label, "benign" or "malicious"."""
    return "malicious" if class_by_id(class_id).malicious else "benign"
