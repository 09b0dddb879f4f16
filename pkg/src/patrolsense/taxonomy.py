"""Event-of-interest taxonomy: the 38 prioritized event types and label lookup.

The bundled taxonomy is loaded from ``assets/taxonomy.csv`` (38 rows, four
priority levels) plus an editable synonym table in ``assets/synonyms.json``.
Agencies tune both files rather than code: event "recipes" differ between
departments, so nothing here is hardcoded beyond the file schema.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Union

from .errors import ValidationError

EXPECTED_ENTRY_COUNT = 38


class PriorityLevel(IntEnum):
    """Operational priority, ordinal: lower value = more urgent."""

    Emergency = 0
    Urgent = 1
    Moderate = 2
    Advisory = 3

    @classmethod
    def from_name(cls, name: str) -> "PriorityLevel":
        try:
            return cls[name.strip().capitalize()]
        except KeyError:
            raise ValidationError(f"unknown priority {name!r}") from None


class LegalLabel(Enum):
    Crime = "Crime"
    Civil = "Civil"

    @classmethod
    def from_name(cls, name: str) -> "LegalLabel":
        try:
            return cls[name.strip().capitalize()]
        except KeyError:
            raise ValidationError(f"unknown legal label {name!r}") from None


class EntityCategory(Enum):
    """Simplified icon grouping used on the map: person / vehicle / other."""

    Person = "Person"
    Vehicle = "Vehicle"
    Other = "Other"

    @classmethod
    def from_name(cls, name: str) -> "EntityCategory":
        try:
            return cls[name.strip().capitalize()]
        except KeyError:
            raise ValidationError(f"unknown entity category {name!r}") from None


def normalize_label(raw: str) -> str:
    """Canonical form used for all name/synonym lookups: trim + lowercase."""
    return raw.strip().lower()


@dataclass(frozen=True)
class EoiType:
    """One event type: canonical name, priority, legal label, icon category."""

    id: int
    name: str
    priority: PriorityLevel
    legal_label: LegalLabel
    entity_category: EntityCategory
    synonyms: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "priority": self.priority.name,
            "legal_label": self.legal_label.value,
            "entity_category": self.entity_category.value,
            "synonyms": list(self.synonyms),
        }


@dataclass(frozen=True)
class Taxonomy:
    """Immutable, validated event taxonomy with a normalized-name lookup."""

    entries: tuple[EoiType, ...]
    lookup: dict[str, EoiType] = field(repr=False)

    def by_id(self, eoi_id: int) -> EoiType:
        return self.entries[eoi_id - 1]

    def priority_counts(self) -> dict[PriorityLevel, int]:
        counts = {level: 0 for level in PriorityLevel}
        for entry in self.entries:
            counts[entry.priority] += 1
        return counts

    def digest(self) -> str:
        """One-line-per-entry summary handed to the segment reasoner."""
        lines = [f"{e.id}. {e.name} [{e.priority.name}]" for e in self.entries]
        return "\n".join(lines)


def _build_taxonomy(entries: list[EoiType]) -> Taxonomy:
    if len(entries) != EXPECTED_ENTRY_COUNT:
        raise ValidationError(
            f"expected {EXPECTED_ENTRY_COUNT} entries, got {len(entries)}"
        )
    entries = sorted(entries, key=lambda e: e.id)
    ids = [e.id for e in entries]
    if ids != list(range(1, EXPECTED_ENTRY_COUNT + 1)):
        for want, got in zip(range(1, EXPECTED_ENTRY_COUNT + 1), ids):
            if want != got:
                raise ValidationError(f"ids not contiguous: expected {want}, found {got}")
    lookup: dict[str, EoiType] = {}
    for entry in entries:
        if not entry.name.strip():
            raise ValidationError(f"row {entry.id}: empty name")
        keys = [normalize_label(entry.name), *entry.synonyms]
        for key in keys:
            if key in lookup:
                raise ValidationError(
                    f"row {entry.id}: duplicate name/synonym {key!r} "
                    f"(already used by {lookup[key].name!r})"
                )
            lookup[key] = entry
    return Taxonomy(entries=tuple(entries), lookup=lookup)


def _parse_row(row: dict, row_no: int) -> EoiType:
    try:
        eoi_id = int(str(row["id"]).strip())
    except (KeyError, ValueError):
        raise ValidationError(f"row {row_no}: bad or missing id {row.get('id')!r}") from None
    name = str(row.get("name", "")).strip()
    if not name:
        raise ValidationError(f"row {row_no} (id {eoi_id}): empty name")
    raw_syn = row.get("synonyms", "") or ""
    if isinstance(raw_syn, str):
        synonyms = [normalize_label(s) for s in raw_syn.split(";") if s.strip()]
    else:
        synonyms = [normalize_label(s) for s in raw_syn if str(s).strip()]
    try:
        return EoiType(
            id=eoi_id,
            name=name,
            priority=PriorityLevel.from_name(str(row["priority"])),
            legal_label=LegalLabel.from_name(str(row["legal_label"])),
            entity_category=EntityCategory.from_name(str(row["entity_category"])),
            synonyms=tuple(dict.fromkeys(synonyms)),
        )
    except KeyError as exc:
        raise ValidationError(f"row {row_no} (id {eoi_id}): missing field {exc}") from None
    except ValidationError as exc:
        raise ValidationError(f"row {row_no} (id {eoi_id}): {exc}") from None


def load_taxonomy(
    source: Union[str, Path],
    synonyms: Optional[Union[str, Path, dict]] = None,
) -> Taxonomy:
    """Load a taxonomy table from a CSV or JSON-array file.

    ``synonyms`` optionally merges an external synonym table (JSON mapping
    canonical event name -> list of synonyms) on top of any synonyms already
    present in the table.
    """
    path = Path(source)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        rows = json.loads(text)
        if not isinstance(rows, list):
            raise ValidationError("taxonomy JSON must be an array of row objects")
    else:
        rows = list(csv.DictReader(text.splitlines()))
    entries = [_parse_row(row, i + 1) for i, row in enumerate(rows)]
    if synonyms is not None:
        entries = _merge_synonyms(entries, synonyms)
    return _build_taxonomy(entries)


def _merge_synonyms(entries: list[EoiType], synonyms: Union[str, Path, dict]) -> list[EoiType]:
    if isinstance(synonyms, (str, Path)):
        table = json.loads(Path(synonyms).read_text(encoding="utf-8"))
    else:
        table = synonyms
    by_name = {normalize_label(e.name): e for e in entries}
    for name, extra in table.items():
        key = normalize_label(name)
        if key not in by_name:
            raise ValidationError(f"synonym table names unknown event {name!r}")
        entry = by_name[key]
        merged = list(entry.synonyms) + [normalize_label(s) for s in extra]
        by_name[key] = EoiType(
            id=entry.id,
            name=entry.name,
            priority=entry.priority,
            legal_label=entry.legal_label,
            entity_category=entry.entity_category,
            synonyms=tuple(dict.fromkeys(merged)),
        )
    return [by_name[normalize_label(e.name)] for e in entries]


def default_taxonomy_path() -> Path:
    return Path(str(resources.files("patrolsense").joinpath("assets/taxonomy.csv")))


def default_synonyms_path() -> Path:
    return Path(str(resources.files("patrolsense").joinpath("assets/synonyms.json")))


def load_default_taxonomy() -> Taxonomy:
    """The bundled 38-event taxonomy with the bundled synonym table applied."""
    return load_taxonomy(default_taxonomy_path(), default_synonyms_path())


def classify_label(raw: str, taxonomy: Taxonomy) -> Optional[EoiType]:
    """Map free-text event labels onto the taxonomy.

    Exact match on the canonical name first (case-insensitive, trimmed),
    then on synonyms. Returns None when nothing matches; absence is a value
    here, not an error, so unmatched reasoner output stays countable.
    """
    return taxonomy.lookup.get(normalize_label(raw))


def priority_of(eoi: EoiType) -> PriorityLevel:
    return eoi.priority


def validate_taxonomy(entries: Iterable[EoiType]) -> Taxonomy:
    """Build and validate a Taxonomy from already-parsed entries."""
    return _build_taxonomy(list(entries))
