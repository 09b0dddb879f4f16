"""Descriptor-based retrieval of persons and vehicles.

Queries combine include constraints (scored) with exclude constraints (hard
filters). The match score is the fraction of specified include attributes the
profile satisfies: simple, monotone, and explainable, which suits the
broad-then-narrow filtering investigators actually do. Fallback values
("other"/"unclear") never count as matches and only trip an exclusion when
listed explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .descriptors import FALLBACKS, DescriptorProfile
from .errors import ValidationError
from .pipeline import EventCard
from .segments import overlap_ms
from .taxonomy import EntityCategory


@dataclass(frozen=True)
class DescriptorQuery:
    entity_class: EntityCategory
    include: dict[str, frozenset[str]] = field(default_factory=dict)
    exclude: dict[str, frozenset[str]] = field(default_factory=dict)
    sessions: Optional[frozenset[str]] = None
    time_range: Optional[tuple[int, int]] = None

    def __post_init__(self) -> None:
        for attr in set(self.include) & set(self.exclude):
            common = self.include[attr] & self.exclude[attr]
            if common:
                raise ValidationError(
                    f"attribute {attr!r}: values {sorted(common)} in both include and exclude"
                )

    @classmethod
    def from_dict(cls, raw: dict) -> "DescriptorQuery":
        time_range = None
        if raw.get("time_range") is not None:
            lo, hi = raw["time_range"]
            time_range = (int(lo), int(hi))
        return cls(
            entity_class=EntityCategory.from_name(str(raw["entity_class"])),
            include={str(k): frozenset(map(str, v)) for k, v in (raw.get("include") or {}).items()},
            exclude={str(k): frozenset(map(str, v)) for k, v in (raw.get("exclude") or {}).items()},
            sessions=frozenset(map(str, raw["sessions"])) if raw.get("sessions") else None,
            time_range=time_range,
        )


@dataclass(frozen=True)
class EntityMatch:
    profile: DescriptorProfile
    score: float
    matched_attributes: tuple[str, ...]
    first_seen: tuple[str, int]  # (session_id, t_ms)
    card_links: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "entity_id": self.profile.entity_id,
            "entity_class": self.profile.entity_class.value,
            "score": self.score,
            "matched_attributes": list(self.matched_attributes),
            "attributes": dict(sorted(self.profile.attributes.items())),
            "representative_crop": self.profile.representative_crop,
            "first_seen": {"session_id": self.first_seen[0], "t_ms": self.first_seen[1]},
            "card_links": list(self.card_links),
        }


class DescriptorIndex:
    """Immutable attribute-equality index over verified profiles.

    Rebuilds are deterministic; swap the whole index to refresh. Cards, when
    supplied, are linked to each profile whose track spans they overlap.
    """

    def __init__(
        self,
        profiles: Sequence[DescriptorProfile],
        cards: Sequence[EventCard] = (),
    ) -> None:
        self._profiles: dict[str, DescriptorProfile] = {}
        for profile in profiles:
            if profile.entity_id in self._profiles:
                raise ValidationError(f"duplicate entity_id {profile.entity_id!r}")
            self._profiles[profile.entity_id] = profile
        self._buckets: dict[tuple[str, str, str], set[str]] = {}
        for profile in profiles:
            for attr, value in profile.attributes.items():
                key = (profile.entity_class.value, attr, value)
                self._buckets.setdefault(key, set()).add(profile.entity_id)
        self._card_links: dict[str, tuple[str, ...]] = {
            p.entity_id: _link_cards(p, cards) for p in profiles
        }

    def __len__(self) -> int:
        return len(self._profiles)

    def profiles(self) -> list[DescriptorProfile]:
        return [self._profiles[eid] for eid in sorted(self._profiles)]

    def get(self, entity_id: str) -> DescriptorProfile:
        try:
            return self._profiles[entity_id]
        except KeyError:
            raise ValidationError(f"unknown entity_id {entity_id!r}") from None

    def bucket(self, entity_class: EntityCategory, attribute: str, value: str) -> set[str]:
        return set(self._buckets.get((entity_class.value, attribute, value), set()))

    def card_links(self, entity_id: str) -> tuple[str, ...]:
        return self._card_links.get(entity_id, ())


def _link_cards(profile: DescriptorProfile, cards: Sequence[EventCard]) -> tuple[str, ...]:
    links = []
    for card in cards:
        for session_id, start_ms, end_ms in profile.track_spans:
            if card.session_id == session_id and overlap_ms(
                card.span[0], card.span[1], start_ms, end_ms
            ) > 0:
                links.append(card.card_id)
                break
    return tuple(sorted(set(links)))


def build_index(
    profiles: Sequence[DescriptorProfile], cards: Sequence[EventCard] = ()
) -> DescriptorIndex:
    return DescriptorIndex(profiles, cards)


def _passes_filters(profile: DescriptorProfile, q: DescriptorQuery) -> bool:
    if profile.entity_class != q.entity_class:
        return False
    if q.sessions is not None and not (set(profile.sessions) & q.sessions):
        return False
    if q.time_range is not None:
        lo, hi = q.time_range
        if not lo <= profile.first_seen_ms < hi:
            return False
    for attr, banned in q.exclude.items():
        if profile.attributes.get(attr) in banned:
            return False
    return True


def _matched_attributes(profile: DescriptorProfile, q: DescriptorQuery) -> list[str]:
    matched = []
    for attr, wanted in sorted(q.include.items()):
        value = profile.attributes.get(attr)
        if value is not None and value not in FALLBACKS and value in wanted:
            matched.append(attr)
    return matched


def query(q: DescriptorQuery, index: DescriptorIndex) -> list[EntityMatch]:
    """Ranked matches for a descriptor query.

    Results are exactly the profiles of the query's class that violate no
    exclude constraint and match at least one include attribute, ordered by
    (score desc, first seen asc, entity id asc) — a deterministic total
    order.
    """
    if not q.include and not q.exclude:
        raise ValidationError("unconstrained query: no include or exclude constraints")
    matches: list[EntityMatch] = []
    for profile in index.profiles():
        if not _passes_filters(profile, q):
            continue
        matched = _matched_attributes(profile, q)
        if not matched:
            continue
        matches.append(
            EntityMatch(
                profile=profile,
                score=len(matched) / len(q.include),
                matched_attributes=tuple(matched),
                first_seen=(profile.first_seen_session, profile.first_seen_ms),
                card_links=index.card_links(profile.entity_id),
            )
        )
    matches.sort(
        key=lambda m: (
            -m.score,
            m.first_seen[1],
            m.first_seen[0],
            m.profile.entity_id,
        )
    )
    return matches


def find_similar(entity_id: str, index: DescriptorIndex) -> list[EntityMatch]:
    """Entities sharing the given entity's non-fallback descriptor values."""
    anchor = index.get(entity_id)
    include = {
        attr: frozenset({value})
        for attr, value in sorted(anchor.attributes.items())
        if value not in FALLBACKS
    }
    q = DescriptorQuery(entity_class=anchor.entity_class, include=include)
    return [m for m in query(q, index) if m.profile.entity_id != entity_id]
