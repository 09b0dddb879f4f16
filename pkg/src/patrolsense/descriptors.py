"""Appearance descriptors for tracked entities: extraction, binary
verification, and trajectory merging.

Attributes come from structured option queries on the first-appearance crop,
then every non-fallback answer is re-checked as a yes/no question on the
representative (largest-box) crop; rejected answers drop to "other".
Fragmented tracks of one entity are re-joined when they share the class and
key descriptors and a contrastive similarity strictly above 0.95, with
attribute conflicts settled by majority vote (ties stay "unclear").
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .errors import ProviderError, ValidationError
from .ingest import FrameRecord
from .providers import (
    FALLBACK_OTHER,
    FALLBACK_UNCLEAR,
    AttributeDescriber,
    AttributeQuestion,
    SimilarityScorer,
)
from .taxonomy import EntityCategory

MERGE_THRESHOLD = 0.95

# Descriptors that gate trajectory merging, per entity class.
MERGE_KEYS = {
    EntityCategory.Person: ("shirt_color", "pants_color"),
    EntityCategory.Vehicle: ("body_color",),
}

REQUIRED_ATTRIBUTES = {
    EntityCategory.Person: ("shirt_color", "pants_color"),
    EntityCategory.Vehicle: ("body_color", "vehicle_type"),
}

FALLBACKS = frozenset({FALLBACK_OTHER, FALLBACK_UNCLEAR})


@dataclass(frozen=True)
class TrackObservation:
    frame_index: int
    t_ms: int
    bbox: tuple[float, float, float, float]
    crop_uri: Optional[str] = None

    @property
    def area(self) -> float:
        x1, y1, x2, y2 = self.bbox
        return (x2 - x1) * (y2 - y1)


@dataclass(frozen=True)
class Track:
    """Time-ordered detections of one entity under a stable track id."""

    track_id: str
    session_id: str
    entity_class: EntityCategory
    observations: tuple[TrackObservation, ...]

    @property
    def first_seen_ms(self) -> int:
        return self.observations[0].t_ms

    @property
    def span(self) -> tuple[int, int]:
        return (self.observations[0].t_ms, self.observations[-1].t_ms + 1)


def collect_tracks(session_id: str, frames: Iterable[FrameRecord]) -> list[Track]:
    """Group frame detections by track id, preserving time order.

    A track's class comes from its first detection; the replay tracker is
    expected to keep classes stable per id.
    """
    obs: dict[str, list[TrackObservation]] = {}
    classes: dict[str, EntityCategory] = {}
    for frame in frames:
        for det in frame.detections:
            classes.setdefault(det.track_id, det.class_label)
            obs.setdefault(det.track_id, []).append(
                TrackObservation(
                    frame_index=frame.frame_index,
                    t_ms=frame.t_ms,
                    bbox=det.bbox,
                    crop_uri=det.crop_uri,
                )
            )
    return [
        Track(
            track_id=tid,
            session_id=session_id,
            entity_class=classes[tid],
            observations=tuple(observations),
        )
        for tid, observations in sorted(obs.items())
    ]


@dataclass(frozen=True)
class DescriptorProfile:
    """Verified appearance attributes of one entity across its trajectory."""

    entity_id: str
    entity_class: EntityCategory
    attributes: dict[str, str]
    representative_crop: str
    representative_area: float
    first_seen_session: str
    first_seen_ms: int
    sessions: tuple[str, ...]
    track_ids: tuple[str, ...]
    track_spans: tuple[tuple[str, int, int], ...] = ()
    flags: tuple[str, ...] = ()
    verified: bool = False

    def to_dict(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "entity_class": self.entity_class.value,
            "attributes": dict(sorted(self.attributes.items())),
            "representative_crop": self.representative_crop,
            "representative_area": self.representative_area,
            "first_seen_session": self.first_seen_session,
            "first_seen_ms": self.first_seen_ms,
            "sessions": list(self.sessions),
            "track_ids": list(self.track_ids),
            "track_spans": [list(s) for s in self.track_spans],
            "flags": list(self.flags),
            "verified": self.verified,
        }


def profile_from_dict(raw: dict) -> DescriptorProfile:
    return DescriptorProfile(
        entity_id=str(raw["entity_id"]),
        entity_class=EntityCategory.from_name(str(raw["entity_class"])),
        attributes={str(k): str(v) for k, v in raw.get("attributes", {}).items()},
        representative_crop=str(raw["representative_crop"]),
        representative_area=float(raw.get("representative_area", 0.0)),
        first_seen_session=str(raw["first_seen_session"]),
        first_seen_ms=int(raw["first_seen_ms"]),
        sessions=tuple(str(s) for s in raw.get("sessions", [])),
        track_ids=tuple(str(t) for t in raw.get("track_ids", [])),
        track_spans=tuple(
            (str(s[0]), int(s[1]), int(s[2])) for s in raw.get("track_spans", [])
        ),
        flags=tuple(str(f) for f in raw.get("flags", [])),
        verified=bool(raw.get("verified", False)),
    )


@dataclass(frozen=True)
class MergeDecision:
    a: str
    b: str
    similarity: float
    merged: bool

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "similarity": self.similarity, "merged": self.merged}


def load_question_sets(path: Optional[Union[str, Path]] = None) -> dict[EntityCategory, list[AttributeQuestion]]:
    """Attribute question sets per entity class, from the versioned config."""
    if path is None:
        text = resources.files("patrolsense").joinpath("assets/questions.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    doc = json.loads(text)
    result: dict[EntityCategory, list[AttributeQuestion]] = {}
    for class_name, category in (("person", EntityCategory.Person), ("vehicle", EntityCategory.Vehicle)):
        questions = []
        for q in doc.get(class_name, []):
            questions.append(
                AttributeQuestion(
                    question_id=str(q["question_id"]),
                    attribute=str(q["attribute"]),
                    options=tuple(q.get("options", [])),
                    binary_value=q.get("binary_value"),
                )
            )
        if not questions:
            raise ValidationError(f"question set for {class_name} is empty")
        result[category] = questions
    return result


def _first_crop(track: Track) -> TrackObservation:
    for ob in track.observations:
        if ob.crop_uri:
            return ob
    raise ValidationError(f"track {track.track_id}: no crop available")


def _representative(track: Track) -> TrackObservation:
    with_crop = [ob for ob in track.observations if ob.crop_uri]
    if not with_crop:
        raise ValidationError(f"track {track.track_id}: no crop available")
    return max(with_crop, key=lambda ob: (ob.area, -ob.t_ms))


def extract_profile(
    track: Track,
    describer: AttributeDescriber,
    question_sets: Optional[dict[EntityCategory, list[AttributeQuestion]]] = None,
) -> DescriptorProfile:
    """Ask the class's option questions on the first-appearance crop."""
    if track.entity_class not in (EntityCategory.Person, EntityCategory.Vehicle):
        raise ValidationError(f"track {track.track_id}: no descriptor set for class Other")
    questions = (question_sets or load_question_sets())[track.entity_class]
    first = _first_crop(track)
    rep = _representative(track)
    answers = describer.describe_attributes(first.crop_uri, track.entity_class.value, questions)
    if len(answers) != len(questions):
        raise ValidationError(
            f"track {track.track_id}: expected {len(questions)} answers, got {len(answers)}"
        )
    attributes = {
        q.attribute: a.answer if a.answer else FALLBACK_UNCLEAR
        for q, a in zip(questions, answers)
    }
    missing = [r for r in REQUIRED_ATTRIBUTES[track.entity_class] if r not in attributes]
    if missing:
        raise ValidationError(
            f"question set for {track.entity_class.value} lacks required attributes {missing}"
        )
    return DescriptorProfile(
        entity_id=f"{track.session_id}:{track.track_id}",
        entity_class=track.entity_class,
        attributes=attributes,
        representative_crop=rep.crop_uri,  # type: ignore[arg-type]
        representative_area=rep.area,
        first_seen_session=track.session_id,
        first_seen_ms=track.first_seen_ms,
        sessions=(track.session_id,),
        track_ids=(track.track_id,),
        track_spans=((track.session_id, track.span[0], track.span[1]),),
    )


def _binary_question(attribute: str, value: str) -> AttributeQuestion:
    return AttributeQuestion(
        question_id=f"verify.{attribute}", attribute=attribute, binary_value=value
    )


def verify_profile(profile: DescriptorProfile, describer: AttributeDescriber) -> DescriptorProfile:
    """Second, yes/no round on the representative crop.

    "no" demotes the attribute to "other"; fallback values pass through
    without a call; a provider failure demotes to "unclear" and flags the
    attribute rather than failing the whole profile.
    """
    attributes = dict(profile.attributes)
    flags = list(profile.flags)
    for attribute in sorted(attributes):
        value = attributes[attribute]
        if value in FALLBACKS:
            continue
        question = _binary_question(attribute, value)
        try:
            answer = describer.describe_attributes(
                profile.representative_crop, profile.entity_class.value, [question]
            )[0].answer
        except ProviderError:
            attributes[attribute] = FALLBACK_UNCLEAR
            flags.append(f"verify_failed:{attribute}")
            continue
        if answer == "no":
            attributes[attribute] = FALLBACK_OTHER
        elif answer == FALLBACK_UNCLEAR:
            attributes[attribute] = FALLBACK_UNCLEAR
    return replace(profile, attributes=attributes, flags=tuple(flags), verified=True)


def resolve_by_majority(values: Sequence[str]) -> str:
    """Strict-majority winner, or "unclear" on a tie."""
    if not values:
        raise ValidationError("majority vote over empty values")
    counts = Counter(values)
    ranked = counts.most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return FALLBACK_UNCLEAR
    return ranked[0][0]


def _merge_candidates(a: DescriptorProfile, b: DescriptorProfile) -> bool:
    if a.entity_class != b.entity_class:
        return False
    keys = MERGE_KEYS.get(a.entity_class, ())
    if not keys:
        return False
    for key in keys:
        va, vb = a.attributes.get(key), b.attributes.get(key)
        if va is None or vb is None or va in FALLBACKS or vb in FALLBACKS or va != vb:
            return False
    return True


def merge_trajectories(
    profiles: Sequence[DescriptorProfile],
    scorer: SimilarityScorer,
    threshold: float = MERGE_THRESHOLD,
) -> tuple[list[DescriptorProfile], list[MergeDecision]]:
    """Re-join fragmented trajectories of the same entity.

    Candidate pairs share class and non-fallback key descriptors; a pair
    merges only when similarity strictly exceeds the threshold. Connected
    components under merge edges collapse into one profile (transitive
    closure is the minimal consistent completion; every pairwise decision is
    returned for audit). Output partitions the input and is invariant under
    input permutation.
    """
    ordered = sorted(profiles, key=lambda p: p.entity_id)
    ids = [p.entity_id for p in ordered]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate entity_id among profiles")
    parent = {pid: pid for pid in ids}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x: str, y: str) -> None:
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[max(rx, ry)] = min(rx, ry)

    decisions: list[MergeDecision] = []
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if not _merge_candidates(a, b):
                continue
            score = scorer.similarity(a.representative_crop, b.representative_crop)
            merged = score > threshold
            decisions.append(
                MergeDecision(a=a.entity_id, b=b.entity_id, similarity=score, merged=merged)
            )
            if merged:
                union(a.entity_id, b.entity_id)

    groups: dict[str, list[DescriptorProfile]] = {}
    for p in ordered:
        groups.setdefault(find(p.entity_id), []).append(p)
    merged_profiles = [
        _collapse_profiles(members) for _, members in sorted(groups.items())
    ]
    return merged_profiles, decisions


def _collapse_profiles(members: list[DescriptorProfile]) -> DescriptorProfile:
    if len(members) == 1:
        return members[0]
    members = sorted(members, key=lambda p: p.entity_id)
    attribute_names = sorted({name for p in members for name in p.attributes})
    attributes = {
        name: resolve_by_majority(
            [p.attributes[name] for p in members if name in p.attributes]
        )
        for name in attribute_names
    }
    rep = max(members, key=lambda p: (p.representative_area, p.entity_id))
    first = min(members, key=lambda p: (p.first_seen_ms, p.first_seen_session))
    return DescriptorProfile(
        entity_id=members[0].entity_id,
        entity_class=members[0].entity_class,
        attributes=attributes,
        representative_crop=rep.representative_crop,
        representative_area=rep.representative_area,
        first_seen_session=first.first_seen_session,
        first_seen_ms=first.first_seen_ms,
        sessions=tuple(sorted({s for p in members for s in p.sessions})),
        track_ids=tuple(sorted({t for p in members for t in p.track_ids})),
        track_spans=tuple(sorted({s for p in members for s in p.track_spans})),
        flags=tuple(sorted({f for p in members for f in p.flags})),
        verified=all(p.verified for p in members),
    )


def write_profiles_jsonl(profiles: Iterable[DescriptorProfile], path: Union[str, Path]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for profile in profiles:
            handle.write(json.dumps(profile.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")
            count += 1
    return count


def read_profiles_jsonl(path: Union[str, Path]) -> list[DescriptorProfile]:
    profiles = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                profiles.append(profile_from_dict(json.loads(line)))
    return profiles


def write_merge_audit(decisions: Iterable[MergeDecision], path: Union[str, Path]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for decision in decisions:
            handle.write(json.dumps(decision.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")
            count += 1
    return count
