"""Per-video analysis: segmentation, object-aware annotation, reasoning, and
event-card assembly.

A session is cut into short overlapping windows (default 10 s window / 8 s
stride); each window's annotated frames go to the segment reasoner, whose
proposals become Event Cards. Cards carrying the same event type in
overlapping consecutive windows are merged so one incident is reported once.
The whole run is deterministic regardless of worker count: results are
reduced in segment order and sorted before return.
"""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, Union

from .errors import ContractViolationError, ProviderError, ValidationError
from .ingest import FrameRecord, PatrolSession, interpolate_pose
from .providers import (
    Confidence,
    ProviderBundle,
    RawEventProposal,
    ReasonerRequest,
    call_with_retry,
)
from .segments import SegmentSpan, overlap_ms, segment_video
from .taxonomy import EoiType, PriorityLevel, Taxonomy, classify_label, priority_of

__all__ = [
    "SegmentSpan",
    "segment_video",
    "ObjectAwareFrame",
    "EventCard",
    "CardStatus",
    "PipelineConfig",
    "SessionAnalysis",
    "SegmentFailure",
    "annotate_frames",
    "select_keyframe",
    "build_event_card",
    "analyze_session",
    "load_persona_prompt",
    "write_cards_jsonl",
    "read_cards_jsonl",
]


class CardStatus(Enum):
    New = "New"
    Reviewed = "Reviewed"
    Saved = "Saved"
    Shared = "Shared"

    @classmethod
    def from_name(cls, name: str) -> "CardStatus":
        try:
            return cls[name.strip().capitalize()]
        except KeyError:
            raise ValidationError(f"unknown card status {name!r}") from None


@dataclass(frozen=True)
class ObjectAwareFrame:
    frame: FrameRecord
    distinct_track_count: int


@dataclass(frozen=True)
class EventCard:
    """One detected event, fully explainable: what, when, where, and why."""

    card_id: str
    session_id: str
    robot_id: str
    label_text: str
    eoi: Optional[EoiType]
    priority: Optional[PriorityLevel]
    description: str
    rationale: str
    confidence: Confidence
    span: tuple[int, int]
    keyframe: tuple[int, int]  # (frame_index, t_ms)
    pose: tuple[float, float]  # (lat, lon)
    status: CardStatus = CardStatus.New
    created_at: Optional[datetime] = None

    @property
    def unmatched(self) -> bool:
        return self.eoi is None

    def to_dict(self) -> dict:
        return {
            "card_id": self.card_id,
            "session_id": self.session_id,
            "robot_id": self.robot_id,
            "label_text": self.label_text,
            "eoi_id": self.eoi.id if self.eoi else None,
            "eoi_name": self.eoi.name if self.eoi else None,
            "priority": self.priority.name if self.priority is not None else None,
            "description": self.description,
            "rationale": self.rationale,
            "confidence": self.confidence.value,
            "span": {"start_ms": self.span[0], "end_ms": self.span[1]},
            "keyframe": {"frame_index": self.keyframe[0], "t_ms": self.keyframe[1]},
            "pose": {"lat": self.pose[0], "lon": self.pose[1]},
            "status": self.status.value,
            "created_at": self.created_at.isoformat().replace("+00:00", "Z")
            if self.created_at
            else None,
        }


def card_from_dict(raw: dict, taxonomy: Taxonomy) -> EventCard:
    eoi = taxonomy.by_id(int(raw["eoi_id"])) if raw.get("eoi_id") else None
    created = raw.get("created_at")
    return EventCard(
        card_id=str(raw["card_id"]),
        session_id=str(raw["session_id"]),
        robot_id=str(raw["robot_id"]),
        label_text=str(raw["label_text"]),
        eoi=eoi,
        priority=eoi.priority if eoi else None,
        description=str(raw.get("description", "")),
        rationale=str(raw.get("rationale", "")),
        confidence=Confidence.from_name(str(raw["confidence"])),
        span=(int(raw["span"]["start_ms"]), int(raw["span"]["end_ms"])),
        keyframe=(int(raw["keyframe"]["frame_index"]), int(raw["keyframe"]["t_ms"])),
        pose=(float(raw["pose"]["lat"]), float(raw["pose"]["lon"])),
        status=CardStatus.from_name(str(raw.get("status", "New"))),
        created_at=datetime.fromisoformat(created.replace("Z", "+00:00")) if created else None,
    )


@dataclass(frozen=True)
class PipelineConfig:
    """Analysis knobs; the on-disk config file mirrors these field names."""

    analysis_window_ms: int = 10_000
    analysis_stride_ms: int = 8_000
    min_tail_ms: int = 5_000
    frame_sample_hz: float = 1.0
    provider_mode: str = "mock"
    max_inflight: int = 4
    temperature: float = 1.0
    retries: int = 2

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}  # noqa: C401
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown pipeline config keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class SegmentFailure:
    span: SegmentSpan
    error: str

    def to_dict(self) -> dict:
        return {"span": self.span.to_dict(), "error": self.error}


@dataclass(frozen=True)
class SessionAnalysis:
    session_id: str
    cards: tuple[EventCard, ...]
    failures: tuple[SegmentFailure, ...] = ()

    @property
    def failed_spans(self) -> list[tuple[int, int]]:
        return [(f.span.start_ms, f.span.end_ms) for f in self.failures]


def load_persona_prompt() -> str:
    return resources.files("patrolsense").joinpath("assets/persona.txt").read_text(encoding="utf-8")


def annotate_frames(frames: Iterable[FrameRecord]) -> Iterator[ObjectAwareFrame]:
    """Enrich each frame with its distinct-track count, order preserved."""
    for frame in frames:
        count = len({d.track_id for d in frame.detections})
        yield ObjectAwareFrame(frame=frame, distinct_track_count=count)


def select_keyframe(span: SegmentSpan, frames: Sequence[ObjectAwareFrame]) -> FrameRecord:
    """The clearest snapshot of a span: most distinct tracked objects wins.

    Ties go to the earliest t_ms (then lowest frame_index, for equal
    timestamps).
    """
    in_span = [f for f in frames if span.contains(f.frame.t_ms)]
    if not in_span:
        raise ValidationError(
            f"empty segment: no frames in [{span.start_ms}, {span.end_ms})"
        )
    best = min(
        in_span,
        key=lambda f: (-f.distinct_track_count, f.frame.t_ms, f.frame.frame_index),
    )
    return best.frame


def _card_id(session_id: str, span: tuple[int, int], label_text: str) -> str:
    digest = hashlib.sha256(
        f"{session_id}|{span[0]}|{span[1]}|{label_text}".encode("utf-8")
    ).hexdigest()
    return digest[:16]


def _clamp_span(claimed: Optional[tuple[int, int]], segment: SegmentSpan) -> tuple[int, int]:
    # Reasoner time claims are never trusted beyond the evidence window.
    if claimed is None:
        return (segment.start_ms, segment.end_ms)
    start = max(int(claimed[0]), segment.start_ms)
    end = min(int(claimed[1]), segment.end_ms)
    if start >= end:
        return (segment.start_ms, segment.end_ms)
    return (start, end)


def _created_at(session: PatrolSession, start_ms: int) -> datetime:
    # Wall-clock time of the event start; deterministic across runs.
    return (session.start_wall_clock + timedelta(milliseconds=start_ms)).astimezone(timezone.utc)


def build_event_card(
    proposal: RawEventProposal,
    span: SegmentSpan,
    session: PatrolSession,
    frames: Sequence[ObjectAwareFrame],
    taxonomy: Taxonomy,
) -> EventCard:
    """Assemble one Event Card from a reasoner proposal."""
    eoi = classify_label(proposal.label_text, taxonomy)
    card_span = _clamp_span(proposal.claimed_span, span)
    key = select_keyframe(
        SegmentSpan(index=span.index, start_ms=card_span[0], end_ms=card_span[1]), frames
    )
    pose = interpolate_pose(session, card_span[0])
    return EventCard(
        card_id=_card_id(session.session_id, card_span, proposal.label_text),
        session_id=session.session_id,
        robot_id=session.robot_id,
        label_text=proposal.label_text,
        eoi=eoi,
        priority=priority_of(eoi) if eoi else None,
        description=proposal.description,
        rationale=proposal.rationale,
        confidence=proposal.confidence,
        span=card_span,
        keyframe=(key.frame_index, key.t_ms),
        pose=pose,
        status=CardStatus.New,
        created_at=_created_at(session, card_span[0]),
    )


def _sample_frames(
    frames: Sequence[ObjectAwareFrame], span: SegmentSpan, sample_hz: float
) -> list[ObjectAwareFrame]:
    if sample_hz <= 0:
        raise ValidationError(f"frame_sample_hz must be > 0, got {sample_hz}")
    period_ms = max(1, round(1000.0 / sample_hz))
    sampled: list[ObjectAwareFrame] = []
    next_due = span.start_ms
    for f in frames:
        if not span.contains(f.frame.t_ms):
            continue
        if f.frame.t_ms >= next_due:
            sampled.append(f)
            next_due = f.frame.t_ms + period_ms
    return sampled


@dataclass
class _SegmentOutcome:
    span: SegmentSpan
    proposals: list[RawEventProposal] = field(default_factory=list)
    error: Optional[str] = None


def _reason_one_segment(
    session: PatrolSession,
    span: SegmentSpan,
    frames: Sequence[ObjectAwareFrame],
    providers: ProviderBundle,
    config: PipelineConfig,
    persona: str,
    digest: str,
) -> _SegmentOutcome:
    sampled = _sample_frames(frames, span, config.frame_sample_hz)
    if not sampled:
        # Nothing to show the reasoner; the segment is vacuously normal.
        return _SegmentOutcome(span=span)
    request = ReasonerRequest(
        session_id=session.session_id,
        persona_prompt=persona,
        taxonomy_digest=digest,
        segment_span=span,
        annotated_frames=tuple(sampled),
        generation_params={"temperature": config.temperature},
    )
    try:
        proposals = call_with_retry(
            providers.reasoner.reason_segment, request, retries=config.retries
        )
    except ContractViolationError:
        raise
    except ProviderError as exc:
        return _SegmentOutcome(span=span, error=str(exc))
    if len(proposals) > len(sampled):
        raise ContractViolationError(
            f"segment {span.index}: {len(proposals)} proposals for {len(sampled)} frames"
        )
    return _SegmentOutcome(span=span, proposals=list(proposals))


def _eoi_key(card: EventCard) -> tuple:
    if card.eoi is not None:
        return ("eoi", card.eoi.id)
    return ("unmatched", card.label_text.strip().lower())


@dataclass
class _MergeGroup:
    key: tuple
    last_segment: SegmentSpan
    cards: list[tuple[SegmentSpan, EventCard]]


def _merge_duplicate_cards(
    per_segment: list[tuple[SegmentSpan, EventCard]],
    session: PatrolSession,
    frames: Sequence[ObjectAwareFrame],
) -> list[EventCard]:
    """Collapse same-event cards from overlapping consecutive segments.

    Overlapping windows would otherwise double-report one incident. The
    merged card spans the union, keeps the highest confidence, and
    concatenates descriptions with their source windows for provenance.
    """
    open_groups: dict[tuple, _MergeGroup] = {}
    merged: list[EventCard] = []

    def close(group: _MergeGroup) -> None:
        merged.append(_collapse_group(group, session, frames))

    for span, card in per_segment:
        key = _eoi_key(card)
        group = open_groups.get(key)
        if group is not None:
            prev = group.last_segment
            consecutive = span.index <= prev.index + 1
            overlapping = overlap_ms(prev.start_ms, prev.end_ms, span.start_ms, span.end_ms) > 0
            if consecutive and overlapping:
                group.cards.append((span, card))
                group.last_segment = span
                continue
            close(group)
            del open_groups[key]
        open_groups[key] = _MergeGroup(key=key, last_segment=span, cards=[(span, card)])

    for key in sorted(open_groups, key=lambda k: open_groups[k].cards[0][1].span):
        close(open_groups[key])
    return merged


def _collapse_group(
    group: _MergeGroup, session: PatrolSession, frames: Sequence[ObjectAwareFrame]
) -> EventCard:
    spans = [card.span for _, card in group.cards]
    if len(group.cards) == 1:
        return group.cards[0][1]
    union = (min(s[0] for s in spans), max(s[1] for s in spans))
    members = [card for _, card in group.cards]
    best = max(members, key=lambda c: c.confidence.rank)
    parts = []
    for _, card in group.cards:
        start_s, end_s = card.span[0] / 1000.0, card.span[1] / 1000.0
        parts.append(f"[{start_s:g}-{end_s:g}s] {card.description}")
    key = select_keyframe(SegmentSpan(index=-1, start_ms=union[0], end_ms=union[1]), frames)
    pose = interpolate_pose(session, union[0])
    first = members[0]
    return replace(
        first,
        card_id=_card_id(session.session_id, union, first.label_text),
        description="\n".join(parts),
        rationale=best.rationale,
        confidence=best.confidence,
        span=union,
        keyframe=(key.frame_index, key.t_ms),
        pose=pose,
        created_at=_created_at(session, union[0]),
    )


def analyze_session(
    session: PatrolSession,
    providers: ProviderBundle,
    config: PipelineConfig,
    frames: Iterable[FrameRecord],
    taxonomy: Taxonomy,
    persona_prompt: Optional[str] = None,
) -> SessionAnalysis:
    """Run the full per-video pipeline and return merged, ordered Event Cards.

    Segments run concurrently up to ``config.max_inflight`` workers; card
    assembly and duplicate merging happen as one ordered reduction, so output
    is byte-identical whatever the parallelism. Provider failures that
    survive the retry budget mark their segment analysis-failed (reported,
    distinct from normal) without sinking the rest of the session.
    """
    persona = persona_prompt if persona_prompt is not None else load_persona_prompt()
    digest = taxonomy.digest()
    tracked = providers.detector.detect_and_track(frames)
    annotated = list(annotate_frames(tracked))
    spans = segment_video(
        session.duration_ms,
        config.analysis_window_ms,
        config.analysis_stride_ms,
        config.min_tail_ms,
    )

    def work(span: SegmentSpan) -> _SegmentOutcome:
        return _reason_one_segment(session, span, annotated, providers, config, persona, digest)

    workers = max(1, config.max_inflight)
    if workers == 1:
        outcomes = [work(span) for span in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(work, spans))

    failures: list[SegmentFailure] = []
    per_segment: list[tuple[SegmentSpan, EventCard]] = []
    for outcome in outcomes:
        if outcome.error is not None:
            failures.append(SegmentFailure(span=outcome.span, error=outcome.error))
            continue
        for proposal in outcome.proposals:
            card = build_event_card(proposal, outcome.span, session, annotated, taxonomy)
            per_segment.append((outcome.span, card))

    cards = _merge_duplicate_cards(per_segment, session, annotated)
    cards.sort(key=lambda c: (c.span[0], c.card_id))
    return SessionAnalysis(
        session_id=session.session_id, cards=tuple(cards), failures=tuple(failures)
    )


def canonical_json(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_cards_jsonl(cards: Iterable[EventCard], path: Union[str, Path]) -> int:
    """Persist cards one canonical JSON object per line; returns the count."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for card in cards:
            handle.write(canonical_json(card.to_dict()) + "\n")
            count += 1
    return count


def read_cards_jsonl(path: Union[str, Path], taxonomy: Taxonomy) -> list[EventCard]:
    cards = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                cards.append(card_from_dict(json.loads(line), taxonomy))
    return cards
