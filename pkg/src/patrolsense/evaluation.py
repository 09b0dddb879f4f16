"""Segment-level detection quality: protocol segmentation, annotator truth,
prediction assignment, confusion counts, and precision/recall/F1 by period.

Every video is cut into 30 s windows starting every 25 s (5 s overlap). A
segment is truth-abnormal when at least 2 of 3 annotators marked a taxonomy
event visible in it, and predicted-abnormal when a classified Event Card
covers enough of it; at most one predicted label survives per segment.
Metrics use P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R), with 0/0 -> 0.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

from .errors import ValidationError
from .ingest import GroundTruthEvent, PatrolSession, Period
from .pipeline import EventCard
from .segments import SegmentSpan, overlap_ms, segment_video

PROTOCOL_WINDOW_MS = 30_000
PROTOCOL_STRIDE_MS = 25_000
# A trailing window no longer than the overlap is entirely contained in the
# previous window; it adds no new footage and is not scored.
DEFAULT_MIN_TAIL_MS = PROTOCOL_WINDOW_MS - PROTOCOL_STRIDE_MS + 1
ANNOTATOR_COUNT = 3
MAJORITY = 2
ASSIGNMENT_MIN_OVERLAP = 0.5


class SegmentLabel(Enum):
    Normal = "Normal"
    Abnormal = "Abnormal"


@dataclass(frozen=True)
class EvalConfig:
    """Protocol parameters; overriding window/stride requires the explicit
    non_standard flag so accidental drift can't masquerade as the protocol."""

    window_ms: int = PROTOCOL_WINDOW_MS
    stride_ms: int = PROTOCOL_STRIDE_MS
    min_tail_ms: int = DEFAULT_MIN_TAIL_MS
    non_standard: bool = False

    def __post_init__(self) -> None:
        standard = (
            self.window_ms == PROTOCOL_WINDOW_MS and self.stride_ms == PROTOCOL_STRIDE_MS
        )
        if not standard and not self.non_standard:
            raise ValidationError(
                "window/stride differ from the protocol values; set non_standard=True to override"
            )


@dataclass(frozen=True)
class EvalSegment:
    session_id: str
    span: SegmentSpan
    truth: Optional[SegmentLabel] = None
    predicted: Optional[SegmentLabel] = None
    predicted_label: Optional[str] = None
    analysis_failed: bool = False

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "span": self.span.to_dict(),
            "truth": self.truth.value if self.truth else None,
            "predicted": self.predicted.value if self.predicted else None,
            "predicted_label": self.predicted_label,
            "analysis_failed": self.analysis_failed,
        }


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValidationError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            tn=self.tn + other.tn,
            fn=self.fn + other.fn,
        )


@dataclass(frozen=True)
class MetricsReport:
    period: str  # Day | Night | Overall
    videos: int
    duration_min: float
    normal: int
    abnormal: int
    cm: ConfusionMatrix
    precision: float
    recall: float
    f1: float
    analysis_failed: int = 0
    unmatched_cards: int = 0
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "period": self.period,
            "videos": self.videos,
            "duration_min": self.duration_min,
            "normal": self.normal,
            "abnormal": self.abnormal,
            "tp": self.cm.tp,
            "fp": self.cm.fp,
            "tn": self.cm.tn,
            "fn": self.cm.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "analysis_failed": self.analysis_failed,
            "unmatched_cards": self.unmatched_cards,
            "warnings": list(self.warnings),
        }


def make_eval_segments(
    session: PatrolSession, config: Optional[EvalConfig] = None
) -> list[EvalSegment]:
    """Protocol windows for one session, unlabeled."""
    config = config or EvalConfig()
    spans = segment_video(
        session.duration_ms, config.window_ms, config.stride_ms, config.min_tail_ms
    )
    return [EvalSegment(session_id=session.session_id, span=span) for span in spans]


def truth_label(
    segment: EvalSegment, annotations: Sequence[bool]
) -> SegmentLabel:
    """Strict 2-of-3 agreement: abnormal only when a majority saw an event."""
    if len(annotations) != ANNOTATOR_COUNT:
        raise ValidationError(
            f"expected {ANNOTATOR_COUNT} annotator votes, got {len(annotations)}"
        )
    votes = sum(1 for a in annotations if a)
    return SegmentLabel.Abnormal if votes >= MAJORITY else SegmentLabel.Normal


def segment_votes(
    segment: EvalSegment, events: Sequence[GroundTruthEvent]
) -> tuple[bool, bool, bool]:
    """Per-annotator votes for one segment from overlapping truth events.

    An annotator votes "visible" when any event they endorsed overlaps the
    segment; events without explicit vote columns count as unanimous.
    """
    votes = [False, False, False]
    for event in events:
        if event.session_id != segment.session_id:
            continue
        if overlap_ms(event.start_ms, event.end_ms, segment.span.start_ms, segment.span.end_ms) <= 0:
            continue
        event_votes = event.annotator_votes or (True, True, True)
        for i in range(ANNOTATOR_COUNT):
            votes[i] = votes[i] or event_votes[i]
    return tuple(votes)  # type: ignore[return-value]


def apply_truth(
    segments: Sequence[EvalSegment], events: Sequence[GroundTruthEvent]
) -> list[EvalSegment]:
    return [
        replace(seg, truth=truth_label(seg, segment_votes(seg, events)))
        for seg in segments
    ]


def _confidence_rank(card: EventCard) -> int:
    return card.confidence.rank


def assign_predictions(
    cards: Sequence[EventCard],
    segments: Sequence[EvalSegment],
    failed_spans: Sequence[tuple[int, int]] = (),
) -> list[EvalSegment]:
    """Map continuous card spans onto protocol segments.

    A card counts toward a segment when their overlap covers at least half of
    the shorter of (card span, segment span). When several cards hit one
    segment the highest priority wins, then highest confidence, then earliest
    start — at most one label survives. Cards whose label missed the taxonomy
    predict nothing (they are tallied separately, never as abnormal), and
    analysis-failed segments score Normal but carry the failure flag.
    """
    session_ids = {seg.session_id for seg in segments}
    for card in cards:
        if card.session_id not in session_ids:
            raise ValidationError(
                f"card {card.card_id} session {card.session_id!r} not among evaluated segments"
            )
    classified = [c for c in cards if c.eoi is not None]
    out: list[EvalSegment] = []
    for seg in segments:
        hits = []
        for card in classified:
            if card.session_id != seg.session_id:
                continue
            shorter = min(card.span[1] - card.span[0], seg.span.length_ms)
            overlap = overlap_ms(card.span[0], card.span[1], seg.span.start_ms, seg.span.end_ms)
            if shorter > 0 and overlap >= ASSIGNMENT_MIN_OVERLAP * shorter:
                hits.append(card)
        failed = any(
            overlap_ms(lo, hi, seg.span.start_ms, seg.span.end_ms) > 0 for lo, hi in failed_spans
        )
        if hits:
            best = min(
                hits,
                key=lambda c: (c.priority.value, -c.confidence.rank, c.span[0], c.card_id),
            )
            out.append(
                replace(
                    seg,
                    predicted=SegmentLabel.Abnormal,
                    predicted_label=best.eoi.name,  # type: ignore[union-attr]
                    analysis_failed=failed,
                )
            )
        else:
            out.append(
                replace(seg, predicted=SegmentLabel.Normal, predicted_label=None, analysis_failed=failed)
            )
    return out


def confusion(segments: Sequence[EvalSegment]) -> ConfusionMatrix:
    """Tally the four mutually exclusive per-segment outcomes."""
    tp = fp = tn = fn = 0
    for seg in segments:
        if seg.truth is None or seg.predicted is None:
            raise ValidationError(
                f"segment {seg.session_id}#{seg.span.index} lacks truth or prediction"
            )
        truth_abnormal = seg.truth == SegmentLabel.Abnormal
        pred_abnormal = seg.predicted == SegmentLabel.Abnormal
        if truth_abnormal and pred_abnormal:
            tp += 1
        elif truth_abnormal:
            fn += 1
        elif pred_abnormal:
            fp += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def metrics(cm: ConfusionMatrix) -> tuple[float, float, float]:
    """(precision, recall, F1) with the 0/0 -> 0 conventions."""
    precision = cm.tp / (cm.tp + cm.fp) if (cm.tp + cm.fp) > 0 else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if (cm.tp + cm.fn) > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class SessionEvaluation:
    session: PatrolSession
    segments: tuple[EvalSegment, ...]
    cm: ConfusionMatrix
    unmatched_cards: int

    @property
    def analysis_failed(self) -> int:
        return sum(1 for s in self.segments if s.analysis_failed)


def evaluate_session(
    session: PatrolSession,
    cards: Sequence[EventCard],
    events: Sequence[GroundTruthEvent],
    failed_spans: Sequence[tuple[int, int]] = (),
    config: Optional[EvalConfig] = None,
) -> SessionEvaluation:
    segments = make_eval_segments(session, config)
    segments = apply_truth(segments, [e for e in events if e.session_id == session.session_id])
    session_cards = [c for c in cards if c.session_id == session.session_id]
    segments = assign_predictions(session_cards, segments, failed_spans)
    return SessionEvaluation(
        session=session,
        segments=tuple(segments),
        cm=confusion(segments),
        unmatched_cards=sum(1 for c in session_cards if c.eoi is None),
    )


def _aggregate(
    rows: list[SessionEvaluation], period: str, macro: bool
) -> MetricsReport:
    cm = ConfusionMatrix()
    for row in rows:
        cm = cm + row.cm
    if macro and rows:
        per_video = [metrics(row.cm) for row in rows]
        precision = sum(m[0] for m in per_video) / len(per_video)
        recall = sum(m[1] for m in per_video) / len(per_video)
        f1 = sum(m[2] for m in per_video) / len(per_video)
    else:
        precision, recall, f1 = metrics(cm)
    warnings = []
    abnormal = cm.tp + cm.fn
    if abnormal == 0:
        warnings.append("no truth-abnormal segments; recall is 0 by convention")
    return MetricsReport(
        period=period,
        videos=len(rows),
        duration_min=round(sum(r.session.duration_ms for r in rows) / 60_000.0, 1),
        normal=cm.tn + cm.fp,
        abnormal=abnormal,
        cm=cm,
        precision=precision,
        recall=recall,
        f1=f1,
        analysis_failed=sum(r.analysis_failed for r in rows),
        unmatched_cards=sum(r.unmatched_cards for r in rows),
        warnings=tuple(warnings),
    )


def report(
    sessions: Sequence[PatrolSession],
    cards: Sequence[EventCard],
    events: Sequence[GroundTruthEvent],
    failed_spans_by_session: Optional[dict[str, Sequence[tuple[int, int]]]] = None,
    config: Optional[EvalConfig] = None,
    macro: bool = False,
    periods: str = "all",
) -> list[MetricsReport]:
    """Day/Night/Overall metric rows (periods without sessions are omitted)."""
    failed = failed_spans_by_session or {}
    evaluations = [
        evaluate_session(s, cards, events, failed.get(s.session_id, ()), config)
        for s in sessions
    ]
    by_period = {
        Period.Day: [e for e in evaluations if e.session.period == Period.Day],
        Period.Night: [e for e in evaluations if e.session.period == Period.Night],
    }
    rows = []
    want = periods.lower()
    for period, rows_in in by_period.items():
        if not rows_in:
            continue
        if want not in ("all", period.value.lower()):
            continue
        rows.append(_aggregate(rows_in, period.value, macro))
    if want == "all" and evaluations:
        rows.append(_aggregate(evaluations, "Overall", macro))
    return rows


REPORT_COLUMNS = [
    "period",
    "videos",
    "duration_min",
    "normal",
    "abnormal",
    "precision",
    "recall",
    "f1",
]


def format_report_table(rows: Sequence[MetricsReport]) -> str:
    """Fixed-width text table mirroring the published result columns."""
    header = ["Period", "#Videos", "Duration(min)", "Normal", "Abnormal", "Precision", "Recall", "F1"]
    table = [header]
    for row in rows:
        table.append(
            [
                row.period,
                str(row.videos),
                f"{row.duration_min:g}",
                str(row.normal),
                str(row.abnormal),
                f"{row.precision:.3f}",
                f"{row.recall:.3f}",
                f"{row.f1:.3f}",
            ]
        )
    widths = [max(len(line[i]) for line in table) for i in range(len(header))]
    lines = []
    for idx, line in enumerate(table):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(line)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * widths[i] for i in range(len(header))))
    for row in rows:
        for warning in row.warnings:
            lines.append(f"! {row.period}: {warning}")
    return "\n".join(lines)


def report_to_csv(rows: Sequence[MetricsReport]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in rows:
        d = row.to_dict()
        writer.writerow([d[c] for c in REPORT_COLUMNS])
    return buffer.getvalue()


def report_to_json(rows: Sequence[MetricsReport]) -> str:
    return json.dumps([row.to_dict() for row in rows], indent=2, sort_keys=True)


def write_report_files(
    rows: Sequence[MetricsReport],
    csv_path: Optional[Union[str, Path]] = None,
    json_path: Optional[Union[str, Path]] = None,
) -> None:
    if csv_path:
        Path(csv_path).write_text(report_to_csv(rows), encoding="utf-8")
    if json_path:
        Path(json_path).write_text(report_to_json(rows), encoding="utf-8")
