"""Loaders for patrol-session manifests, detection sidecars, GPS traces, and
ground-truth annotations.

All times are integer milliseconds since video start; each session also
carries a wall-clock start so videos can be aligned without per-frame
timestamp drift. Detections arrive as sidecar metadata, never decoded video.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

from .errors import ValidationError
from .taxonomy import Taxonomy, classify_label, EntityCategory


class Period(Enum):
    Day = "Day"
    Night = "Night"

    @classmethod
    def from_name(cls, name: str) -> "Period":
        try:
            return cls[name.strip().capitalize()]
        except KeyError:
            raise ValidationError(f"unknown period {name!r}") from None


@dataclass(frozen=True)
class GpsFix:
    t_ms: int
    lat: float
    lon: float

    def to_dict(self) -> dict:
        return {"t_ms": self.t_ms, "lat": self.lat, "lon": self.lon}


@dataclass(frozen=True)
class PatrolSession:
    session_id: str
    robot_id: str
    robot_label: str
    period: Period
    video_uri: str
    duration_ms: int
    start_wall_clock: datetime
    gps_trace: tuple[GpsFix, ...]

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "robot_id": self.robot_id,
            "robot_label": self.robot_label,
            "period": self.period.value,
            "video_uri": self.video_uri,
            "duration_ms": self.duration_ms,
            "start_wall_clock": self.start_wall_clock.isoformat().replace("+00:00", "Z"),
            "gps_trace": [f.to_dict() for f in self.gps_trace],
        }


@dataclass(frozen=True)
class Detection:
    track_id: str
    class_label: EntityCategory
    bbox: tuple[float, float, float, float]
    crop_uri: Optional[str] = None

    @property
    def area(self) -> float:
        x1, y1, x2, y2 = self.bbox
        return (x2 - x1) * (y2 - y1)

    def to_dict(self) -> dict:
        out = {
            "track_id": self.track_id,
            "class_label": self.class_label.value,
            "bbox": list(self.bbox),
        }
        if self.crop_uri is not None:
            out["crop_uri"] = self.crop_uri
        return out


@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    t_ms: int
    detections: tuple[Detection, ...] = ()

    def to_dict(self) -> dict:
        return {
            "frame_index": self.frame_index,
            "t_ms": self.t_ms,
            "detections": [d.to_dict() for d in self.detections],
        }


@dataclass(frozen=True)
class GroundTruthEvent:
    session_id: str
    eoi_name: str
    start_ms: int
    end_ms: int
    annotator_votes: Optional[tuple[bool, bool, bool]] = None
    matched_eoi_id: Optional[int] = None

    @property
    def unmatched(self) -> bool:
        return self.matched_eoi_id is None


def _parse_wall_clock(value: str, ctx: str) -> datetime:
    try:
        dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError:
        raise ValidationError(f"{ctx}: bad start_wall_clock {value!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _parse_gps_fix(raw: dict, ctx: str) -> GpsFix:
    try:
        fix = GpsFix(t_ms=int(raw["t_ms"]), lat=float(raw["lat"]), lon=float(raw["lon"]))
    except (KeyError, TypeError, ValueError):
        raise ValidationError(f"{ctx}: malformed gps fix {raw!r}") from None
    if not -90.0 <= fix.lat <= 90.0:
        raise ValidationError(f"{ctx}: lat out of range at t_ms={fix.t_ms}")
    if not -180.0 <= fix.lon <= 180.0:
        raise ValidationError(f"{ctx}: lon out of range at t_ms={fix.t_ms}")
    return fix


def parse_session(raw: dict) -> PatrolSession:
    sid = raw.get("session_id")
    if not sid:
        raise ValidationError("session missing session_id")
    ctx = f"session {sid}"
    for key in ("robot_id", "robot_label", "period", "video_uri", "duration_ms", "start_wall_clock"):
        if key not in raw:
            raise ValidationError(f"{ctx}: missing field {key}")
    duration_ms = int(raw["duration_ms"])
    if duration_ms <= 0:
        raise ValidationError(f"{ctx}: duration_ms must be > 0")
    fixes = [_parse_gps_fix(f, ctx) for f in raw.get("gps_trace", [])]
    prev = -1
    for fix in fixes:
        if fix.t_ms <= prev:
            raise ValidationError(f"{ctx}: gps_trace timestamps not strictly increasing at t_ms={fix.t_ms}")
        if not 0 <= fix.t_ms <= duration_ms:
            raise ValidationError(f"{ctx}: gps fix t_ms={fix.t_ms} outside [0, duration_ms]")
        prev = fix.t_ms
    return PatrolSession(
        session_id=str(sid),
        robot_id=str(raw["robot_id"]),
        robot_label=str(raw["robot_label"]),
        period=Period.from_name(str(raw["period"])),
        video_uri=str(raw["video_uri"]),
        duration_ms=duration_ms,
        start_wall_clock=_parse_wall_clock(str(raw["start_wall_clock"]), ctx),
        gps_trace=tuple(fixes),
    )


def load_manifest(path: Union[str, Path]) -> list[PatrolSession]:
    """Parse a manifest file into validated sessions, sorted by (period, robot_id)."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"manifest does not parse: {exc}") from None
    sessions = [parse_session(s) for s in doc.get("sessions", [])]
    seen: set[str] = set()
    for s in sessions:
        if s.session_id in seen:
            raise ValidationError(f"session {s.session_id}: duplicate session_id")
        seen.add(s.session_id)
    return sorted(sessions, key=lambda s: (s.period.value, s.robot_id, s.session_id))


def manifest_to_dict(sessions: Iterable[PatrolSession]) -> dict:
    """Inverse of load_manifest; round-trips field-for-field."""
    return {"sessions": [s.to_dict() for s in sessions]}


def _parse_detection(raw: dict, ctx: str) -> Detection:
    try:
        bbox = tuple(float(v) for v in raw["bbox"])
        det = Detection(
            track_id=str(raw["track_id"]),
            class_label=EntityCategory.from_name(str(raw["class_label"])),
            bbox=bbox,  # type: ignore[arg-type]
            crop_uri=raw.get("crop_uri"),
        )
    except (KeyError, TypeError, ValueError):
        raise ValidationError(f"{ctx}: malformed detection {raw!r}") from None
    if len(det.bbox) != 4:
        raise ValidationError(f"{ctx}: bbox must have 4 coordinates")
    x1, y1, x2, y2 = det.bbox
    if min(x1, y1, x2, y2) < 0:
        raise ValidationError(f"{ctx}: bbox coordinates must be >= 0")
    if not (x1 < x2 and y1 < y2):
        raise ValidationError(f"{ctx}: degenerate bbox {det.bbox}")
    return det


def parse_frame_record(raw: dict, ctx: str = "frame") -> FrameRecord:
    try:
        frame_index = int(raw["frame_index"])
        t_ms = int(raw["t_ms"])
    except (KeyError, TypeError, ValueError):
        raise ValidationError(f"{ctx}: missing frame_index/t_ms") from None
    dets = tuple(
        _parse_detection(d, f"{ctx} frame_index={frame_index}")
        for d in raw.get("detections", [])
    )
    return FrameRecord(frame_index=frame_index, t_ms=t_ms, detections=dets)


def load_detection_sidecar(path: Union[str, Path]) -> Iterator[FrameRecord]:
    """Stream FrameRecords from a JSON-lines sidecar, enforcing time order."""
    prev_index, prev_t = -1, -1
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError:
                raise ValidationError(f"{path}:{lineno}: invalid JSON") from None
            record = parse_frame_record(raw, ctx=f"{path}:{lineno}")
            if record.frame_index < prev_index or record.t_ms < prev_t:
                raise ValidationError(
                    f"{path}:{lineno}: frame_index/t_ms must be nondecreasing"
                )
            prev_index, prev_t = record.frame_index, record.t_ms
            yield record


def load_ground_truth(
    path: Union[str, Path],
    sessions: Optional[Iterable[PatrolSession]] = None,
    taxonomy: Optional[Taxonomy] = None,
) -> list[GroundTruthEvent]:
    """Parse the ground-truth CSV, sorted by (session_id, start_ms).

    With ``sessions`` supplied, session ids and event bounds are validated
    against the manifest. With ``taxonomy`` supplied, labels are resolved via
    classify_label; misses are kept but flagged unmatched.
    """
    by_id = {s.session_id: s for s in sessions} if sessions is not None else None
    events: list[GroundTruthEvent] = []
    with open(path, "r", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        for lineno, row in enumerate(reader, start=2):
            sid = (row.get("session_id") or "").strip()
            if not sid:
                raise ValidationError(f"{path}:{lineno}: missing session_id")
            try:
                start_ms = int(row["start_ms"])
                end_ms = int(row["end_ms"])
            except (KeyError, TypeError, ValueError):
                raise ValidationError(f"{path}:{lineno}: bad start_ms/end_ms") from None
            if end_ms <= start_ms or start_ms < 0:
                raise ValidationError(
                    f"{path}:{lineno}: require 0 <= start_ms < end_ms, got [{start_ms}, {end_ms})"
                )
            if by_id is not None:
                if sid not in by_id:
                    raise ValidationError(f"{path}:{lineno}: unknown session_id {sid!r}")
                if end_ms > by_id[sid].duration_ms:
                    raise ValidationError(
                        f"{path}:{lineno}: event [{start_ms}, {end_ms}) exceeds session duration"
                    )
            votes = None
            if all(row.get(col) not in (None, "") for col in ("a1", "a2", "a3")):
                try:
                    votes = tuple(bool(int(row[col])) for col in ("a1", "a2", "a3"))
                except ValueError:
                    raise ValidationError(f"{path}:{lineno}: annotator votes must be 0/1") from None
            name = (row.get("eoi_name") or "").strip()
            matched = classify_label(name, taxonomy) if taxonomy is not None else None
            events.append(
                GroundTruthEvent(
                    session_id=sid,
                    eoi_name=name,
                    start_ms=start_ms,
                    end_ms=end_ms,
                    annotator_votes=votes,  # type: ignore[arg-type]
                    matched_eoi_id=matched.id if matched else None,
                )
            )
    return sorted(events, key=lambda e: (e.session_id, e.start_ms, e.end_ms, e.eoi_name))


def interpolate_pose(session: PatrolSession, t_ms: int) -> tuple[float, float]:
    """Robot (lat, lon) at t_ms: linear between bracketing fixes, clamped at the ends.

    Linear interpolation in degrees is fine at campus scale.
    """
    trace = session.gps_trace
    if not trace:
        raise ValidationError(f"session {session.session_id}: empty gps_trace")
    if t_ms <= trace[0].t_ms:
        return (trace[0].lat, trace[0].lon)
    if t_ms >= trace[-1].t_ms:
        return (trace[-1].lat, trace[-1].lon)
    for before, after in zip(trace, trace[1:]):
        if before.t_ms <= t_ms <= after.t_ms:
            span = after.t_ms - before.t_ms
            frac = (t_ms - before.t_ms) / span
            return (
                before.lat + frac * (after.lat - before.lat),
                before.lon + frac * (after.lon - before.lon),
            )
    raise AssertionError("unreachable: trace is strictly increasing")
