from __future__ import annotations

from datetime import datetime, timezone

import pytest

from patrolsense.ingest import Detection, FrameRecord, GpsFix, PatrolSession, Period
from patrolsense.taxonomy import EntityCategory, load_default_taxonomy


@pytest.fixture(scope="session")
def taxonomy():
    return load_default_taxonomy()


def make_session(
    session_id: str = "s1",
    robot_id: str = "r1",
    duration_ms: int = 120_000,
    period: Period = Period.Day,
    gps: list[tuple[int, float, float]] | None = None,
) -> PatrolSession:
    if gps is None:
        gps = [(0, 38.83, -77.31), (duration_ms, 38.84, -77.30)]
    return PatrolSession(
        session_id=session_id,
        robot_id=robot_id,
        robot_label=f"{robot_id} north quad",
        period=period,
        video_uri=f"videos/{session_id}.mp4",
        duration_ms=duration_ms,
        start_wall_clock=datetime(2025, 6, 1, 9, 0, tzinfo=timezone.utc),
        gps_trace=tuple(GpsFix(t_ms=t, lat=lat, lon=lon) for t, lat, lon in gps),
    )


def make_frames(
    duration_ms: int,
    fps: float = 1.0,
    tracks: list[tuple[str, str, int, int]] | None = None,
) -> list[FrameRecord]:
    """Synthetic tracked frames; tracks are (track_id, class, start_ms, end_ms)."""
    tracks = tracks or []
    period = int(1000 / fps)
    frames = []
    for i, t in enumerate(range(0, duration_ms, period)):
        dets = []
        for track_id, cls, start, end in tracks:
            if start <= t < end:
                dets.append(
                    Detection(
                        track_id=track_id,
                        class_label=EntityCategory.from_name(cls),
                        bbox=(10.0, 10.0, 50.0, 90.0),
                        crop_uri=f"crops/{track_id}.jpg",
                    )
                )
        frames.append(FrameRecord(frame_index=i, t_ms=t, detections=tuple(dets)))
    return frames


def session_dict(session: PatrolSession) -> dict:
    return session.to_dict()
