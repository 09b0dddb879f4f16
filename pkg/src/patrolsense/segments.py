"""Temporal segmentation shared by the analysis pipeline and the evaluator.

Spans are half-open [start_ms, end_ms) windows laid out on a stride grid:
window k starts at k * stride and is clipped at the video end, so overlapping
windows cover every millisecond when the tail rule is off.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True, order=True)
class SegmentSpan:
    index: int
    start_ms: int
    end_ms: int

    @property
    def length_ms(self) -> int:
        return self.end_ms - self.start_ms

    def contains(self, t_ms: int) -> bool:
        return self.start_ms <= t_ms < self.end_ms

    def to_dict(self) -> dict:
        return {"index": self.index, "start_ms": self.start_ms, "end_ms": self.end_ms}


def overlap_ms(a_start: int, a_end: int, b_start: int, b_end: int) -> int:
    """Overlap length of two half-open ranges, 0 when disjoint."""
    return max(0, min(a_end, b_end) - max(a_start, b_start))


def segment_video(
    duration_ms: int,
    window_ms: int,
    stride_ms: int,
    min_tail_ms: int = 0,
) -> list[SegmentSpan]:
    """Lay overlapping windows over [0, duration_ms).

    Starts run 0, stride, 2*stride, ... while start < duration; each end is
    clipped to the video end. Clipped trailing spans shorter than
    ``min_tail_ms`` are dropped (their grid index is kept, not renumbered).
    With min_tail_ms = 0 the union of spans covers the whole video.
    """
    if duration_ms <= 0:
        raise ValidationError(f"duration_ms must be > 0, got {duration_ms}")
    if not 0 < stride_ms <= window_ms <= duration_ms:
        raise ValidationError(
            f"require 0 < stride_ms <= window_ms <= duration_ms, "
            f"got stride={stride_ms}, window={window_ms}, duration={duration_ms}"
        )
    if not 0 <= min_tail_ms <= window_ms:
        raise ValidationError(
            f"require 0 <= min_tail_ms <= window_ms, got min_tail={min_tail_ms}"
        )
    spans: list[SegmentSpan] = []
    index = 0
    start = 0
    while start < duration_ms:
        end = min(start + window_ms, duration_ms)
        if end - start >= min_tail_ms:
            spans.append(SegmentSpan(index=index, start_ms=start, end_ms=end))
        index += 1
        start = index * stride_ms
    return spans
