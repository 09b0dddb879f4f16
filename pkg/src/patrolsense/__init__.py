"""patrolsense: multi-robot patrol video sensemaking engine.

Turns per-frame detection metadata from robot patrol videos into prioritized,
explainable Event Cards; supports descriptor-based entity search,
spatiotemporal browsing, team workspaces, and segment-level detection
metrics.
"""
from .taxonomy import (
    EoiType,
    PriorityLevel,
    Taxonomy,
    classify_label,
    load_default_taxonomy,
    load_taxonomy,
    priority_of,
)
from .segments import SegmentSpan, segment_video

__version__ = "0.1.0"

__all__ = [
    "EoiType",
    "PriorityLevel",
    "Taxonomy",
    "classify_label",
    "load_default_taxonomy",
    "load_taxonomy",
    "priority_of",
    "SegmentSpan",
    "segment_video",
    "__version__",
]
