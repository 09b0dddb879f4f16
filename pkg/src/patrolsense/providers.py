"""Contracts for the four external model capabilities, plus deterministic mocks.

Capabilities: segment reasoner, attribute describer, crop similarity scorer,
and detector/tracker. Mocks are pure functions of (fixture content, request)
keyed by content (session + time span, crop uri), never by call order, so
parallel pipeline runs stay deterministic. A thin live HTTP adapter exists as
optional plumbing; no model ships with this package.

Fixture file: one JSON document with sections

    {"reasoner": {"events": [...], "failures": [...]},
     "attributes": {"<crop-uri>": {"shirt_color": "red", ...}},
     "similarity": {"pairs": [{"a": ..., "b": ..., "score": 0.97}],
                    "crops": [...], "default": 0.0}}
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, Protocol, Sequence, Union

from .errors import (
    ContractViolationError,
    ProviderError,
    RetryableProviderError,
    ValidationError,
)
from .ingest import FrameRecord
from .segments import SegmentSpan, overlap_ms

DEFAULT_RETRIES = 2
DEFAULT_TIMEOUT_S = 60.0
DEFAULT_MAX_INFLIGHT = 4

ENV_ENDPOINT = "MRVS_PROVIDER_ENDPOINT"
ENV_KEY = "MRVS_PROVIDER_KEY"

FALLBACK_OTHER = "other"
FALLBACK_UNCLEAR = "unclear"


class Confidence(Enum):
    High = "High"
    Medium = "Medium"
    Low = "Low"

    @classmethod
    def from_name(cls, name: str) -> "Confidence":
        try:
            return cls[name.strip().capitalize()]
        except KeyError:
            raise ContractViolationError(
                f"confidence must be one of High/Medium/Low, got {name!r}"
            ) from None

    @property
    def rank(self) -> int:
        """Higher is more confident."""
        return {"High": 2, "Medium": 1, "Low": 0}[self.value]


@dataclass(frozen=True)
class ReasonerRequest:
    """One reasoning call: a segment of object-annotated frames plus protocol."""

    session_id: str
    persona_prompt: str
    taxonomy_digest: str
    segment_span: SegmentSpan
    annotated_frames: tuple  # ObjectAwareFrame refs, all within segment_span
    generation_params: dict = field(default_factory=lambda: {"temperature": 1.0})

    def __post_init__(self) -> None:
        for frame in self.annotated_frames:
            if not self.segment_span.contains(frame.frame.t_ms):
                raise ValidationError(
                    f"frame t_ms={frame.frame.t_ms} outside segment "
                    f"[{self.segment_span.start_ms}, {self.segment_span.end_ms})"
                )


@dataclass(frozen=True)
class RawEventProposal:
    label_text: str
    description: str
    rationale: str
    confidence: Confidence
    claimed_span: Optional[tuple[int, int]] = None


@dataclass(frozen=True)
class AttributeQuestion:
    """A structured query: pick-one-option form or binary yes/no form."""

    question_id: str
    attribute: str
    options: tuple[str, ...] = ()  # empty for binary form
    binary_value: Optional[str] = None  # "is <attribute> == <binary_value>?"

    @property
    def is_binary(self) -> bool:
        return not self.options

    def allowed_answers(self) -> frozenset[str]:
        if self.is_binary:
            return frozenset({"yes", "no", FALLBACK_UNCLEAR})
        return frozenset(self.options) | {FALLBACK_OTHER, FALLBACK_UNCLEAR}


@dataclass(frozen=True)
class AttributeAnswer:
    question_id: str
    answer: str


class SegmentReasoner(Protocol):
    def reason_segment(self, req: ReasonerRequest) -> list[RawEventProposal]: ...


class AttributeDescriber(Protocol):
    def describe_attributes(
        self, crop: str, entity_class: str, questions: Sequence[AttributeQuestion]
    ) -> list[AttributeAnswer]: ...


class SimilarityScorer(Protocol):
    def similarity(self, a: str, b: str) -> float: ...


class DetectorTracker(Protocol):
    def detect_and_track(self, frames: Iterable[FrameRecord]) -> Iterator[FrameRecord]: ...


@dataclass(frozen=True)
class ProviderConfig:
    mode: str = "mock"  # mock | live
    retries: int = DEFAULT_RETRIES
    timeout_s: float = DEFAULT_TIMEOUT_S
    max_inflight: int = DEFAULT_MAX_INFLIGHT


def call_with_retry(fn: Callable, *args, retries: int = DEFAULT_RETRIES, **kwargs):
    """Invoke a provider call, retrying transient failures within the budget."""
    attempt = 0
    while True:
        try:
            return fn(*args, **kwargs)
        except RetryableProviderError:
            if attempt >= retries:
                raise
            attempt += 1


# --- deterministic mocks ----------------------------------------------------


@dataclass(frozen=True)
class ReasonerFixture:
    """A scripted incident the mock reasoner reports for overlapping segments."""

    session_id: str
    start_ms: int
    end_ms: int
    label_text: str
    description: str
    rationale: str
    confidence: Confidence


class MockSegmentReasoner:
    """Replays scripted incidents; segments hitting no fixture are normal.

    Stateless: the proposals for a segment depend only on which fixture spans
    overlap it, so processing order and parallelism cannot change output.
    """

    def __init__(
        self,
        events: Sequence[ReasonerFixture] = (),
        failure_spans: Sequence[tuple[str, int, int]] = (),
    ) -> None:
        self._events = tuple(events)
        self._failures = tuple(failure_spans)

    def reason_segment(self, req: ReasonerRequest) -> list[RawEventProposal]:
        span = req.segment_span
        for sid, start, end in self._failures:
            if sid == req.session_id and overlap_ms(start, end, span.start_ms, span.end_ms) > 0:
                raise RetryableProviderError(
                    f"scripted failure for {sid} [{start}, {end})"
                )
        hits = [
            ev
            for ev in self._events
            if ev.session_id == req.session_id
            and overlap_ms(ev.start_ms, ev.end_ms, span.start_ms, span.end_ms) > 0
        ]
        hits.sort(key=lambda ev: (ev.start_ms, ev.end_ms, ev.label_text))
        return [
            RawEventProposal(
                label_text=ev.label_text,
                description=ev.description,
                rationale=ev.rationale,
                confidence=ev.confidence,
                claimed_span=(ev.start_ms, ev.end_ms),
            )
            for ev in hits
        ]


class MockAttributeDescriber:
    """Answers structured queries from a crop-uri keyed attribute table.

    Option questions return the scripted value (fallback "unclear" when the
    crop or attribute is unscripted). Binary questions answer "yes" exactly
    when the scripted value equals the probed value.
    """

    def __init__(self, attributes: dict[str, dict[str, str]]) -> None:
        self._attributes = dict(attributes)

    def describe_attributes(
        self, crop: str, entity_class: str, questions: Sequence[AttributeQuestion]
    ) -> list[AttributeAnswer]:
        if not questions:
            raise ValidationError("questions must be nonempty")
        scripted = self._attributes.get(crop, {})
        answers = []
        for q in questions:
            if q.is_binary:
                if q.binary_value is None:
                    raise ValidationError(f"binary question {q.question_id} missing probe value")
                value = scripted.get(q.attribute)
                if value is None:
                    answer = FALLBACK_UNCLEAR
                else:
                    answer = "yes" if value == q.binary_value else "no"
            else:
                answer = scripted.get(q.attribute, FALLBACK_UNCLEAR)
            if answer not in q.allowed_answers():
                raise ContractViolationError(
                    f"answer {answer!r} not in option set of question {q.question_id}"
                )
            answers.append(AttributeAnswer(question_id=q.question_id, answer=answer))
        return answers


class MockSimilarityScorer:
    """Scripted pairwise similarity; identity is 1.0, unscripted pairs default."""

    def __init__(
        self,
        pairs: dict[frozenset, float] | None = None,
        known_crops: Iterable[str] = (),
        default: float = 0.0,
    ) -> None:
        self._pairs = dict(pairs or {})
        self._known = set(known_crops)
        for key in self._pairs:
            self._known.update(key)
        self._default = default

    def similarity(self, a: str, b: str) -> float:
        for ref in (a, b):
            if ref not in self._known:
                raise ProviderError(f"unresolvable crop reference {ref!r}")
        if a == b:
            return 1.0
        return self._pairs.get(frozenset((a, b)), self._default)


class ReplayDetectorTracker:
    """Mock detector/tracker: replays already-tracked frame metadata verbatim."""

    def detect_and_track(self, frames: Iterable[FrameRecord]) -> Iterator[FrameRecord]:
        prev_t = None
        for record in frames:
            if prev_t is not None and record.t_ms < prev_t:
                raise ValidationError(
                    f"out-of-order frame at frame_index={record.frame_index}: "
                    f"t_ms {record.t_ms} < {prev_t}"
                )
            prev_t = record.t_ms
            yield record


@dataclass
class ProviderBundle:
    reasoner: SegmentReasoner
    describer: AttributeDescriber
    scorer: SimilarityScorer
    detector: DetectorTracker
    config: ProviderConfig = field(default_factory=ProviderConfig)


def _parse_reasoner_fixture(raw: dict) -> ReasonerFixture:
    try:
        return ReasonerFixture(
            session_id=str(raw["session_id"]),
            start_ms=int(raw["start_ms"]),
            end_ms=int(raw["end_ms"]),
            label_text=str(raw["label_text"]),
            description=str(raw.get("description", "")),
            rationale=str(raw.get("rationale", "")),
            confidence=Confidence.from_name(str(raw.get("confidence", "Medium"))),
        )
    except KeyError as exc:
        raise ValidationError(f"reasoner fixture missing field {exc}") from None


def load_fixtures(path: Union[str, Path], config: Optional[ProviderConfig] = None) -> ProviderBundle:
    """Build a fully mocked provider bundle from a fixture file."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return build_mock_bundle(doc, config=config)


def build_mock_bundle(doc: dict, config: Optional[ProviderConfig] = None) -> ProviderBundle:
    reasoner_doc = doc.get("reasoner", {})
    events = [_parse_reasoner_fixture(e) for e in reasoner_doc.get("events", [])]
    failures = [
        (str(f["session_id"]), int(f["start_ms"]), int(f["end_ms"]))
        for f in reasoner_doc.get("failures", [])
    ]
    attributes = {str(k): dict(v) for k, v in doc.get("attributes", {}).items()}
    sim_doc = doc.get("similarity", {})
    pairs = {
        frozenset((str(p["a"]), str(p["b"]))): float(p["score"])
        for p in sim_doc.get("pairs", [])
    }
    known = set(attributes) | {str(c) for c in sim_doc.get("crops", [])}
    return ProviderBundle(
        reasoner=MockSegmentReasoner(events, failures),
        describer=MockAttributeDescriber(attributes),
        scorer=MockSimilarityScorer(pairs, known_crops=known, default=float(sim_doc.get("default", 0.0))),
        detector=ReplayDetectorTracker(),
        config=config or ProviderConfig(mode="mock"),
    )


def empty_mock_bundle(config: Optional[ProviderConfig] = None) -> ProviderBundle:
    """All-normal mocks: no incidents, no attributes, zero similarity."""
    return build_mock_bundle({}, config=config)


# --- live adapter (optional plumbing; not exercised by the test suite) -------


class LiveProviderClient:
    """HTTP adapter for a hosted model endpoint.

    Reads MRVS_PROVIDER_ENDPOINT and MRVS_PROVIDER_KEY from the environment.
    Request/response bodies mirror the mock contracts one-to-one.
    """

    def __init__(self, config: Optional[ProviderConfig] = None) -> None:
        endpoint = os.environ.get(ENV_ENDPOINT)
        key = os.environ.get(ENV_KEY)
        if not endpoint or not key:
            raise ValidationError(
                f"live provider mode requires {ENV_ENDPOINT} and {ENV_KEY}"
            )
        self._endpoint = endpoint.rstrip("/")
        self._key = key
        self._config = config or ProviderConfig(mode="live")

    def _post(self, route: str, payload: dict) -> dict:
        import httpx

        try:
            response = httpx.post(
                f"{self._endpoint}/{route}",
                json=payload,
                headers={"Authorization": f"Bearer {self._key}"},
                timeout=self._config.timeout_s,
            )
        except httpx.TransportError as exc:
            raise RetryableProviderError(str(exc)) from exc
        if response.status_code >= 500:
            raise RetryableProviderError(f"{route}: upstream {response.status_code}")
        if response.status_code != 200:
            raise ProviderError(f"{route}: upstream {response.status_code}")
        return response.json()

    def reason_segment(self, req: ReasonerRequest) -> list[RawEventProposal]:
        payload = {
            "session_id": req.session_id,
            "persona_prompt": req.persona_prompt,
            "taxonomy_digest": req.taxonomy_digest,
            "segment": req.segment_span.to_dict(),
            "frames": [f.frame.to_dict() for f in req.annotated_frames],
            "generation_params": req.generation_params,
        }
        body = self._post("reason_segment", payload)
        return [
            RawEventProposal(
                label_text=str(p["label_text"]),
                description=str(p.get("description", "")),
                rationale=str(p.get("rationale", "")),
                confidence=Confidence.from_name(str(p["confidence"])),
                claimed_span=tuple(p["claimed_span"]) if p.get("claimed_span") else None,
            )
            for p in body.get("proposals", [])
        ]

    def describe_attributes(
        self, crop: str, entity_class: str, questions: Sequence[AttributeQuestion]
    ) -> list[AttributeAnswer]:
        body = self._post(
            "describe_attributes",
            {
                "crop": crop,
                "entity_class": entity_class,
                "questions": [
                    {
                        "question_id": q.question_id,
                        "attribute": q.attribute,
                        "options": list(q.options),
                        "binary_value": q.binary_value,
                    }
                    for q in questions
                ],
            },
        )
        answers = [
            AttributeAnswer(question_id=str(a["question_id"]), answer=str(a["answer"]))
            for a in body.get("answers", [])
        ]
        if len(answers) != len(questions):
            raise ContractViolationError(
                f"expected {len(questions)} answers, got {len(answers)}"
            )
        for q, a in zip(questions, answers):
            if a.answer not in q.allowed_answers():
                raise ContractViolationError(
                    f"answer {a.answer!r} not in option set of question {q.question_id}"
                )
        return answers

    def similarity(self, a: str, b: str) -> float:
        body = self._post("similarity", {"a": a, "b": b})
        return float(body["score"])

    def detect_and_track(self, frames: Iterable[FrameRecord]) -> Iterator[FrameRecord]:
        raise ProviderError("live detector streaming is not supported by this adapter")


def build_live_bundle(config: Optional[ProviderConfig] = None) -> ProviderBundle:
    client = LiveProviderClient(config)
    return ProviderBundle(
        reasoner=client,
        describer=client,
        scorer=client,
        detector=ReplayDetectorTracker(),
        config=config or ProviderConfig(mode="live"),
    )


def bundle_from_config(
    config: ProviderConfig, fixtures_path: Optional[Union[str, Path]] = None
) -> ProviderBundle:
    if config.mode == "mock":
        if fixtures_path is not None:
            return load_fixtures(fixtures_path, config=config)
        return empty_mock_bundle(config=config)
    if config.mode == "live":
        return build_live_bundle(config=config)
    raise ValidationError(f"unknown provider mode {config.mode!r}")
