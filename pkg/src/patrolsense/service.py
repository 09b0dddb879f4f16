"""HTTP/JSON API over the store, search index, pipeline, and evaluator.

Read routes mirror their in-process operations exactly (contract-tested
against them) and are cursor-paginated. Mutating routes require a bearer
token; expired or unknown tokens are rejected on every route they appear on.
Analysis runs as a background job with polled status.
"""
from __future__ import annotations

import base64
import os
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse

from .descriptors import read_profiles_jsonl
from .errors import EngineError, StoreError, ValidationError
from .evaluation import EvalConfig, format_report_table, report
from .ingest import load_ground_truth, load_detection_sidecar, load_manifest
from .pipeline import PipelineConfig, analyze_session
from .providers import ProviderConfig, bundle_from_config
from .search import DescriptorQuery, build_index, find_similar, query as search_query
from .store import EventFilter, EventStore, WorkspaceScope, icon_category
from .taxonomy import Taxonomy, load_default_taxonomy

DEFAULT_PAGE_SIZE = 100
ENV_STORE_PATH = "MRVS_STORE_PATH"


@dataclass(frozen=True)
class ApiSession:
    user_id: str
    role: str
    token: str
    expiry: datetime

    @property
    def expired(self) -> bool:
        return datetime.now(timezone.utc) >= self.expiry


class AuthProvider:
    """Static token table; production would swap in agency identity."""

    def __init__(self, sessions: list[ApiSession]):
        self._by_token = {s.token: s for s in sessions}

    def resolve(self, token: str) -> Optional[ApiSession]:
        return self._by_token.get(token)


@dataclass
class Job:
    job_id: str
    status: str = "queued"  # queued | running | done | failed
    detail: str = ""
    result: dict = field(default_factory=dict)


class ApiError(EngineError):
    def __init__(self, status_code: int, code: str, message: str):
        super().__init__(message)
        self.status_code = status_code
        self.code = code
        self.message = message


def _decode_cursor(cursor: Optional[str]) -> int:
    if not cursor:
        return 0
    try:
        return int(base64.urlsafe_b64decode(cursor.encode("ascii")).decode("ascii"))
    except Exception:
        raise ApiError(400, "bad_cursor", f"malformed cursor {cursor!r}") from None


def _encode_cursor(offset: int) -> str:
    return base64.urlsafe_b64encode(str(offset).encode("ascii")).decode("ascii")


def _paginate(items: list, cursor: Optional[str], limit: int) -> dict:
    offset = _decode_cursor(cursor)
    window = items[offset : offset + limit]
    next_cursor = _encode_cursor(offset + limit) if offset + limit < len(items) else None
    return {"items": window, "next_cursor": next_cursor, "total": len(items)}


@dataclass
class AppState:
    store: EventStore
    auth: AuthProvider
    taxonomy: Taxonomy
    jobs: dict[str, Job] = field(default_factory=dict)
    jobs_lock: threading.Lock = field(default_factory=threading.Lock)

    def search_index(self):
        return build_index(self.store.profiles(), self.store.query_events())


def _filter_from_params(
    priority: list[str],
    session: list[str],
    eoi: list[str],
    status: list[str],
    period: Optional[str],
    t0: Optional[int],
    t1: Optional[int],
    unclassified: bool = False,
) -> EventFilter:
    raw: dict = {"unclassified_only": unclassified}
    if priority:
        raw["priorities"] = priority
    if session:
        raw["sessions"] = session
    if eoi:
        raw["eoi_types"] = eoi
    if status:
        raw["statuses"] = status
    if period:
        raw["period"] = period
    if t0 is not None and t1 is not None:
        raw["time_range"] = (t0, t1)
    return EventFilter.from_dict(raw)


def create_app(state: AppState) -> FastAPI:
    app = FastAPI(title="patrolsense", version="0.1.0")

    def current_session(authorization: Optional[str] = Header(default=None)) -> Optional[ApiSession]:
        if authorization is None:
            return None
        scheme, _, token = authorization.partition(" ")
        if scheme.lower() != "bearer" or not token:
            raise ApiError(401, "unauthorized", "malformed Authorization header")
        session = state.auth.resolve(token)
        if session is None:
            raise ApiError(401, "unauthorized", "unknown token")
        if session.expired:
            raise ApiError(401, "token_expired", "token has expired")
        return session

    def require_auth(session: Optional[ApiSession] = Depends(current_session)) -> ApiSession:
        if session is None:
            raise ApiError(401, "unauthorized", "this route requires a bearer token")
        return session

    @app.exception_handler(ApiError)
    async def handle_api_error(_req: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.exception_handler(EngineError)
    async def handle_engine_error(_req: Request, exc: EngineError):
        status = 404 if isinstance(exc, StoreError) and "unknown" in str(exc) else 400
        code = "not_found" if status == 404 else "validation_error"
        return JSONResponse(
            status_code=status, content={"error": {"code": code, "message": str(exc)}}
        )

    @app.get("/healthz")
    def healthz(_session: Optional[ApiSession] = Depends(current_session)):
        return {"status": "ok"}

    @app.get("/sessions")
    def sessions(
        cursor: Optional[str] = None,
        limit: int = Query(default=DEFAULT_PAGE_SIZE, ge=1, le=1000),
        _session: Optional[ApiSession] = Depends(current_session),
    ):
        rows = [s.to_dict() for s in state.store.sessions()]
        return _paginate(rows, cursor, limit)

    @app.get("/events")
    def events(
        priority: list[str] = Query(default=[]),
        session: list[str] = Query(default=[]),
        eoi: list[str] = Query(default=[]),
        status: list[str] = Query(default=[]),
        period: Optional[str] = None,
        t0: Optional[int] = None,
        t1: Optional[int] = None,
        unclassified: bool = False,
        cursor: Optional[str] = None,
        limit: int = Query(default=DEFAULT_PAGE_SIZE, ge=1, le=1000),
        _session: Optional[ApiSession] = Depends(current_session),
    ):
        f = _filter_from_params(priority, session, eoi, status, period, t0, t1, unclassified)
        rows = [c.to_dict() for c in state.store.query_events(f)]
        return _paginate(rows, cursor, limit)

    @app.get("/events/{card_id}")
    def event_detail(card_id: str, _session: Optional[ApiSession] = Depends(current_session)):
        card = state.store.get_card(card_id)
        payload = card.to_dict()
        payload["icon_category"] = icon_category(card).value
        return payload

    @app.get("/timeline")
    def timeline(
        session: list[str] = Query(default=[]),
        period: Optional[str] = None,
        priority: list[str] = Query(default=[]),
        eoi: list[str] = Query(default=[]),
        _session: Optional[ApiSession] = Depends(current_session),
    ):
        f = _filter_from_params(priority, session, eoi, [], period, None, None)
        return {"lanes": [lane.to_dict() for lane in state.store.timeline(f)]}

    @app.get("/map")
    def map_route(
        bbox: str,
        cursor: Optional[str] = None,
        limit: int = Query(default=DEFAULT_PAGE_SIZE, ge=1, le=1000),
        _session: Optional[ApiSession] = Depends(current_session),
    ):
        try:
            lat_min, lon_min, lat_max, lon_max = (float(v) for v in bbox.split(","))
        except ValueError:
            raise ApiError(400, "bad_bbox", "bbox must be lat_min,lon_min,lat_max,lon_max") from None
        cards = state.store.query_region((lat_min, lon_min, lat_max, lon_max))
        rows = []
        for card in cards:
            payload = card.to_dict()
            payload["icon_category"] = icon_category(card).value
            rows.append(payload)
        return _paginate(rows, cursor, limit)

    @app.post("/search")
    def search_route(body: dict, _session: Optional[ApiSession] = Depends(current_session)):
        q = DescriptorQuery.from_dict(body)
        matches = search_query(q, state.search_index())
        return {"matches": [m.to_dict() for m in matches]}

    @app.get("/entities/{entity_id}/similar")
    def similar_route(entity_id: str, _session: Optional[ApiSession] = Depends(current_session)):
        matches = find_similar(entity_id, state.search_index())
        return {"matches": [m.to_dict() for m in matches]}

    @app.get("/workspace")
    def workspace_list(
        scope: Optional[str] = None,
        session: ApiSession = Depends(require_auth),
        cursor: Optional[str] = None,
        limit: int = Query(default=DEFAULT_PAGE_SIZE, ge=1, le=1000),
    ):
        parsed_scope = WorkspaceScope.from_name(scope) if scope else None
        items = state.store.workspace_list(session.user_id, scope=parsed_scope)
        return _paginate([i.to_dict() for i in items], cursor, limit)

    @app.post("/workspace/items", status_code=201)
    def workspace_save(body: dict, session: ApiSession = Depends(require_auth)):
        item = state.store.workspace_save(
            card_id=str(body.get("card_id", "")),
            owner=session.user_id,
            scope=str(body.get("scope", "Personal")),
            note=str(body.get("note", "")),
            case_number=body.get("case_number"),
        )
        return item.to_dict()

    @app.patch("/workspace/items/{item_id}")
    def workspace_update(item_id: str, body: dict, session: ApiSession = Depends(require_auth)):
        item = None
        if "status" in body:
            item = state.store.workspace_set_status(item_id, session.user_id, str(body["status"]))
        if "note" in body:
            item = state.store.workspace_annotate(item_id, session.user_id, str(body["note"]))
        if "assignee" in body:
            item = state.store.workspace_assign(item_id, session.user_id, str(body["assignee"]))
        if item is None:
            raise ApiError(400, "empty_patch", "provide status, note, or assignee")
        return item.to_dict()

    @app.post("/analyze", status_code=202)
    def analyze_route(body: dict, session: ApiSession = Depends(require_auth)):
        job = Job(job_id=uuid.uuid4().hex[:12])
        with state.jobs_lock:
            state.jobs[job.job_id] = job

        def run() -> None:
            job.status = "running"
            try:
                result = _run_analysis(state, body)
                job.result = result
                job.status = "done"
            except Exception as exc:  # surfaced via job status, not a crashed thread
                job.detail = str(exc)
                job.status = "failed"

        threading.Thread(target=run, daemon=True).start()
        return {"job_id": job.job_id, "status": job.status}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str, _session: Optional[ApiSession] = Depends(current_session)):
        with state.jobs_lock:
            job = state.jobs.get(job_id)
        if job is None:
            raise ApiError(404, "not_found", f"unknown job {job_id!r}")
        return {"job_id": job.job_id, "status": job.status, "detail": job.detail, "result": job.result}

    @app.get("/eval/report")
    def eval_report(
        truth: str,
        macro: bool = False,
        period: str = "all",
        _session: Optional[ApiSession] = Depends(current_session),
    ):
        sessions = state.store.sessions()
        if not sessions:
            raise ApiError(400, "no_sessions", "store has no sessions to evaluate")
        events = load_ground_truth(truth, sessions, state.taxonomy)
        rows = report(
            sessions,
            state.store.query_events(),
            events,
            config=EvalConfig(),
            macro=macro,
            periods=period,
        )
        return {"rows": [r.to_dict() for r in rows], "table": format_report_table(rows)}

    return app


def _run_analysis(state: AppState, body: dict) -> dict:
    manifest_path = body.get("manifest")
    if not manifest_path:
        raise ValidationError("analyze requires a manifest path")
    detections_dir = body.get("detections_dir")
    config = PipelineConfig.from_dict(body.get("config", {}))
    providers = bundle_from_config(
        ProviderConfig(mode=config.provider_mode, retries=config.retries, max_inflight=config.max_inflight),
        body.get("fixtures"),
    )
    sessions = load_manifest(manifest_path)
    state.store.put_sessions(sessions)
    total_cards = 0
    failures = 0
    for session in sessions:
        frames = []
        if detections_dir:
            sidecar = Path(detections_dir) / f"{session.session_id}.jsonl"
            if sidecar.exists():
                frames = list(load_detection_sidecar(sidecar))
        analysis = analyze_session(session, providers, config, frames, state.taxonomy)
        state.store.put_cards(list(analysis.cards))
        total_cards += len(analysis.cards)
        failures += len(analysis.failures)
    return {"sessions": len(sessions), "cards": total_cards, "failed_segments": failures}


def default_auth() -> AuthProvider:
    """Single long-lived local token; good for desk use and tests only."""
    return AuthProvider(
        [
            ApiSession(
                user_id="operator",
                role="Supervisor",
                token="local-dev-token",
                expiry=datetime(2100, 1, 1, tzinfo=timezone.utc),
            )
        ]
    )


def build_state(
    store_path: Optional[str] = None,
    profiles_path: Optional[str] = None,
    auth: Optional[AuthProvider] = None,
    taxonomy: Optional[Taxonomy] = None,
) -> AppState:
    taxonomy = taxonomy or load_default_taxonomy()
    store = EventStore(store_path or os.environ.get(ENV_STORE_PATH), taxonomy=taxonomy)
    if profiles_path:
        store.put_profiles(read_profiles_jsonl(profiles_path))
    return AppState(store=store, auth=auth or default_auth(), taxonomy=taxonomy)
