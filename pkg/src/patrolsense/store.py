"""Embedded spatiotemporal event store plus personal/team workspace.

Persistence is one JSON-lines file holding typed records (sessions, cards,
profiles, workspace items) — desk-scale, auditable with a pager, no external
database. Mutations are serialized through a single writer lock and flushed
atomically; readers always see consistent snapshots. Every workspace
mutation appends to an item's history; history never shrinks.
"""
from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .descriptors import DescriptorProfile, profile_from_dict
from .errors import StoreError, ValidationError
from .ingest import PatrolSession, Period, parse_session
from .pipeline import CardStatus, EventCard, canonical_json, card_from_dict
from .segments import overlap_ms
from .taxonomy import EntityCategory, PriorityLevel, Taxonomy


class WorkspaceScope(Enum):
    Personal = "Personal"
    Team = "Team"

    @classmethod
    def from_name(cls, name: str) -> "WorkspaceScope":
        try:
            return cls[name.strip().capitalize()]
        except KeyError:
            raise ValidationError(f"unknown workspace scope {name!r}") from None


@dataclass(frozen=True)
class HistoryEntry:
    actor: str
    action: str
    at: datetime

    def to_dict(self) -> dict:
        return {
            "actor": self.actor,
            "action": self.action,
            "at": self.at.isoformat().replace("+00:00", "Z"),
        }


@dataclass(frozen=True)
class WorkspaceItem:
    item_id: str
    card_id: str
    owner: str
    scope: WorkspaceScope
    note: str
    status: CardStatus
    assignee: Optional[str] = None
    case_number: Optional[str] = None
    history: tuple[HistoryEntry, ...] = ()

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "card_id": self.card_id,
            "owner": self.owner,
            "scope": self.scope.value,
            "note": self.note,
            "status": self.status.value,
            "assignee": self.assignee,
            "case_number": self.case_number,
            "history": [h.to_dict() for h in self.history],
        }


def _item_from_dict(raw: dict) -> WorkspaceItem:
    history = tuple(
        HistoryEntry(
            actor=str(h["actor"]),
            action=str(h["action"]),
            at=datetime.fromisoformat(str(h["at"]).replace("Z", "+00:00")),
        )
        for h in raw.get("history", [])
    )
    return WorkspaceItem(
        item_id=str(raw["item_id"]),
        card_id=str(raw["card_id"]),
        owner=str(raw["owner"]),
        scope=WorkspaceScope.from_name(str(raw["scope"])),
        note=str(raw.get("note", "")),
        status=CardStatus.from_name(str(raw["status"])),
        assignee=raw.get("assignee"),
        case_number=raw.get("case_number"),
        history=history,
    )


@dataclass(frozen=True)
class User:
    user_id: str
    team_id: str
    role: str  # Investigator | Supervisor


@dataclass(frozen=True)
class TimelineLane:
    session_id: str
    entries: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {"session_id": self.session_id, "entries": [dict(e) for e in self.entries]}


@dataclass(frozen=True)
class EventFilter:
    """Conjunction of optional constraints over stored cards."""

    time_range: Optional[tuple[int, int]] = None
    sessions: Optional[frozenset[str]] = None
    priorities: Optional[frozenset[PriorityLevel]] = None
    eoi_types: Optional[frozenset[str]] = None  # canonical names
    statuses: Optional[frozenset[CardStatus]] = None
    period: Optional[Period] = None
    unclassified_only: bool = False

    @classmethod
    def from_dict(cls, raw: dict) -> "EventFilter":
        time_range = None
        if raw.get("time_range") is not None:
            lo, hi = raw["time_range"]
            time_range = (int(lo), int(hi))
        return cls(
            time_range=time_range,
            sessions=frozenset(map(str, raw["sessions"])) if raw.get("sessions") else None,
            priorities=frozenset(PriorityLevel.from_name(p) for p in raw["priorities"])
            if raw.get("priorities")
            else None,
            eoi_types=frozenset(map(str, raw["eoi_types"])) if raw.get("eoi_types") else None,
            statuses=frozenset(CardStatus.from_name(s) for s in raw["statuses"])
            if raw.get("statuses")
            else None,
            period=Period.from_name(raw["period"]) if raw.get("period") else None,
            unclassified_only=bool(raw.get("unclassified_only", False)),
        )


def load_palette() -> dict[str, str]:
    doc = json.loads(
        resources.files("patrolsense").joinpath("assets/palette.json").read_text(encoding="utf-8")
    )
    return dict(doc["priority_colors"])


def icon_category(card: EventCard) -> EntityCategory:
    """Map icon for a card: the entity category of its event type."""
    return card.eoi.entity_category if card.eoi else EntityCategory.Other


def _priority_sort_ordinal(card: EventCard) -> int:
    # Unclassified cards sort after every real priority level.
    return card.priority.value if card.priority is not None else len(PriorityLevel)


class EventStore:
    """Single-writer, multi-reader store for sessions, cards, profiles, and
    workspace items."""

    def __init__(self, path: Optional[Union[str, Path]] = None, taxonomy: Optional[Taxonomy] = None):
        from .taxonomy import load_default_taxonomy

        self._taxonomy = taxonomy or load_default_taxonomy()
        self._path = Path(path) if path else None
        self._lock = threading.RLock()
        self._sessions: dict[str, PatrolSession] = {}
        self._cards: dict[str, EventCard] = {}
        self._profiles: dict[str, DescriptorProfile] = {}
        self._items: dict[str, WorkspaceItem] = {}
        self._users: dict[str, User] = {}
        if self._path and self._path.exists():
            self._load()

    # -- persistence ---------------------------------------------------------

    def _load(self) -> None:
        with open(self._path, "r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    raw = json.loads(line)
                    kind = raw.pop("kind")
                except (json.JSONDecodeError, KeyError):
                    raise StoreError(f"{self._path}:{lineno}: malformed record") from None
                if kind == "session":
                    session = parse_session(raw)
                    self._sessions[session.session_id] = session
                elif kind == "card":
                    card = card_from_dict(raw, self._taxonomy)
                    self._cards[card.card_id] = card
                elif kind == "profile":
                    profile = profile_from_dict(raw)
                    self._profiles[profile.entity_id] = profile
                elif kind == "workspace_item":
                    item = _item_from_dict(raw)
                    self._items[item.item_id] = item
                elif kind == "user":
                    self._users[raw["user_id"]] = User(
                        user_id=str(raw["user_id"]),
                        team_id=str(raw["team_id"]),
                        role=str(raw.get("role", "Investigator")),
                    )
                else:
                    raise StoreError(f"{self._path}:{lineno}: unknown record kind {kind!r}")

    def _flush(self) -> None:
        if self._path is None:
            return
        tmp = self._path.with_suffix(self._path.suffix + ".tmp")
        with open(tmp, "w", encoding="utf-8") as handle:
            for sid in sorted(self._sessions):
                handle.write(canonical_json({"kind": "session", **self._sessions[sid].to_dict()}) + "\n")
            for cid in sorted(self._cards):
                handle.write(canonical_json({"kind": "card", **self._cards[cid].to_dict()}) + "\n")
            for eid in sorted(self._profiles):
                handle.write(canonical_json({"kind": "profile", **self._profiles[eid].to_dict()}) + "\n")
            for iid in sorted(self._items):
                handle.write(canonical_json({"kind": "workspace_item", **self._items[iid].to_dict()}) + "\n")
            for uid in sorted(self._users):
                user = self._users[uid]
                handle.write(
                    canonical_json(
                        {"kind": "user", "user_id": user.user_id, "team_id": user.team_id, "role": user.role}
                    )
                    + "\n"
                )
        os.replace(tmp, self._path)

    # -- sessions / users ----------------------------------------------------

    def put_sessions(self, sessions: Iterable[PatrolSession]) -> int:
        with self._lock:
            count = 0
            for session in sessions:
                self._sessions[session.session_id] = session
                count += 1
            self._flush()
            return count

    def sessions(self) -> list[PatrolSession]:
        with self._lock:
            return sorted(
                self._sessions.values(), key=lambda s: (s.period.value, s.robot_id, s.session_id)
            )

    def get_session(self, session_id: str) -> PatrolSession:
        with self._lock:
            try:
                return self._sessions[session_id]
            except KeyError:
                raise StoreError(f"unknown session {session_id!r}") from None

    def put_users(self, users: Iterable[User]) -> int:
        with self._lock:
            count = 0
            for user in users:
                self._users[user.user_id] = user
                count += 1
            self._flush()
            return count

    def get_user(self, user_id: str) -> User:
        with self._lock:
            try:
                return self._users[user_id]
            except KeyError:
                raise StoreError(f"unknown user {user_id!r}") from None

    # -- cards ----------------------------------------------------------------

    def put_cards(self, cards: Sequence[EventCard]) -> int:
        """Idempotent upsert keyed by card_id; the batch itself must be unique."""
        ids = [c.card_id for c in cards]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate card_id in batch: {dupes}")
        with self._lock:
            for card in cards:
                self._cards[card.card_id] = card
            self._flush()
            return len(cards)

    def get_card(self, card_id: str) -> EventCard:
        with self._lock:
            try:
                return self._cards[card_id]
            except KeyError:
                raise StoreError(f"unknown card {card_id!r}") from None

    def card_count(self) -> int:
        with self._lock:
            return len(self._cards)

    def _card_matches(self, card: EventCard, f: EventFilter) -> bool:
        if f.time_range is not None:
            lo, hi = f.time_range
            if overlap_ms(card.span[0], card.span[1], lo, hi) <= 0:
                return False
        if f.sessions is not None and card.session_id not in f.sessions:
            return False
        if f.priorities is not None and (card.priority is None or card.priority not in f.priorities):
            return False
        if f.eoi_types is not None and (card.eoi is None or card.eoi.name not in f.eoi_types):
            return False
        if f.statuses is not None and card.status not in f.statuses:
            return False
        if f.unclassified_only and card.eoi is not None:
            return False
        if f.period is not None:
            session = self._sessions.get(card.session_id)
            if session is None or session.period != f.period:
                return False
        return True

    def query_events(self, f: Optional[EventFilter] = None) -> list[EventCard]:
        """Cards satisfying the filter conjunction, priority-then-time ordered."""
        f = f or EventFilter()
        with self._lock:
            hits = [c for c in self._cards.values() if self._card_matches(c, f)]
        hits.sort(key=lambda c: (_priority_sort_ordinal(c), c.span[0], c.card_id))
        return hits

    def query_region(
        self, geo_box: tuple[float, float, float, float], f: Optional[EventFilter] = None
    ) -> list[EventCard]:
        """Cards whose pose lies inside the box (inclusive bounds)."""
        lat_min, lon_min, lat_max, lon_max = geo_box
        if lat_min > lat_max or lon_min > lon_max:
            raise ValidationError(f"inverted geo box {geo_box}")
        cards = self.query_events(f)
        return [
            card
            for card in cards
            if lat_min <= card.pose[0] <= lat_max and lon_min <= card.pose[1] <= lon_max
        ]

    def timeline(self, f: Optional[EventFilter] = None) -> list[TimelineLane]:
        """One color-coded lane per session passing the filter."""
        f = f or EventFilter()
        palette = load_palette()
        cards = self.query_events(f)
        with self._lock:
            session_ids = [
                s.session_id
                for s in self.sessions()
                if (f.sessions is None or s.session_id in f.sessions)
                and (f.period is None or s.period == f.period)
            ]
        by_session: dict[str, list[EventCard]] = {sid: [] for sid in session_ids}
        for card in cards:
            if card.session_id in by_session:
                by_session[card.session_id].append(card)
        lanes = []
        for sid in session_ids:
            entries = []
            for card in sorted(by_session[sid], key=lambda c: (c.span[0], c.card_id)):
                label = card.eoi.name if card.eoi else card.label_text
                priority = card.priority.name if card.priority is not None else None
                entries.append(
                    {
                        "card_id": card.card_id,
                        "span": {"start_ms": card.span[0], "end_ms": card.span[1]},
                        "eoi": label,
                        "unmatched": card.eoi is None,
                        "priority": priority,
                        "color": palette.get(priority or "Unclassified", palette["Unclassified"]),
                    }
                )
            lanes.append(TimelineLane(session_id=sid, entries=tuple(entries)))
        return lanes

    # -- profiles --------------------------------------------------------------

    def put_profiles(self, profiles: Sequence[DescriptorProfile]) -> int:
        with self._lock:
            for profile in profiles:
                self._profiles[profile.entity_id] = profile
            self._flush()
            return len(profiles)

    def profiles(self) -> list[DescriptorProfile]:
        with self._lock:
            return [self._profiles[eid] for eid in sorted(self._profiles)]

    # -- workspace --------------------------------------------------------------

    def _now(self) -> datetime:
        return datetime.now(timezone.utc)

    def workspace_save(
        self,
        card_id: str,
        owner: str,
        scope: Union[WorkspaceScope, str],
        note: str = "",
        case_number: Optional[str] = None,
    ) -> WorkspaceItem:
        scope = scope if isinstance(scope, WorkspaceScope) else WorkspaceScope.from_name(scope)
        with self._lock:
            if card_id not in self._cards:
                raise StoreError(f"unknown card {card_id!r}")
            item = WorkspaceItem(
                item_id=uuid.uuid4().hex[:12],
                card_id=card_id,
                owner=owner,
                scope=scope,
                note=note,
                status=CardStatus.Saved,
                case_number=case_number,
                history=(HistoryEntry(actor=owner, action="save", at=self._now()),),
            )
            self._items[item.item_id] = item
            self._flush()
            return item

    def workspace_set_status(
        self, item_id: str, actor: str, status: Union[CardStatus, str]
    ) -> WorkspaceItem:
        status = status if isinstance(status, CardStatus) else CardStatus.from_name(status)
        with self._lock:
            item = self._get_item(item_id)
            updated = replace(
                item,
                status=status,
                history=item.history
                + (HistoryEntry(actor=actor, action=f"status:{status.value}", at=self._now()),),
            )
            self._items[item_id] = updated
            self._flush()
            return updated

    def workspace_annotate(self, item_id: str, actor: str, note: str) -> WorkspaceItem:
        with self._lock:
            item = self._get_item(item_id)
            updated = replace(
                item,
                note=note,
                history=item.history + (HistoryEntry(actor=actor, action="annotate", at=self._now()),),
            )
            self._items[item_id] = updated
            self._flush()
            return updated

    def workspace_assign(self, item_id: str, actor: str, assignee: str) -> WorkspaceItem:
        with self._lock:
            item = self._get_item(item_id)
            updated = replace(
                item,
                assignee=assignee,
                history=item.history
                + (HistoryEntry(actor=actor, action=f"assign:{assignee}", at=self._now()),),
            )
            self._items[item_id] = updated
            self._flush()
            return updated

    def _get_item(self, item_id: str) -> WorkspaceItem:
        try:
            return self._items[item_id]
        except KeyError:
            raise StoreError(f"unknown workspace item {item_id!r}") from None

    def get_item(self, item_id: str) -> WorkspaceItem:
        with self._lock:
            return self._get_item(item_id)

    def workspace_list(
        self,
        user_id: str,
        scope: Optional[WorkspaceScope] = None,
        statuses: Optional[frozenset[CardStatus]] = None,
    ) -> list[WorkspaceItem]:
        """Items visible to a user: their personal items plus team-scope items."""
        with self._lock:
            items = []
            for item in self._items.values():
                visible = (
                    item.owner == user_id
                    if item.scope == WorkspaceScope.Personal
                    else True
                )
                if not visible:
                    continue
                if scope is not None and item.scope != scope:
                    continue
                if statuses is not None and item.status not in statuses:
                    continue
                items.append(item)
        items.sort(key=lambda i: (i.history[0].at.isoformat(), i.item_id))
        return items

    # -- export / import ---------------------------------------------------------

    def export_cards(self, path: Union[str, Path]) -> int:
        with self._lock:
            cards = [self._cards[cid] for cid in sorted(self._cards)]
        with open(path, "w", encoding="utf-8") as handle:
            for card in cards:
                handle.write(canonical_json(card.to_dict()) + "\n")
        return len(cards)

    def export_workspace(self, path: Union[str, Path]) -> int:
        with self._lock:
            items = [self._items[iid] for iid in sorted(self._items)]
        with open(path, "w", encoding="utf-8") as handle:
            for item in items:
                handle.write(canonical_json(item.to_dict()) + "\n")
        return len(items)

    def import_cards(self, path: Union[str, Path]) -> int:
        cards = []
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    cards.append(card_from_dict(json.loads(line), self._taxonomy))
        return self.put_cards(cards)

    def import_workspace(self, path: Union[str, Path]) -> int:
        with open(path, "r", encoding="utf-8") as handle:
            items = [_item_from_dict(json.loads(line)) for line in handle if line.strip()]
        with self._lock:
            for item in items:
                self._items[item.item_id] = item
            self._flush()
            return len(items)

    def snapshot_state(self) -> dict:
        """Canonical dump for idempotence checks and tests."""
        with self._lock:
            return {
                "sessions": {k: v.to_dict() for k, v in sorted(self._sessions.items())},
                "cards": {k: v.to_dict() for k, v in sorted(self._cards.items())},
                "profiles": {k: v.to_dict() for k, v in sorted(self._profiles.items())},
                "items": {k: v.to_dict() for k, v in sorted(self._items.items())},
            }
