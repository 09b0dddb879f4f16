"""Command-line interface: ingest, analyze, search, eval, serve, export.

Usage errors exit 2 (argparse); data/validation errors exit 1 with the reason
on stderr. Output ordering is deterministic so results can be diffed and
piped.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .descriptors import (
    collect_tracks,
    extract_profile,
    load_question_sets,
    merge_trajectories,
    verify_profile,
    write_merge_audit,
    write_profiles_jsonl,
    read_profiles_jsonl,
)
from .errors import EngineError
from .evaluation import (
    EvalConfig,
    format_report_table,
    report,
    write_report_files,
)
from .ingest import load_detection_sidecar, load_ground_truth, load_manifest
from .pipeline import (
    PipelineConfig,
    analyze_session,
    read_cards_jsonl,
    write_cards_jsonl,
)
from .providers import ProviderConfig, bundle_from_config
from .search import DescriptorQuery, build_index, query as run_query
from .store import EventStore
from .taxonomy import EntityCategory, load_default_taxonomy

ENV_STORE_PATH = "MRVS_STORE_PATH"


def _store_path(arg: Optional[str]) -> Optional[str]:
    return arg or os.environ.get(ENV_STORE_PATH)


def _cmd_ingest(args: argparse.Namespace) -> int:
    taxonomy = load_default_taxonomy()
    sessions = load_manifest(args.manifest)
    print(f"loaded {len(sessions)} sessions")
    if args.truth:
        events = load_ground_truth(args.truth, sessions, taxonomy)
        unmatched = sum(1 for e in events if e.unmatched)
        print(f"loaded {len(events)} ground-truth events ({unmatched} unmatched labels)")
    store_path = _store_path(args.store)
    if store_path:
        store = EventStore(store_path, taxonomy=taxonomy)
        store.put_sessions(sessions)
        print(f"stored sessions in {store_path}")
    return 0


def _parse_kv(pairs: Sequence[str], flag: str) -> dict[str, set[str]]:
    out: dict[str, set[str]] = {}
    for pair in pairs:
        if "=" not in pair:
            raise EngineError(f"{flag} expects attr=value, got {pair!r}")
        attr, _, value = pair.partition("=")
        out.setdefault(attr.strip(), set()).add(value.strip())
    return out


def _cmd_analyze(args: argparse.Namespace) -> int:
    taxonomy = load_default_taxonomy()
    config = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    if args.mode:
        config = PipelineConfig.from_dict({**_config_dict(config), "provider_mode": args.mode})
    providers = bundle_from_config(
        ProviderConfig(mode=config.provider_mode, retries=config.retries, max_inflight=config.max_inflight),
        args.fixtures,
    )
    sessions = load_manifest(args.manifest)
    question_sets = load_question_sets()

    all_cards = []
    all_profiles = []
    all_decisions = []
    failed_segments = 0
    for session in sessions:
        frames = []
        if args.detections:
            sidecar = Path(args.detections) / f"{session.session_id}.jsonl"
            if sidecar.exists():
                frames = list(load_detection_sidecar(sidecar))
        analysis = analyze_session(session, providers, config, frames, taxonomy)
        all_cards.extend(analysis.cards)
        failed_segments += len(analysis.failures)
        if args.profiles:
            profiles = []
            for track in collect_tracks(session.session_id, frames):
                if track.entity_class not in (EntityCategory.Person, EntityCategory.Vehicle):
                    continue
                if not any(ob.crop_uri for ob in track.observations):
                    continue
                profile = extract_profile(track, providers.describer, question_sets)
                profiles.append(verify_profile(profile, providers.describer))
            all_profiles.extend(profiles)

    if args.profiles and all_profiles:
        merged, decisions = merge_trajectories(all_profiles, providers.scorer)
        all_decisions.extend(decisions)
        all_profiles = merged

    out = args.out or "cards.jsonl"
    count = write_cards_jsonl(all_cards, out)
    print(f"wrote {count} cards to {out} ({failed_segments} analysis-failed segments)")
    if args.profiles:
        write_profiles_jsonl(all_profiles, args.profiles)
        print(f"wrote {len(all_profiles)} profiles to {args.profiles}")
        if args.merge_audit:
            write_merge_audit(all_decisions, args.merge_audit)
    store_path = _store_path(args.store)
    if store_path:
        store = EventStore(store_path, taxonomy=taxonomy)
        store.put_sessions(sessions)
        store.put_cards(all_cards)
        if args.profiles:
            store.put_profiles(all_profiles)
        print(f"stored results in {store_path}")
    return 0


def _config_dict(config: PipelineConfig) -> dict:
    return {name: getattr(config, name) for name in PipelineConfig.__dataclass_fields__}


def _cmd_search(args: argparse.Namespace) -> int:
    profiles = read_profiles_jsonl(args.profiles)
    taxonomy = load_default_taxonomy()
    cards = read_cards_jsonl(args.cards, taxonomy) if args.cards else []
    index = build_index(profiles, cards)
    q = DescriptorQuery(
        entity_class=EntityCategory.from_name(args.entity_class),
        include={k: frozenset(v) for k, v in _parse_kv(args.include, "--include").items()},
        exclude={k: frozenset(v) for k, v in _parse_kv(args.exclude, "--exclude").items()},
        sessions=frozenset(args.session) if args.session else None,
    )
    matches = run_query(q, index)
    print(json.dumps({"matches": [m.to_dict() for m in matches]}, indent=2, sort_keys=True))
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    taxonomy = load_default_taxonomy()
    sessions = load_manifest(args.manifest)
    events = load_ground_truth(args.truth, sessions, taxonomy)
    cards = read_cards_jsonl(args.cards, taxonomy)
    rows = report(
        sessions,
        cards,
        events,
        config=EvalConfig(),
        macro=args.macro,
        periods=args.period,
    )
    print(format_report_table(rows))
    write_report_files(rows, csv_path=args.csv, json_path=args.json_out)
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import build_state, create_app

    state = build_state(store_path=_store_path(args.store), profiles_path=args.profiles)
    app = create_app(state)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    store = EventStore(_store_path(args.store))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cards = store.export_cards(out_dir / "cards.jsonl")
    items = store.export_workspace(out_dir / "workspace.jsonl")
    print(f"exported {cards} cards and {items} workspace items to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patrolsense",
        description="Patrol-video event engine: analyze sessions, search descriptors, evaluate detections.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="validate and store a session manifest")
    p_ingest.add_argument("--manifest", required=True)
    p_ingest.add_argument("--truth")
    p_ingest.add_argument("--store")
    p_ingest.set_defaults(func=_cmd_ingest)

    p_analyze = sub.add_parser("analyze", help="run the event pipeline over a manifest")
    p_analyze.add_argument("--manifest", required=True)
    p_analyze.add_argument("--mode", choices=["mock", "live"])
    p_analyze.add_argument("--fixtures", help="mock provider fixture file")
    p_analyze.add_argument("--detections", help="directory of <session_id>.jsonl sidecars")
    p_analyze.add_argument("--config", help="pipeline config JSON")
    p_analyze.add_argument("--out", help="cards output path (default cards.jsonl)")
    p_analyze.add_argument("--profiles", help="also write descriptor profiles here")
    p_analyze.add_argument("--merge-audit", help="write merge decisions here")
    p_analyze.add_argument("--store")
    p_analyze.set_defaults(func=_cmd_analyze)

    p_search = sub.add_parser("search", help="descriptor search over extracted profiles")
    p_search.add_argument("--class", dest="entity_class", required=True)
    p_search.add_argument("--include", action="append", default=[], metavar="attr=value")
    p_search.add_argument("--exclude", action="append", default=[], metavar="attr=value")
    p_search.add_argument("--session", action="append", default=[])
    p_search.add_argument("--profiles", required=True)
    p_search.add_argument("--cards", help="cards file for evidence links")
    p_search.set_defaults(func=_cmd_search)

    p_eval = sub.add_parser("eval", help="segment-level detection metrics")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--truth", required=True)
    p_eval.add_argument("--cards", required=True)
    p_eval.add_argument("--macro", action="store_true", help="per-video macro averaging")
    p_eval.add_argument("--period", choices=["day", "night", "all"], default="all")
    p_eval.add_argument("--csv", help="write CSV report here")
    p_eval.add_argument("--json", dest="json_out", help="write JSON report here")
    p_eval.set_defaults(func=_cmd_eval)

    p_serve = sub.add_parser("serve", help="run the HTTP API")
    p_serve.add_argument("--store")
    p_serve.add_argument("--profiles")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8800)
    p_serve.set_defaults(func=_cmd_serve)

    p_export = sub.add_parser("export", help="dump cards and workspace as JSON-lines")
    p_export.add_argument("--store")
    p_export.add_argument("--out", required=True)
    p_export.set_defaults(func=_cmd_export)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
