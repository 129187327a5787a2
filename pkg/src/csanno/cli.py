"""Service binary: bootstrap, serve, and the corpus ingest/export/import
subcommands.

Exit codes: 0 on success, 1 on validation errors (bad data, schema
violations, domain rule breaches), 2 on I/O errors.
"""

from __future__ import annotations

import argparse
import getpass
import json
import os
import sys
from pathlib import Path

from .api import ServiceConfig, create_app
from .domain import Genre, LanguagePair, Role, UserAccount
from .errors import CsannoError
from .formats import (
    ExportConfig,
    export_xml,
    import_xml,
    ingest_forum,
    ingest_plain,
    ingest_twitter,
)
from .preprocess import CleanConfig, TaggerConfig
from .security import hash_password
from .storage import Store


def _open_store(data_dir: str) -> Store:
    path = Path(data_dir)
    path.mkdir(parents=True, exist_ok=True)
    return Store(path / "csanno.db")


def _superuser(store: Store) -> UserAccount:
    for user in store.list_users():
        if user.role is Role.SUPERUSER and user.active:
            return user
    raise CsannoError("no superuser account; run `csanno init` first")


def _tagger_config(args) -> TaggerConfig:
    kwargs = {}
    if getattr(args, "gazetteer", None):
        kwargs["gazetteer_file"] = args.gazetteer
    if getattr(args, "emoticons", None):
        kwargs["emoticon_file"] = args.emoticons
    return TaggerConfig.from_files(**kwargs)


def cmd_init(args) -> int:
    store = _open_store(args.data_dir)
    password = (
        args.superuser_password
        or os.environ.get("CSANNO_SUPERUSER_PASSWORD")
        or getpass.getpass("superuser password: ")
    )
    user = store.ensure_superuser(args.superuser_name, hash_password(password))
    print(f"superuser ready: {user.username} ({user.user_id})")
    if args.pair:
        primary, _, secondary = args.pair_languages.partition(":")
        store.create_pair(LanguagePair(args.pair, primary or "lang1", secondary or "lang2"))
        print(f"language pair created: {args.pair}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    config = ServiceConfig.from_env(
        os.environ,
        host=args.host,
        port=args.port,
        data_dir=args.data_dir,
        session_ttl_seconds=args.session_ttl,
    )
    ui_dir = args.ui_dir or os.environ.get("CSANNO_UI_DIR")
    if ui_dir is None and Path("frontend/index.html").exists():
        ui_dir = "frontend"
    store = _open_store(config.data_dir)
    app = create_app(store, config, ui_dir=ui_dir)
    if ui_dir:
        print(f"serving UI from {ui_dir} at /ui/")
    uvicorn.run(app, host=config.host, port=config.port)
    return 0


def cmd_ingest(args) -> int:
    store = _open_store(args.data_dir)
    _superuser(store)  # provenance requires a bootstrapped instance
    tagger = _tagger_config(args)
    clean = CleanConfig(source_encoding=args.encoding)
    path = Path(args.infile)
    raw = path.read_text(encoding="utf-8")
    if args.genre == "tweet":
        records = [json.loads(line) for line in raw.splitlines() if line.strip()]
        result = ingest_twitter(records, clean, tagger, pretag=not args.no_pretag)
    elif args.genre == "forum":
        result = ingest_forum(json.loads(raw), clean, tagger, pretag=not args.no_pretag)
    else:
        result = ingest_plain(
            raw.splitlines(), Genre(args.genre), clean, tagger, pretag=not args.no_pretag
        )
    store.add_units(args.pair, result.units)
    print(f"ingested {len(result.units)} units ({result.skipped} skipped)")
    return 0


def cmd_export(args) -> int:
    store = _open_store(args.data_dir)
    config = ExportConfig.parse(args.fields) if args.fields else ExportConfig()
    document = export_xml(store, args.scope, config)
    Path(args.out).write_bytes(document)
    print(f"wrote {args.out}")
    return 0


def cmd_import(args) -> int:
    store = _open_store(args.data_dir)
    superuser = _superuser(store)
    data = Path(args.infile).read_bytes()
    summary = import_xml(store, data, superuser)
    print(f"imported {summary.n_tasks} tasks, {summary.n_units} units, {summary.n_records} records")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csanno", description=__doc__)
    parser.add_argument(
        "--data-dir",
        default=os.environ.get("CSANNO_DATA_DIR", "./csanno-data"),
        help="directory holding the embedded database",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create the database and the superuser account")
    p.add_argument("--superuser-name", default="admin")
    p.add_argument("--superuser-password", default=None)
    p.add_argument("--pair", default=None, help="optionally create a language pair id")
    p.add_argument("--pair-languages", default="lang1:lang2", help="PRIMARY:SECONDARY codes")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--session-ttl", type=int, default=None)
    p.add_argument("--ui-dir", default=None, help="static directory to serve at /ui/")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("ingest", help="load a corpus file")
    p.add_argument(
        "--genre",
        required=True,
        choices=["tweet", "forum", "plain", "commentary", "conversation"],
    )
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--pair", required=True, help="language pair id the units belong to")
    p.add_argument("--encoding", default="utf-8")
    p.add_argument("--no-pretag", action="store_true")
    p.add_argument("--gazetteer", default=None, help="named-entity list, one per line")
    p.add_argument("--emoticons", default=None, help="emoticon inventory, one per line")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("export", help="write annotations as XML")
    p.add_argument("--scope", required=True, help="corpus | task:ID | assignment:ID")
    p.add_argument("--fields", default=None, help="comma-separated export fields")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("import", help="load an exported XML document")
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(func=cmd_import)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CsannoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
