"""Command-line front end.

Subcommands: ingest, emit, prompt, run, validate-sql, score, report.
Exit codes: 0 success, 1 task failure, 2 usage error. Results go to
stdout, diagnostics to stderr. Mock runs need no network or credentials;
live runs read the API key from the environment variable named by
--api-key-env, never from a flag.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import fixtures
from .errors import ComdbError
from .evaluate import execute_sql, render_report, render_summary, run_experiment, score_mapping
from .ingest import build_database, introspect_database, parse_annotations, parse_ddl, parse_fixture, render_fixture
from .llm import (
    ARMS,
    DEFAULT_JOIN_GOAL,
    TASK_INTEGRATION,
    TASK_JOINING,
    WITH_CONTEXT,
    WITHOUT_CONTEXT,
    ClientConfig,
    HttpChatClient,
    MockChatClient,
    build_integration_prompt,
    build_join_prompt,
)
from .mapping import parse_map_text
from .nl import ALPHABETICAL, INPUT_ORDER, StyleFlags, emit_base_schema, emit_contextual_schema
from .schema import validate_annotations, validate_schema

_TASKS = {"integration": TASK_INTEGRATION, "joining": TASK_JOINING}
_ARM_CHOICES = {"both": ARMS, "with": (WITH_CONTEXT,), "without": (WITHOUT_CONTEXT,)}
_DB_SUFFIXES = {".db", ".sqlite", ".sqlite3"}
_DDL_SUFFIXES = {".sql", ".ddl"}


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_schema_file(path: str, fmt: str = "auto"):
    if fmt == "auto":
        suffix = Path(path).suffix.lower()
        if suffix in _DB_SUFFIXES:
            fmt = "db"
        elif suffix in _DDL_SUFFIXES:
            fmt = "ddl"
        else:
            fmt = "fixture"
    if fmt == "db":
        return introspect_database(path)
    if fmt == "ddl":
        return parse_ddl(_read_text(path), name=Path(path).stem)
    return parse_fixture(_read_text(path), name=Path(path).stem)


def _write_output(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _style(args) -> StyleFlags:
    return StyleFlags(prefixed_header_groups=not args.plain_groups,
                      oxford_and=not args.no_oxford)


def _add_style_flags(parser):
    parser.add_argument("--plain-groups", action="store_true",
                        help="render header groups without the \"In table\" prefix")
    parser.add_argument("--no-oxford", action="store_true",
                        help="no 'and' before the last of three or more headers")


def cmd_ingest(args) -> int:
    schema = _load_schema_file(args.source, args.schema_format)
    validate_schema(schema)
    if args.to == "db":
        if not args.out:
            args.parser.error("--to db requires --out")
        build_database(schema, args.out)
        print(f"created {args.out} with {len(schema.tables)} tables", file=sys.stderr)
        return 0
    _write_output(render_fixture(schema), args.out)
    return 0


def cmd_emit(args) -> int:
    schema = validate_schema(_load_schema_file(args.schema, args.schema_format))
    text = emit_base_schema(schema, args.order)
    if args.annotations:
        ann = validate_annotations(parse_annotations(_read_text(args.annotations)),
                                   schema)
        text += "\n" + emit_contextual_schema(ann, _style(args))
    _write_output(text, args.out)
    return 0


def _integration_fixtures(args):
    schema_path = args.schema or fixtures.fixture_path(fixtures.PATIENTS_SCHEMA)
    ctx_path = args.ctx or fixtures.fixture_path(fixtures.PATIENTS_CONTEXT)
    schema = validate_schema(_load_schema_file(str(schema_path), args.schema_format))
    ann = validate_annotations(parse_annotations(_read_text(str(ctx_path))), schema)
    names = [t.name for t in schema.tables]
    name_a = args.table_a or names[0]
    name_b = args.table_b or names[1 if len(names) > 1 else 0]
    return schema.table(name_a), schema.table(name_b), ann


def _joining_fixtures(args):
    schema_path = args.schema or fixtures.fixture_path(fixtures.SYNTHEA_SCHEMA)
    ctx_path = args.ctx or fixtures.fixture_path(fixtures.SYNTHEA_CONTEXT)
    schema = validate_schema(_load_schema_file(str(schema_path), args.schema_format))
    ann = validate_annotations(parse_annotations(_read_text(str(ctx_path))), schema)
    return schema, ann


def cmd_prompt(args) -> int:
    task = _TASKS[args.task]
    arm = WITH_CONTEXT if args.arm == "with" else WITHOUT_CONTEXT
    if task == TASK_INTEGRATION:
        table_a, table_b, ann = _integration_fixtures(args)
        bundle = build_integration_prompt(
            table_a, table_b, ann if arm == WITH_CONTEXT else None, arm, _style(args))
    else:
        schema, ann = _joining_fixtures(args)
        bundle = build_join_prompt(
            schema, ann if arm == WITH_CONTEXT else None, args.goal, arm, _style(args))
    for message in bundle.messages:
        if len(bundle.messages) > 1:
            print(f"[{message.role}]")
        print(message.content)
    return 0


def cmd_run(args) -> int:
    task = _TASKS[args.task]
    if args.n < 1:
        args.parser.error("--n must be >= 1")
    if args.mock is None and args.endpoint is None:
        args.parser.error("one of --mock or --endpoint is required")
    if args.mock:
        records = json.loads(_read_text(args.mock))

        def client_factory():
            return MockChatClient(records)
    else:
        config = ClientConfig(endpoint_url=args.endpoint, model=args.model,
                              temperature=args.temperature, timeout=args.timeout,
                              max_retries=args.max_retries,
                              api_key_source=args.api_key_env)

        def client_factory():
            return HttpChatClient(config)

    kwargs = dict(arms=_ARM_CHOICES[args.arm], repetitions=args.n,
                  client_factory=client_factory, style=_style(args),
                  workers=args.workers)
    if task == TASK_INTEGRATION:
        if not args.gold:
            args.parser.error("--gold is required for --task integration")
        table_a, table_b, ann = _integration_fixtures(args)
        gold = parse_map_text(_read_text(args.gold), table_a.name, table_b.name)
        reports = run_experiment(task, table_a=table_a, table_b=table_b,
                                 annotations=ann, gold=gold, **kwargs)
    else:
        if not args.db:
            args.parser.error("--db is required for --task joining")
        schema, ann = _joining_fixtures(args)
        reports = run_experiment(task, schema=schema, annotations=ann,
                                 database=args.db, goal=args.goal, **kwargs)
    _write_output(render_report(reports), args.out)
    return 0


def cmd_validate_sql(args) -> int:
    sql = _read_text(args.sql_file) if args.sql_file else sys.stdin.read()
    report = execute_sql(sql, args.db)
    if report.success:
        cols = ", ".join(report.result_columns)
        print(f"ok: {report.row_count} rows, columns: {cols}")
        return 0
    print(f"failed: {report.error_text}")
    return 1


def cmd_score(args) -> int:
    predicted = parse_map_text(_read_text(args.predicted))
    gold = parse_map_text(_read_text(args.gold))
    score = score_mapping(predicted, gold)
    print(json.dumps({
        "matched": score.matched,
        "goldSize": score.gold_size,
        "predictedSize": score.predicted_size,
        "precision": score.precision,
        "recall": score.recall,
        "f1": score.f1,
    }, indent=2))
    return 0


def cmd_report(args) -> int:
    payload = json.loads(_read_text(args.report_file) if args.report_file
                         else sys.stdin.read())
    sys.stdout.write(render_summary(payload))
    return 0


def _add_schema_format(parser):
    parser.add_argument("--schema-format", choices=["auto", "fixture", "ddl", "db"],
                        default="auto", help="how to read the schema source")


def _add_task_fixture_flags(parser):
    parser.add_argument("--schema", help="schema file (default: bundled fixture)")
    parser.add_argument("--ctx", help="annotation file (default: bundled fixture)")
    parser.add_argument("--table-a", help="source table for integration")
    parser.add_argument("--table-b", help="target table for integration")
    parser.add_argument("--goal", default=DEFAULT_JOIN_GOAL,
                        help="joining goal sentence")
    _add_schema_format(parser)
    _add_style_flags(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="comdb",
        description="Natural-language schema representations and the two "
                    "database-management experiments built on them.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ingest", help="read a schema source, write it back out")
    p.add_argument("source", help="schema file (.schema, .sql/.ddl, or SQLite)")
    p.add_argument("--to", choices=["fixture", "db"], default="fixture")
    p.add_argument("--out", help="output path (required for --to db)")
    _add_schema_format(p)
    p.set_defaults(func=cmd_ingest, parser=p)

    p = sub.add_parser("emit", help="render the natural-language schema forms")
    p.add_argument("schema", help="schema file")
    p.add_argument("annotations", nargs="?", help="annotation file (.ctx)")
    p.add_argument("--order", choices=[ALPHABETICAL, INPUT_ORDER],
                   default=ALPHABETICAL)
    p.add_argument("--out")
    _add_schema_format(p)
    _add_style_flags(p)
    p.set_defaults(func=cmd_emit, parser=p)

    p = sub.add_parser("prompt", help="print the prompt for one task and arm")
    p.add_argument("--task", choices=sorted(_TASKS), required=True)
    p.add_argument("--arm", choices=["with", "without"], default="with")
    _add_task_fixture_flags(p)
    p.set_defaults(func=cmd_prompt, parser=p)

    p = sub.add_parser("run", help="run an experiment and write the JSON report")
    p.add_argument("--task", choices=sorted(_TASKS), required=True)
    p.add_argument("--arm", choices=sorted(_ARM_CHOICES), default="both")
    p.add_argument("--n", type=int, default=10, help="repetitions per arm")
    p.add_argument("--mock", help="mock script (.mockjson); offline run")
    p.add_argument("--endpoint", help="chat-completion endpoint base URL")
    p.add_argument("--model", default="gpt-3.5-turbo")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--max-retries", type=int, default=2)
    p.add_argument("--api-key-env", default="COMDB_API_KEY",
                   help="environment variable holding the API key")
    p.add_argument("--db", help="SQLite fixture (required for joining)")
    p.add_argument("--gold", help="gold mapping file (required for integration)")
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--workers", type=int, default=1)
    _add_task_fixture_flags(p)
    p.set_defaults(func=cmd_run, parser=p)

    p = sub.add_parser("validate-sql", help="execute SQL read-only against a fixture db")
    p.add_argument("--db", required=True)
    p.add_argument("sql_file", nargs="?", help="SQL file (default: stdin)")
    p.set_defaults(func=cmd_validate_sql, parser=p)

    p = sub.add_parser("score", help="score a predicted mapping against gold")
    p.add_argument("--predicted", required=True)
    p.add_argument("--gold", required=True)
    p.set_defaults(func=cmd_score, parser=p)

    p = sub.add_parser("report", help="summarize a report JSON")
    p.add_argument("report_file", nargs="?", help="report path (default: stdin)")
    p.set_defaults(func=cmd_report, parser=p)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ComdbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc}", file=sys.stderr)
        return 1
    except FileExistsError as exc:
        print(f"error: refusing to overwrite existing file: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
