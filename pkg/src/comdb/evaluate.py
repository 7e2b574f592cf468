"""Score mappings, validate SQL by execution, and run the two-arm protocol.

An experiment runs one task over one or both arms, N repetitions each
(the protocol default is 10). Every repetition builds the prompt, asks
the client, parses the answer, and either scores the mapping against
gold (semantic integration) or executes the SQL against the fixture
database (tables joining). Failed repetitions are recorded and score
zero; they never abort the experiment, so aggregates stay comparable
across arms.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import sqlite3
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import llm
from .errors import ComdbError, ConfigError, FixtureMissing, TableMismatch, WriteAttempt
from .ingest import _readonly_uri
from .mapping import HeaderMapping
from .nl import DEFAULT_STYLE, StyleFlags
from .schema import TableSchema, ValidatedAnnotations, ValidatedSchema


@dataclass(frozen=True)
class MappingScore:
    matched: int
    gold_size: int
    predicted_size: int
    precision: float
    recall: float
    f1: float


ZERO_SCORE = MappingScore(0, 0, 0, 0.0, 0.0, 0.0)


def score_mapping(predicted: HeaderMapping, gold: HeaderMapping) -> MappingScore:
    """Exact-entry scoring: a predicted entry counts iff both its header
    sets equal a gold entry's sets after normalization. Partial overlap
    (e.g. covering one of four gold target headers) earns nothing."""
    if (predicted.source_table and gold.source_table
            and (predicted.source_table, predicted.target_table)
            != (gold.source_table, gold.target_table)):
        raise TableMismatch((predicted.source_table, predicted.target_table),
                            (gold.source_table, gold.target_table))
    gold_entries = {e.normalized() for e in gold.entries}
    matched = sum(1 for e in predicted.entries if e.normalized() in gold_entries)
    predicted_size = len(predicted.entries)
    gold_size = len(gold.entries)
    precision = matched / predicted_size if predicted_size else 0.0
    recall = matched / gold_size if gold_size else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MappingScore(matched, gold_size, predicted_size, precision, recall, f1)


@dataclass(frozen=True)
class SqlValidationReport:
    success: bool
    error_text: str | None
    result_columns: tuple[str, ...]
    row_count: int

    def __post_init__(self):
        object.__setattr__(self, "result_columns", tuple(self.result_columns))
        assert self.success == (self.error_text is None)


_COMMENT_OR_WS = re.compile(r"(?:\s+|--[^\n]*(?:\n|$)|/\*.*?\*/)+", re.DOTALL)
_FIRST_WORD = re.compile(r"[A-Za-z]+")
_READONLY_KEYWORDS = {"SELECT", "WITH", "VALUES", "EXPLAIN"}


def _statement_kind(sql: str) -> str | None:
    pos = 0
    m = _COMMENT_OR_WS.match(sql, pos)
    while m and m.end() > pos:
        pos = m.end()
        m = _COMMENT_OR_WS.match(sql, pos)
    word = _FIRST_WORD.match(sql, pos)
    return word.group().upper() if word else None


def execute_sql(sql: str, database_location) -> SqlValidationReport:
    """Run one read-only statement against an SQLite file and report the
    outcome. Engine errors come back verbatim in error_text. Statements
    that open with a write/DDL keyword are rejected with WriteAttempt
    before touching the engine; the read-only connection backstops
    anything sneakier.
    """
    path = os.fspath(database_location)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    kind = _statement_kind(sql)
    if kind is None:
        # SQLite treats empty input as a no-op, so reject it ourselves.
        return SqlValidationReport(False, "empty statement: no SQL found in input",
                                   (), 0)
    if kind not in _READONLY_KEYWORDS:
        raise WriteAttempt(kind)
    con = sqlite3.connect(_readonly_uri(path), uri=True)
    try:
        cursor = con.execute(sql)
        columns = tuple(d[0] for d in cursor.description) if cursor.description else ()
        rows = cursor.fetchall()
        return SqlValidationReport(True, None, columns, len(rows))
    except sqlite3.Error as exc:
        return SqlValidationReport(False, str(exc), (), 0)
    finally:
        con.close()


@dataclass(frozen=True)
class RunRecord:
    ok: bool
    prompt_sha256: str
    response_sha256: str | None = None
    error: str | None = None
    score: MappingScore | None = None
    sql: str | None = None
    sql_report: SqlValidationReport | None = None
    mapping: HeaderMapping | None = None


@dataclass(frozen=True)
class ExperimentReport:
    task: str
    arm: str
    n: int
    runs: tuple[RunRecord, ...]
    aggregate: dict

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple(self.runs))
        assert len(self.runs) == self.n


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _integration_run(bundle, client, repetition, table_a, table_b, gold):
    prompt_hash = _sha256(bundle.user_text)
    try:
        resp = client.complete(bundle, repetition=repetition)
    except ComdbError as exc:
        return RunRecord(False, prompt_hash, error=str(exc),
                         score=MappingScore(0, len(gold.entries), 0, 0.0, 0.0, 0.0))
    response_hash = _sha256(resp.raw_text)
    try:
        predicted = llm.parse_mapping_response(resp, table_a, table_b)
    except ComdbError as exc:
        return RunRecord(False, prompt_hash, response_hash, error=str(exc),
                         score=MappingScore(0, len(gold.entries), 0, 0.0, 0.0, 0.0))
    score = score_mapping(predicted, gold)
    return RunRecord(True, prompt_hash, response_hash, score=score,
                     mapping=predicted)


def _joining_run(bundle, client, repetition, database):
    prompt_hash = _sha256(bundle.user_text)
    try:
        resp = client.complete(bundle, repetition=repetition)
    except ComdbError as exc:
        return RunRecord(False, prompt_hash, error=str(exc))
    response_hash = _sha256(resp.raw_text)
    try:
        sql = llm.extract_sql(resp)
    except ComdbError as exc:
        return RunRecord(False, prompt_hash, response_hash, error=str(exc))
    try:
        report = execute_sql(sql, database)
    except WriteAttempt as exc:
        return RunRecord(False, prompt_hash, response_hash, error=str(exc), sql=sql)
    return RunRecord(report.success, prompt_hash, response_hash,
                     error=report.error_text, sql=sql, sql_report=report)


def _mean(values) -> float:
    values = list(values)
    return sum(values) / len(values) if values else 0.0


def run_experiment(task: str, *,
                   arms=llm.ARMS,
                   repetitions: int = 10,
                   client_factory,
                   table_a: TableSchema | None = None,
                   table_b: TableSchema | None = None,
                   annotations: ValidatedAnnotations | None = None,
                   gold: HeaderMapping | None = None,
                   schema: ValidatedSchema | None = None,
                   database=None,
                   goal: str = llm.DEFAULT_JOIN_GOAL,
                   style: StyleFlags = DEFAULT_STYLE,
                   workers: int = 1) -> list[ExperimentReport]:
    """Run one task over the requested arms, N repetitions per arm.

    client_factory is called once per repetition so that concurrent
    workers never share a client handle.
    """
    if repetitions <= 0:
        raise ConfigError("repetitions must be >= 1")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    if task not in (llm.TASK_INTEGRATION, llm.TASK_JOINING):
        raise ConfigError(f"unknown task {task!r}")
    for arm in arms:
        if arm not in llm.ARMS:
            raise ConfigError(f"unknown arm {arm!r}")
    if task == llm.TASK_INTEGRATION:
        if table_a is None or table_b is None:
            raise FixtureMissing("both tables for semantic integration")
        if gold is None:
            raise FixtureMissing("gold mapping for semantic integration")
    else:
        if schema is None:
            raise FixtureMissing("database schema for tables joining")
        if database is None:
            raise FixtureMissing("database file for tables joining")
        if not os.path.exists(os.fspath(database)):
            raise FixtureMissing(f"database file {database}")
    if llm.WITH_CONTEXT in arms and annotations is None:
        raise FixtureMissing("annotations for the with-context arm")

    reports = []
    for arm in arms:
        if task == llm.TASK_INTEGRATION:
            bundle = llm.build_integration_prompt(
                table_a, table_b, annotations if arm == llm.WITH_CONTEXT else None,
                arm, style)

            def one_run(rep, bundle=bundle):
                return _integration_run(bundle, client_factory(), rep,
                                        table_a, table_b, gold)
        else:
            bundle = llm.build_join_prompt(
                schema, annotations if arm == llm.WITH_CONTEXT else None,
                goal, arm, style)

            def one_run(rep, bundle=bundle):
                return _joining_run(bundle, client_factory(), rep, database)

        if workers == 1:
            runs = [one_run(rep) for rep in range(repetitions)]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                runs = list(pool.map(one_run, range(repetitions)))

        aggregate = {"successRate": _mean(r.ok for r in runs)}
        if task == llm.TASK_INTEGRATION:
            aggregate["meanPrecision"] = _mean(r.score.precision for r in runs)
            aggregate["meanRecall"] = _mean(r.score.recall for r in runs)
            aggregate["meanF1"] = _mean(r.score.f1 for r in runs)
        reports.append(ExperimentReport(task, arm, repetitions, tuple(runs),
                                        aggregate))
    return reports


def report_payload(reports) -> dict:
    experiments = []
    for report in reports:
        runs = []
        for run in report.runs:
            entry = {"ok": run.ok}
            if report.task == llm.TASK_INTEGRATION:
                score = run.score or ZERO_SCORE
                entry["precision"] = score.precision
                entry["recall"] = score.recall
                entry["f1"] = score.f1
            else:
                entry["sqlSuccess"] = run.ok
            if run.error is not None:
                entry["error"] = run.error
            entry["promptSha256"] = run.prompt_sha256
            entry["responseSha256"] = run.response_sha256
            runs.append(entry)
        experiments.append({
            "task": report.task,
            "arm": report.arm,
            "n": report.n,
            "runs": runs,
            "aggregate": dict(report.aggregate),
        })
    return {"experiments": experiments}


def render_report(reports) -> str:
    """Machine-readable report JSON with stable key order."""
    return json.dumps(report_payload(reports), indent=2) + "\n"


def render_summary(payload: dict) -> str:
    """Short human-readable digest of a report payload."""
    lines = []
    for experiment in payload.get("experiments", []):
        agg = experiment.get("aggregate", {})
        parts = [f"{experiment['task']} / {experiment['arm']}:",
                 f"n={experiment['n']}",
                 f"successRate={agg.get('successRate', 0.0):.2f}"]
        if "meanRecall" in agg:
            parts.append(f"precision={agg['meanPrecision']:.2f}")
            parts.append(f"recall={agg['meanRecall']:.2f}")
            parts.append(f"f1={agg['meanF1']:.2f}")
        lines.append(" ".join(parts))
    if not lines:
        return "no experiments\n"
    return "\n".join(lines) + "\n"
