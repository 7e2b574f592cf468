"""Prompt construction, chat-completion clients, and response parsing.

Two tasks are supported. Semantic integration asks the model to match
headers between two tables; tables joining asks it to write a SQL query
over the whole database. Each task builds in two arms: with-context
prompts include the contextual (context-of) sentences, without-context
prompts carry the bare header lists only. Prompts are pure functions of
schema + annotations + fixed task text, so they can never leak row data.

Clients are pluggable: HttpChatClient speaks the common JSON
chat-completions protocol, MockChatClient replays a scripted response per
(task, arm, repetition) for offline, deterministic runs.
"""

from __future__ import annotations

import json
import os
import random
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import requests

from .errors import (
    ApiError,
    ConfigError,
    MissingAnnotations,
    MissingCredentials,
    NoMappingFound,
    NoSqlFound,
    Timeout,
    TransportError,
)
from .mapping import HeaderMapping, MappingEntry
from .nl import DEFAULT_STYLE, INPUT_ORDER, StyleFlags, emit_base_schema, emit_contextual_schema
from .schema import (
    DatabaseSchema,
    OntologyAnnotations,
    TableSchema,
    ValidatedAnnotations,
    ValidatedSchema,
    validate_annotations,
    validate_schema,
)

TASK_INTEGRATION = "semantic-integration"
TASK_JOINING = "tables-joining"
WITH_CONTEXT = "with-context"
WITHOUT_CONTEXT = "without-context"
ARMS = (WITH_CONTEXT, WITHOUT_CONTEXT)

INTEGRATION_TASK_TEMPLATE = (
    "Identify the headers from table '{a}' and table '{b}' which contain the "
    "same information. Some headers may need to be combined or split."
)

DEFAULT_JOIN_GOAL = (
    "To create a SQL query that generates a list of careplans, with "
    "corresponding providers' and patients' identity information."
)

MAPPING_DIRECTIVE_TEMPLATE = (
    "Write the final mapping inside one fenced code block, one entry per "
    "line, as: <headers from '{a}'> -> <headers from '{b}'>. Join several "
    "headers on one side with ' + '. Use only header names that appear in "
    "the tables, and put nothing else inside the block."
)

SQL_DIRECTIVE = (
    "Write the complete SQL query inside one fenced code block, with "
    "nothing else inside the block."
)


@dataclass(frozen=True)
class Message:
    role: str
    content: str


@dataclass(frozen=True)
class PromptBundle:
    task: str
    arm: str
    messages: tuple[Message, ...]
    format_directive: str

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))

    @property
    def user_text(self) -> str:
        for message in self.messages:
            if message.role == "user":
                return message.content
        return ""


@dataclass(frozen=True)
class LLMResponse:
    raw_text: str
    latency_ms: float
    client_id: str


@dataclass(frozen=True)
class ClientConfig:
    endpoint_url: str
    model: str
    temperature: float = 0.0
    timeout: float = 30.0
    max_retries: int = 2
    api_key_source: str = "COMDB_API_KEY"

    def __post_init__(self):
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")


def _check_arm(arm: str):
    if arm not in ARMS:
        raise ConfigError(f"unknown arm {arm!r}")


def _pair_schema(table_a: TableSchema, table_b: TableSchema) -> ValidatedSchema:
    return validate_schema(DatabaseSchema("pair", (table_a, table_b)))


def _messages(user_content: str, system: str) -> tuple[Message, ...]:
    messages = []
    if system:
        messages.append(Message("system", system))
    messages.append(Message("user", user_content))
    return tuple(messages)


def build_integration_prompt(table_a: TableSchema, table_b: TableSchema,
                             ann: ValidatedAnnotations | None, arm: str,
                             style: StyleFlags = DEFAULT_STYLE,
                             system: str = "") -> PromptBundle:
    """Header lists for both tables, optional header-group sentences, the
    matching task sentence, then the output-format directive."""
    _check_arm(arm)
    pair = _pair_schema(table_a, table_b)
    parts = [emit_base_schema(pair, INPUT_ORDER).rstrip("\n")]
    if arm == WITH_CONTEXT:
        if ann is None:
            raise MissingAnnotations()
        groups = tuple(g for g in ann.header_groups
                       if g.table in (table_a.name, table_b.name))
        if not groups:
            raise MissingAnnotations()
        local = validate_annotations(OntologyAnnotations((), groups), pair)
        parts.append(emit_contextual_schema(local, style).rstrip("\n"))
    parts.append(INTEGRATION_TASK_TEMPLATE.format(a=table_a.name, b=table_b.name))
    directive = MAPPING_DIRECTIVE_TEMPLATE.format(a=table_a.name, b=table_b.name)
    parts.append(directive)
    return PromptBundle(TASK_INTEGRATION, arm, _messages("\n".join(parts), system),
                        directive)


def build_join_prompt(schema: ValidatedSchema, ann: ValidatedAnnotations | None,
                      goal: str = DEFAULT_JOIN_GOAL, arm: str = WITH_CONTEXT,
                      style: StyleFlags = DEFAULT_STYLE,
                      system: str = "") -> PromptBundle:
    """Whole-database header listing in alphabetical order, optional
    contextual sentences, the goal sentence, then the SQL directive."""
    _check_arm(arm)
    if not goal or not goal.strip():
        raise ConfigError("join goal must be nonempty")
    parts = [emit_base_schema(schema).rstrip("\n")]
    if arm == WITH_CONTEXT:
        if ann is None:
            raise MissingAnnotations()
        context_text = emit_contextual_schema(ann, style).rstrip("\n")
        if not context_text:
            raise MissingAnnotations()
        parts.append(context_text)
    parts.append(goal)
    parts.append(SQL_DIRECTIVE)
    return PromptBundle(TASK_JOINING, arm, _messages("\n".join(parts), system),
                        SQL_DIRECTIVE)


class ChatClient(Protocol):
    client_id: str

    def complete(self, bundle: PromptBundle, *, repetition: int = 0) -> LLMResponse:
        ...


def _requests_transport(url, payload, headers, timeout):
    try:
        response = requests.post(url, json=payload, headers=headers, timeout=timeout)
    except requests.Timeout as exc:
        raise Timeout(timeout) from exc
    except requests.RequestException as exc:
        raise TransportError(str(exc)) from exc
    return response.status_code, response.text


class HttpChatClient:
    """Client for POST <endpoint>/chat/completions with bearer auth.

    Transport failures and timeouts are retried with exponential backoff
    plus jitter, up to max_retries extra attempts; HTTP error statuses are
    not retried. The credential is read from the environment variable
    named by the config and never logged.
    """

    backoff_base = 0.5
    backoff_cap = 8.0

    def __init__(self, config: ClientConfig, transport: Callable = _requests_transport):
        self.config = config
        self.client_id = f"http:{config.model}"
        self._transport = transport

    def _bearer(self) -> str | None:
        source = self.config.api_key_source
        if not source:
            return None
        key = os.environ.get(source)
        if key is None:
            raise MissingCredentials(source)
        return key

    def complete(self, bundle: PromptBundle, *, repetition: int = 0) -> LLMResponse:
        headers = {"Content-Type": "application/json"}
        key = self._bearer()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        url = self.config.endpoint_url.rstrip("/") + "/chat/completions"
        payload = {
            "model": self.config.model,
            "messages": [{"role": m.role, "content": m.content}
                         for m in bundle.messages],
            "temperature": self.config.temperature,
        }
        start = time.perf_counter()
        attempts = self.config.max_retries + 1
        for attempt in range(attempts):
            try:
                status, body = self._transport(url, payload, headers,
                                               self.config.timeout)
                break
            except (TransportError, Timeout):
                if attempt + 1 >= attempts:
                    raise
                delay = min(self.backoff_cap, self.backoff_base * 2 ** attempt)
                time.sleep(delay * (1 + random.random() * 0.25))
        latency_ms = (time.perf_counter() - start) * 1000.0
        if not 200 <= status < 300:
            raise ApiError(status, body)
        try:
            content = json.loads(body)["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ApiError(status, body) from exc
        return LLMResponse(content, latency_ms, self.client_id)


def complete(bundle: PromptBundle, config: ClientConfig) -> LLMResponse:
    """One-shot completion against an HTTP endpoint."""
    return HttpChatClient(config).complete(bundle)


class MockChatClient:
    """Scripted client: (task, arm, repetition) -> canned response text.

    Script records may omit the repetition index to cover every
    repetition; an exact-index record wins over such a wildcard.
    """

    client_id = "mock"

    def __init__(self, records):
        self._responses = {}
        for i, record in enumerate(records):
            try:
                key = (record["task"], record["arm"], record.get("repetition"))
                text = record["response"]
            except (TypeError, KeyError) as exc:
                raise ConfigError(f"mock record {i} is malformed: {exc}") from exc
            self._responses[key] = text

    @classmethod
    def from_file(cls, path) -> "MockChatClient":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, list):
            raise ConfigError("mock script must be a JSON array of records")
        return cls(data)

    def complete(self, bundle: PromptBundle, *, repetition: int = 0) -> LLMResponse:
        start = time.perf_counter()
        text = self._responses.get((bundle.task, bundle.arm, repetition))
        if text is None:
            text = self._responses.get((bundle.task, bundle.arm, None))
        if text is None:
            raise ConfigError(
                f"mock script has no response for ({bundle.task}, {bundle.arm}, "
                f"{repetition})")
        latency_ms = (time.perf_counter() - start) * 1000.0
        return LLMResponse(text, latency_ms, self.client_id)


# --- response parsing ---

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


def _vocabulary(headers) -> tuple[re.Pattern, dict]:
    canonical = {h.strip().casefold(): h for h in headers}
    alternatives = sorted((re.escape(h) for h in headers), key=len, reverse=True)
    pattern = re.compile(
        r"(?<![A-Za-z0-9_])(?:" + "|".join(alternatives) + r")(?![A-Za-z0-9_])",
        re.IGNORECASE)
    return pattern, canonical


def _resolve(tokens, canonical, line, warnings) -> list[str] | None:
    resolved = []
    for token in tokens:
        header = canonical.get(token.strip().casefold())
        if header is None:
            warnings.append(f"unresolvable header {token.strip()!r} in line {line!r}")
            return None
        resolved.append(header)
    return resolved


def _fenced_entries(text, canon_a, canon_b, warnings) -> list[MappingEntry]:
    entries = []
    for block in _FENCE_RE.findall(text):
        for raw in block.splitlines():
            line = raw.strip()
            if not line:
                continue
            if "->" not in line:
                warnings.append(f"ignored line without '->': {line!r}")
                continue
            left, right = line.split("->", 1)
            sources = _resolve(left.split("+"), canon_a, line, warnings)
            targets = _resolve(right.split("+"), canon_b, line, warnings)
            if sources is None or targets is None:
                continue
            entries.append(MappingEntry(tuple(sources), tuple(targets)))
    return entries


_SENTENCE_SPLIT = re.compile(r"[.!?\n;]+")


def _freeform_entries(text, vocab_a, canon_a, vocab_b, canon_b) -> list[MappingEntry]:
    entries = []
    for chunk in _SENTENCE_SPLIT.split(text):
        a_found = []
        for m in vocab_a.finditer(chunk):
            h = canon_a[m.group().casefold()]
            if h not in a_found:
                a_found.append(h)
        b_found = []
        for m in vocab_b.finditer(chunk):
            h = canon_b[m.group().casefold()]
            if h not in b_found:
                b_found.append(h)
        if len(a_found) == 1 and b_found:
            entries.append(MappingEntry(tuple(a_found), tuple(b_found)))
    return entries


def _dedupe(entries, warnings) -> list[MappingEntry]:
    kept = []
    seen_src, seen_tgt = set(), set()
    for entry in entries:
        src, tgt = entry.normalized()
        if src & seen_src or tgt & seen_tgt:
            warnings.append(f"dropped entry reusing already-mapped headers: "
                            f"{' + '.join(entry.source_headers)} -> "
                            f"{' + '.join(entry.target_headers)}")
            continue
        seen_src |= src
        seen_tgt |= tgt
        kept.append(entry)
    return kept


def parse_mapping_response(resp: LLMResponse, table_a: TableSchema,
                           table_b: TableSchema) -> HeaderMapping:
    """Read a header mapping out of a model response.

    Fenced ``A -> B`` lines are the primary channel; failing that, free
    text is scanned for sentences that pair exactly one known table-A
    header with known table-B headers. Unresolvable lines become warnings
    on the returned mapping. Raises NoMappingFound when neither channel
    yields an entry; never raises on weird text.
    """
    warnings: list[str] = []
    vocab_a, canon_a = _vocabulary(table_a.headers)
    vocab_b, canon_b = _vocabulary(table_b.headers)
    entries = _fenced_entries(resp.raw_text, canon_a, canon_b, warnings)
    if not entries:
        entries = _freeform_entries(resp.raw_text, vocab_a, canon_a, vocab_b, canon_b)
    entries = _dedupe(entries, warnings)
    if not entries:
        raise NoMappingFound()
    return HeaderMapping(tuple(entries), table_a.name, table_b.name,
                         tuple(warnings))


def extract_sql(resp: LLMResponse) -> str:
    """First fenced code block, else the span from the first SELECT to the
    last semicolon (or end of text). Raises NoSqlFound if neither exists."""
    for block in _FENCE_RE.findall(resp.raw_text):
        sql = block.strip()
        if sql:
            return sql
    lowered = resp.raw_text.casefold()
    idx = lowered.find("select")
    if idx < 0:
        raise NoSqlFound()
    tail = resp.raw_text[idx:]
    semi = tail.rfind(";")
    if semi >= 0:
        tail = tail[:semi + 1]
    return tail.strip()
