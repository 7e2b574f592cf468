"""Render schemas and annotations as natural-language sentences, and back.

Base schema form, one sentence per line, LF endings:

    Given a table 'allergies' with headers: Id, START, STOP, ...
    And a table 'careplans' with headers: Id, START, STOP, ...

Contextual schema form:

    encounters are in the context of patients, organizations, providers, payers.
    In table 'patients_B', headers ADDRESS, CITY, STATE, and COUNTY are in the context of patients' address.

Table relations always use plain comma lists. Header groups are styled by
StyleFlags: with the "In table" prefix or bare, and with or without the
Oxford "and" before the last of three-plus headers (two headers always
join with "and"). When parsing back, a bare line is read as a table
relation only if every comma-separated token on both sides is a plain
identifier; an "and" in the list or a concept that is not a bare
identifier marks a header group.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ParseError
from .schema import (
    ContextRelation,
    DatabaseSchema,
    HeaderContextGroup,
    OntologyAnnotations,
    TableSchema,
    ValidatedAnnotations,
    ValidatedSchema,
)

INPUT_ORDER = "input-order"
ALPHABETICAL = "alphabetical"


@dataclass(frozen=True)
class StyleFlags:
    prefixed_header_groups: bool = True
    oxford_and: bool = True


DEFAULT_STYLE = StyleFlags()


@dataclass(frozen=True)
class NLSchemaDocument:
    """Both NL parts for one schema, plus the flags that produced them."""

    base_text: str
    contextual_text: str
    source_schema_name: str
    style: StyleFlags = field(default=DEFAULT_STYLE)


def _header_list(headers, oxford_and: bool) -> str:
    if len(headers) == 1:
        return headers[0]
    if len(headers) == 2:
        return f"{headers[0]} and {headers[1]}"
    if oxford_and:
        return ", ".join(headers[:-1]) + f", and {headers[-1]}"
    return ", ".join(headers)


def emit_base_schema(schema: ValidatedSchema, order: str = ALPHABETICAL) -> str:
    """One sentence per table; the first opens with "Given", the rest with
    "And". Alphabetical order sorts tables by name bytewise ascending."""
    if order == ALPHABETICAL:
        tables = sorted(schema.tables, key=lambda t: t.name)
    elif order == INPUT_ORDER:
        tables = list(schema.tables)
    else:
        raise ValueError(f"unknown order {order!r}")
    lines = []
    for i, table in enumerate(tables):
        lead = "Given" if i == 0 else "And"
        lines.append(f"{lead} a table '{table.name}' with headers: "
                     f"{', '.join(table.headers)}.")
    return "\n".join(lines) + "\n"


def emit_contextual_schema(ann: ValidatedAnnotations,
                           style: StyleFlags = DEFAULT_STYLE) -> str:
    """Table relations first, then header groups, preserving list order."""
    lines = []
    for rel in ann.table_relations:
        lines.append(f"{', '.join(rel.subjects)} are in the context of "
                     f"{', '.join(rel.objects)}.")
    for group in ann.header_groups:
        hl = _header_list(group.headers, style.oxford_and)
        if style.prefixed_header_groups:
            lines.append(f"In table '{group.table}', headers {hl} "
                         f"are in the context of {group.concept}.")
        else:
            lines.append(f"{hl} are in the context of {group.concept}.")
    if not lines:
        return ""
    return "\n".join(lines) + "\n"


def emit_document(schema: ValidatedSchema, ann: ValidatedAnnotations | None,
                  order: str = ALPHABETICAL,
                  style: StyleFlags = DEFAULT_STYLE) -> NLSchemaDocument:
    return NLSchemaDocument(
        base_text=emit_base_schema(schema, order),
        contextual_text=emit_contextual_schema(ann, style) if ann else "",
        source_schema_name=schema.schema.name,
        style=style,
    )


_BASE_LINE = re.compile(
    r"^(?P<lead>Given|And) a table '(?P<name>[^']+)' with headers: (?P<headers>.+)\.$")


def parse_base_schema(text: str, name: str = "database") -> DatabaseSchema:
    """Inverse of emit_base_schema. The schema name is not encoded in the
    sentences, so the caller supplies it."""
    tables = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        m = _BASE_LINE.match(line)
        if m is None:
            raise ParseError("not a base-schema sentence", lineno)
        expected_lead = "Given" if not tables else "And"
        if m.group("lead") != expected_lead:
            raise ParseError(f"expected sentence to open with {expected_lead!r}",
                             lineno, expected=expected_lead)
        headers = [h.strip() for h in m.group("headers").split(",")]
        if any(not h for h in headers):
            raise ParseError("empty header name", lineno)
        tables.append(TableSchema(m.group("name"), tuple(headers)))
    if not tables:
        raise ParseError("no base-schema sentences found", 1)
    return DatabaseSchema(name, tuple(tables))


_PREFIXED_GROUP = re.compile(
    r"^In table '(?P<table>[^']+)', headers (?P<headers>.+?) "
    r"are in the context of (?P<concept>.+)\.$")
_IDENTIFIER = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_CONTEXT_SEP = " are in the context of "


def _split_header_list(text: str) -> list[str]:
    # Inverts _header_list: "A and B", "A, B, and C", or "A, B, C".
    if ", and " in text:
        head, last = text.rsplit(", and ", 1)
        return [p.strip() for p in head.split(",")] + [last.strip()]
    if ", " not in text and " and " in text:
        a, b = text.split(" and ", 1)
        return [a.strip(), b.strip()]
    return [p.strip() for p in text.split(",")]


def parse_contextual_schema(text: str,
                            bare_group_table: str = "") -> OntologyAnnotations:
    """Inverse of emit_contextual_schema for all supported styles.

    The bare (unprefixed) header-group form does not name its table, so
    groups parsed from it get bare_group_table as their table name.
    """
    relations = []
    groups = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        m = _PREFIXED_GROUP.match(line)
        if m is not None:
            headers = _split_header_list(m.group("headers"))
            groups.append(HeaderContextGroup(m.group("table"), tuple(headers),
                                             m.group("concept")))
            continue
        if not line.endswith("."):
            raise ParseError("sentence does not end with '.'", lineno)
        body = line[:-1]
        if _CONTEXT_SEP not in body:
            raise ParseError("no 'are in the context of' clause", lineno)
        left, right = body.split(_CONTEXT_SEP, 1)
        if not left.strip() or not right.strip():
            raise ParseError("empty side in context sentence", lineno)
        left_items = [p.strip() for p in left.split(",")]
        right_items = [p.strip() for p in right.split(",")]
        has_and = " and " in left
        all_idents = all(_IDENTIFIER.match(p) for p in left_items + right_items)
        if not has_and and all_idents:
            relations.append(ContextRelation(tuple(left_items), tuple(right_items)))
        else:
            headers = _split_header_list(left)
            if any(not h for h in headers):
                raise ParseError("empty header name in group", lineno)
            groups.append(HeaderContextGroup(bare_group_table, tuple(headers), right))
    return OntologyAnnotations(tuple(relations), tuple(groups))
