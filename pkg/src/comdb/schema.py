"""In-memory model of database schemas and context-of annotations.

Tables are names plus ordered header names, nothing else: no column types,
no keys, and deliberately no way to attach row data. Annotations relate
tables to tables (ContextRelation) or headers within one table to a free
text concept (HeaderContextGroup). All name comparisons are exact and
case-sensitive; scorer-side normalization lives in comdb.evaluate.

Everything here is immutable after construction and validation is a pure
function, so values can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    DuplicateHeader,
    DuplicateTable,
    EmptySchema,
    EmptySide,
    EmptyTable,
    InvalidGroup,
    InvalidName,
    SelfContext,
    UnknownHeader,
    UnknownTable,
)


@dataclass(frozen=True)
class TableSchema:
    """One table: a name and its ordered header names."""

    name: str
    headers: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "headers", tuple(self.headers))


@dataclass(frozen=True)
class DatabaseSchema:
    name: str
    tables: tuple[TableSchema, ...]

    def __post_init__(self):
        object.__setattr__(self, "tables", tuple(self.tables))

    def table_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tables)


@dataclass(frozen=True)
class ContextRelation:
    """Condensed table-level relation: every subject is in the context of
    every object."""

    subjects: tuple[str, ...]
    objects: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "subjects", tuple(self.subjects))
        object.__setattr__(self, "objects", tuple(self.objects))


@dataclass(frozen=True)
class HeaderContextGroup:
    """Two or more headers of one table sharing a concept, e.g. the four
    address columns in the context of "patients' address"."""

    table: str
    headers: tuple[str, ...]
    concept: str

    def __post_init__(self):
        object.__setattr__(self, "headers", tuple(self.headers))


@dataclass(frozen=True)
class OntologyAnnotations:
    table_relations: tuple[ContextRelation, ...] = ()
    header_groups: tuple[HeaderContextGroup, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "table_relations", tuple(self.table_relations))
        object.__setattr__(self, "header_groups", tuple(self.header_groups))


@dataclass(frozen=True)
class DirectedContextPair:
    subject: str
    object: str


@dataclass(frozen=True)
class ValidatedSchema:
    """Witness that a DatabaseSchema passed validate_schema.

    Downstream operations (emission, prompt building, annotation checks)
    require this wrapper rather than a bare DatabaseSchema.
    """

    schema: DatabaseSchema

    def table(self, name: str) -> TableSchema:
        for t in self.schema.tables:
            if t.name == name:
                return t
        raise KeyError(name)

    def has_table(self, name: str) -> bool:
        return any(t.name == name for t in self.schema.tables)

    @property
    def tables(self) -> tuple[TableSchema, ...]:
        return self.schema.tables


@dataclass(frozen=True)
class ValidatedAnnotations:
    """Witness that annotations resolve against a validated schema."""

    annotations: OntologyAnnotations
    schema: ValidatedSchema = field(repr=False)

    @property
    def table_relations(self) -> tuple[ContextRelation, ...]:
        return self.annotations.table_relations

    @property
    def header_groups(self) -> tuple[HeaderContextGroup, ...]:
        return self.annotations.header_groups


def _check_name(kind: str, name: str):
    if not name or "\n" in name or "\r" in name:
        raise InvalidName(kind, name)


def validate_schema(schema: DatabaseSchema) -> ValidatedSchema:
    """Check every schema invariant and return the validation witness.

    Raises EmptySchema, EmptyTable, DuplicateTable, DuplicateHeader or
    InvalidName; on success the returned wrapper vouches for all of them.
    """
    if not schema.tables:
        raise EmptySchema()
    seen_tables = set()
    for table in schema.tables:
        _check_name("table", table.name)
        if table.name in seen_tables:
            raise DuplicateTable(table.name)
        seen_tables.add(table.name)
        if not table.headers:
            raise EmptyTable(table.name)
        seen_headers = set()
        for header in table.headers:
            _check_name("header", header)
            if header in seen_headers:
                raise DuplicateHeader(table.name, header)
            seen_headers.add(header)
    return ValidatedSchema(schema)


def validate_annotations(ann: OntologyAnnotations,
                         schema: ValidatedSchema) -> ValidatedAnnotations:
    """Resolve every annotation reference against the schema.

    Rejects unknown tables/headers, empty or duplicated relation sides,
    self-referential relations, and header groups of fewer than two
    headers or with an empty concept.
    """
    for i, rel in enumerate(ann.table_relations):
        if not rel.subjects or not rel.objects:
            raise EmptySide(i)
        for side in (rel.subjects, rel.objects):
            seen = set()
            for name in side:
                if name in seen:
                    raise InvalidGroup(name, f"table {name!r} repeated within relation {i}")
                seen.add(name)
                if not schema.has_table(name):
                    raise UnknownTable(name)
        overlap = set(rel.subjects) & set(rel.objects)
        if overlap:
            raise SelfContext(sorted(overlap)[0])
    for group in ann.header_groups:
        if not schema.has_table(group.table):
            raise UnknownTable(group.table)
        if len(group.headers) < 2:
            raise InvalidGroup(group.table, "a header group needs at least two headers")
        if not group.concept or "\n" in group.concept:
            raise InvalidGroup(group.table, "concept must be a nonempty single line")
        table = schema.table(group.table)
        seen = set()
        for header in group.headers:
            if header in seen:
                raise InvalidGroup(group.table, f"header {header!r} repeated")
            seen.add(header)
            if header not in table.headers:
                raise UnknownHeader(group.table, header)
    return ValidatedAnnotations(ann, schema)


def expand_context_relation(rel: ContextRelation) -> list[DirectedContextPair]:
    """Expand the condensed form into subject-major directed pairs.

    A relation with S subjects and O objects yields exactly S*O pairs.
    """
    return [DirectedContextPair(s, o) for s in rel.subjects for o in rel.objects]
