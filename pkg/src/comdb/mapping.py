"""Header correspondences between two tables.

An entry maps a set of source-table headers to a set of target-table
headers; one-to-many entries cover headers that must be combined or split
(e.g. one address field matching four address columns). The .map file
format is one entry per line, ``A-side -> B-side``, sides joined with
``+`` when they hold several headers; ``#`` starts a comment line.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParseError


def normalize_header(name: str) -> str:
    """Scorer-side normalization: strip and casefold, nothing smarter."""
    return name.strip().casefold()


@dataclass(frozen=True)
class MappingEntry:
    source_headers: tuple[str, ...]
    target_headers: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "source_headers", tuple(self.source_headers))
        object.__setattr__(self, "target_headers", tuple(self.target_headers))
        if not self.source_headers or not self.target_headers:
            raise ValueError("mapping entry needs headers on both sides")

    def normalized(self) -> tuple[frozenset, frozenset]:
        return (frozenset(normalize_header(h) for h in self.source_headers),
                frozenset(normalize_header(h) for h in self.target_headers))


@dataclass(frozen=True)
class HeaderMapping:
    entries: tuple[MappingEntry, ...]
    source_table: str | None = None
    target_table: str | None = None
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        seen_src, seen_tgt = set(), set()
        for entry in self.entries:
            src, tgt = entry.normalized()
            if src & seen_src:
                dup = sorted(src & seen_src)[0]
                raise ValueError(f"source header {dup!r} appears in two entries")
            if tgt & seen_tgt:
                dup = sorted(tgt & seen_tgt)[0]
                raise ValueError(f"target header {dup!r} appears in two entries")
            seen_src |= src
            seen_tgt |= tgt

    def __len__(self):
        return len(self.entries)


def parse_map_text(text: str, source_table: str | None = None,
                   target_table: str | None = None) -> HeaderMapping:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "->" not in line:
            raise ParseError("expected 'A-side -> B-side'", lineno)
        left, right = line.split("->", 1)
        sources = [h.strip() for h in left.split("+")]
        targets = [h.strip() for h in right.split("+")]
        if any(not h for h in sources + targets):
            raise ParseError("empty header name", lineno)
        entries.append(MappingEntry(tuple(sources), tuple(targets)))
    if not entries:
        raise ParseError("no mapping entries found", 1)
    try:
        return HeaderMapping(tuple(entries), source_table, target_table)
    except ValueError as exc:
        raise ParseError(str(exc), 1) from exc


def render_map_text(mapping: HeaderMapping) -> str:
    lines = [f"{' + '.join(e.source_headers)} -> {' + '.join(e.target_headers)}"
             for e in mapping.entries]
    return "\n".join(lines) + "\n"
