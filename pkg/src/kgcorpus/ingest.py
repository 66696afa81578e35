"""Streaming parsers for UMLS-style pipe-delimited release files.

Handles the concept/term file (MRCONSO layout), relation file (MRREL),
semantic-type file (MRSTY) and the semantic-group mapping file. Parsers
are generators and never hold more than one row at a time, so peak memory
is bounded by the resulting graph, not the file size. Malformed rows are
skipped and counted by default; strict mode aborts instead.
"""

from __future__ import annotations

import pickle
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path

from kgcorpus.graph import Concept, GraphError, KnowledgeGraph, RelationType, Triple

#: Standard release codes for the seven relation types.
DEFAULT_RELATION_MAP: dict[str, RelationType] = {
    "PAR": RelationType.PARENT,
    "CHD": RelationType.CHILD,
    "SY": RelationType.SYNONYM,
    "AQ": RelationType.ALLOWED_QUALIFIER,
    "QB": RelationType.QUALIFIED_BY,
    "RB": RelationType.BROADER,
    "RN": RelationType.NARROWER,
}

# Concept/term file column offsets (MRCONSO layout).
_CON_CUI, _CON_LANG, _CON_STATUS, _CON_ISPREF, _CON_STR = 0, 1, 2, 6, 14
# Relation file column offsets (MRREL layout).
_REL_CUI1, _REL_CODE, _REL_CUI2 = 0, 3, 4
# Semantic-type file column offsets (MRSTY layout).
_STY_CUI, _STY_TYPE = 0, 1
# Group mapping file column offsets (SemGroups layout).
_GRP_CODE, _GRP_TYPE = 0, 2


class IngestError(ValueError):
    """Raised on malformed rows in strict mode and on unusable inputs."""


@dataclass(slots=True)
class RrfRow:
    """One raw release row: line number plus pipe-split fields.

    Splitting preserves empty fields (a trailing pipe yields a trailing
    empty field) so rejoining with pipes reproduces the input line.
    """

    line_no: int
    fields: list[str]

    def rejoin(self) -> str:
        return "|".join(self.fields)


def split_rrf_line(line: str, line_no: int) -> RrfRow:
    return RrfRow(line_no, line.rstrip("\r\n").split("|"))


@dataclass
class IngestConfig:
    """Configuration shared by the release parsers.

    languages: language codes to keep; None keeps everything.
    relation_map: source relation code -> RelationType; unmapped codes are
        dropped and counted.
    flip_orientation: the release stores rows as (CUI1, REL, CUI2) where
        REL describes CUI2's relation to CUI1, so the default emits
        Triple(head=CUI2, relation, tail=CUI1); set True to flip.
    group_allowlist: semantic groups to keep; None keeps everything.
    preferred_status / preferred_flag: a term row is preferred when its
        term-status and preference columns equal these values.
    strict: abort on malformed rows instead of skip-and-count.
    """

    languages: frozenset[str] | None = None
    relation_map: dict[str, RelationType] = field(
        default_factory=lambda: dict(DEFAULT_RELATION_MAP)
    )
    flip_orientation: bool = False
    group_allowlist: frozenset[str] | None = None
    preferred_status: str = "P"
    preferred_flag: str = "Y"
    strict: bool = False

    def __post_init__(self) -> None:
        image = set(self.relation_map.values())
        if image != set(RelationType):
            missing = sorted(r.name for r in set(RelationType) - image)
            raise IngestError(f"relation map must cover all seven relation types; missing {missing}")


@dataclass
class ParseSummary:
    """Per-file row accounting, filled in as a parser stream is consumed."""

    rows: int = 0
    emitted: int = 0
    skipped_short: int = 0
    filtered_language: int = 0
    unmapped_relation: int = 0
    unmapped_type: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "rows": self.rows,
            "emitted": self.emitted,
            "skipped_short": self.skipped_short,
            "filtered_language": self.filtered_language,
            "unmapped_relation": self.unmapped_relation,
            "unmapped_type": self.unmapped_type,
        }


@dataclass(slots=True)
class ConceptFragment:
    """One term row: (cui, language, term, preferred flag)."""

    cui: str
    language: str
    term: str
    preferred: bool


def _short_row(summary: ParseSummary, row: RrfRow, need: int, strict: bool, what: str) -> None:
    if strict:
        raise IngestError(
            f"{what} row {row.line_no} has {len(row.fields)} fields, expected >= {need}"
        )
    summary.skipped_short += 1


def parse_concept_file(
    lines: Iterable[str], cfg: IngestConfig, summary: ParseSummary | None = None
) -> Iterator[ConceptFragment]:
    """Stream concept/term rows, applying the language filter.

    The preferred flag is computed from the term-status and preference
    columns per the configured policy.
    """
    summary = summary if summary is not None else ParseSummary()
    for line_no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        summary.rows += 1
        row = split_rrf_line(line, line_no)
        if len(row.fields) < 15:
            _short_row(summary, row, 15, cfg.strict, "concept")
            continue
        language = row.fields[_CON_LANG]
        if cfg.languages is not None and language not in cfg.languages:
            summary.filtered_language += 1
            continue
        preferred = (
            row.fields[_CON_STATUS] == cfg.preferred_status
            and row.fields[_CON_ISPREF] == cfg.preferred_flag
        )
        summary.emitted += 1
        yield ConceptFragment(row.fields[_CON_CUI], language, row.fields[_CON_STR], preferred)


def parse_relation_file(
    lines: Iterable[str], cfg: IngestConfig, summary: ParseSummary | None = None
) -> Iterator[Triple]:
    """Stream relation rows whose codes map to one of the seven types."""
    summary = summary if summary is not None else ParseSummary()
    relation_map = cfg.relation_map
    flip = cfg.flip_orientation
    for line_no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        summary.rows += 1
        row = split_rrf_line(line, line_no)
        if len(row.fields) < 5:
            _short_row(summary, row, 5, cfg.strict, "relation")
            continue
        relation = relation_map.get(row.fields[_REL_CODE])
        if relation is None:
            summary.unmapped_relation += 1
            continue
        cui1, cui2 = row.fields[_REL_CUI1], row.fields[_REL_CUI2]
        summary.emitted += 1
        if flip:
            yield Triple(cui1, relation, cui2)
        else:
            yield Triple(cui2, relation, cui1)


def parse_group_map(lines: Iterable[str]) -> dict[str, str]:
    """Load the semantic-group mapping file: type identifier -> group code."""
    mapping: dict[str, str] = {}
    for line in lines:
        if not line.strip():
            continue
        fields = line.rstrip("\r\n").split("|")
        if len(fields) <= _GRP_TYPE:
            continue
        mapping[fields[_GRP_TYPE]] = fields[_GRP_CODE]
    return mapping


def parse_semantic_types(
    lines: Iterable[str],
    groups_map: dict[str, str],
    summary: ParseSummary | None = None,
) -> Iterator[tuple[str, str]]:
    """Stream deduplicated (cui, group) memberships from the type file."""
    summary = summary if summary is not None else ParseSummary()
    seen: set[tuple[str, str]] = set()
    for line_no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        summary.rows += 1
        row = split_rrf_line(line, line_no)
        if len(row.fields) < 2:
            summary.skipped_short += 1
            continue
        group = groups_map.get(row.fields[_STY_TYPE])
        if group is None:
            summary.unmapped_type += 1
            continue
        membership = (row.fields[_STY_CUI], group)
        if membership in seen:
            continue
        seen.add(membership)
        summary.emitted += 1
        yield membership


@dataclass
class IngestReport:
    """Counts produced by build_graph, written as a key-value text document."""

    concept_summary: ParseSummary = field(default_factory=ParseSummary)
    relation_summary: ParseSummary = field(default_factory=ParseSummary)
    type_summary: ParseSummary = field(default_factory=ParseSummary)
    concepts: int = 0
    dropped_untyped_concepts: int = 0
    edges: int = 0
    dropped_dangling: int = 0
    dropped_duplicate_edges: int = 0
    per_relation: dict[str, int] = field(default_factory=dict)
    preferred_fallbacks: int = 0

    def as_dict(self) -> dict[str, object]:
        out: dict[str, object] = {}
        for prefix, summary in (
            ("concept_file", self.concept_summary),
            ("relation_file", self.relation_summary),
            ("type_file", self.type_summary),
        ):
            for key, value in summary.as_dict().items():
                out[f"{prefix}.{key}"] = value
        out.update(
            {
                "graph.concepts": self.concepts,
                "graph.dropped_untyped_concepts": self.dropped_untyped_concepts,
                "graph.edges": self.edges,
                "graph.dropped_dangling": self.dropped_dangling,
                "graph.dropped_duplicate_edges": self.dropped_duplicate_edges,
                "graph.preferred_fallbacks": self.preferred_fallbacks,
            }
        )
        for name, count in sorted(self.per_relation.items()):
            out[f"graph.edges.{name}"] = count
        return out

    def to_text(self) -> str:
        return "\n".join(f"{k}: {v}" for k, v in self.as_dict().items()) + "\n"


def build_graph(
    fragments: Iterable[ConceptFragment],
    triples: Iterable[Triple],
    memberships: Iterable[tuple[str, str]],
    cfg: IngestConfig | None = None,
    report: IngestReport | None = None,
) -> tuple[KnowledgeGraph, IngestReport]:
    """Merge the parsed streams into a frozen KnowledgeGraph.

    Concepts without any (allow-listed) semantic-group membership are
    dropped, as are triples with a dangling endpoint; both are counted in
    the report. Preferred term per (cui, language): first row flagged
    preferred, falling back to the first term seen.
    """
    cfg = cfg or IngestConfig()
    report = report if report is not None else IngestReport()

    terms: dict[str, list[tuple[str, str]]] = {}
    term_sets: dict[str, set[tuple[str, str]]] = {}
    preferred: dict[str, dict[str, str]] = {}
    first_seen: dict[str, dict[str, str]] = {}
    for fragment in fragments:
        pair = (fragment.language, fragment.term)
        bucket = term_sets.setdefault(fragment.cui, set())
        if pair not in bucket:
            bucket.add(pair)
            terms.setdefault(fragment.cui, []).append(pair)
        langs = first_seen.setdefault(fragment.cui, {})
        langs.setdefault(fragment.language, fragment.term)
        if fragment.preferred:
            preferred.setdefault(fragment.cui, {}).setdefault(fragment.language, fragment.term)

    groups: dict[str, set[str]] = {}
    for cui, group in memberships:
        if cfg.group_allowlist is not None and group not in cfg.group_allowlist:
            continue
        groups.setdefault(cui, set()).add(group)

    kg = KnowledgeGraph()
    for cui, term_list in terms.items():
        cui_groups = groups.get(cui)
        if not cui_groups:
            report.dropped_untyped_concepts += 1
            continue
        preferred_map = dict(preferred.get(cui, {}))
        for language, fallback in first_seen[cui].items():
            if language not in preferred_map:
                preferred_map[language] = fallback
                report.preferred_fallbacks += 1
        kg.insert_concept(
            Concept(
                cui=cui,
                terms=term_list,
                preferred_term=preferred_map,
                groups=tuple(sorted(cui_groups)),
            )
        )

    per_relation: dict[str, int] = {}
    for triple in triples:
        if triple.head not in kg.concepts or triple.tail not in kg.concepts:
            report.dropped_dangling += 1
            continue
        if kg.contains(triple):
            report.dropped_duplicate_edges += 1
            continue
        kg.insert_triple(triple)
        per_relation[triple.relation.name] = per_relation.get(triple.relation.name, 0) + 1

    if not kg.concepts:
        raise IngestError("no concepts survived ingest; check language filter and inputs")

    kg.freeze()
    report.concepts = len(kg.concepts)
    report.edges = kg.num_edges()
    report.per_relation = per_relation
    return kg, report


def ingest_release(
    concept_path: str | Path,
    relation_path: str | Path,
    type_path: str | Path,
    group_map_path: str | Path,
    cfg: IngestConfig | None = None,
) -> tuple[KnowledgeGraph, IngestReport]:
    """Parse a release directory's four files into a frozen graph."""
    from kgcorpus.util import iter_lines

    cfg = cfg or IngestConfig()
    report = IngestReport()
    groups_map = parse_group_map(iter_lines(group_map_path))
    fragments = parse_concept_file(iter_lines(concept_path), cfg, report.concept_summary)
    triples = parse_relation_file(iter_lines(relation_path), cfg, report.relation_summary)
    memberships = parse_semantic_types(iter_lines(type_path), groups_map, report.type_summary)
    return build_graph(fragments, triples, memberships, cfg, report)


# -- graph cache -------------------------------------------------------

_CACHE_MAGIC = "kgcorpus-graph-cache"
_CACHE_VERSION = 1


def save_graph(kg: KnowledgeGraph, path: str | Path) -> None:
    """Write the frozen graph as a versioned binary cache (tool-private format)."""
    if not kg.frozen:
        raise GraphError("only frozen graphs can be cached")
    payload = {"magic": _CACHE_MAGIC, "version": _CACHE_VERSION, "graph": kg}
    with open(path, "wb") as handle:
        pickle.dump(payload, handle, protocol=pickle.HIGHEST_PROTOCOL)


def load_graph(path: str | Path) -> KnowledgeGraph:
    with open(path, "rb") as handle:
        payload = pickle.load(handle)
    if not isinstance(payload, dict) or payload.get("magic") != _CACHE_MAGIC:
        raise IngestError(f"{path} is not a graph cache")
    if payload.get("version") != _CACHE_VERSION:
        raise IngestError(
            f"graph cache version {payload.get('version')} not supported (want {_CACHE_VERSION})"
        )
    return payload["graph"]
