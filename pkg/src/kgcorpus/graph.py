"""In-memory directed labeled multigraph over medical concepts.

Concepts are keyed by CUI and carry language-tagged terms, one preferred
term per language and semantic-group memberships. Edges are (head,
relation, tail) triples over seven relation types. Indices support O(1)
membership tests, per-group sampling and adjacency walks.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import NamedTuple


class GraphError(ValueError):
    """Raised on malformed inserts, dangling edges or empty sampling pools."""


class RelationType(enum.IntEnum):
    """The seven relation types, with stable integer codes 0-6."""

    PARENT = 0
    CHILD = 1
    SYNONYM = 2
    ALLOWED_QUALIFIER = 3
    QUALIFIED_BY = 4
    BROADER = 5
    NARROWER = 6

    @property
    def token(self) -> str:
        """Default rendered token string for this relation type."""
        return _DEFAULT_RELATION_TOKENS[self]


_DEFAULT_RELATION_TOKENS: dict[RelationType, str] = {
    RelationType.PARENT: "[REL_PAR]",
    RelationType.CHILD: "[REL_CHD]",
    RelationType.SYNONYM: "[REL_SY]",
    RelationType.ALLOWED_QUALIFIER: "[REL_AQ]",
    RelationType.QUALIFIED_BY: "[REL_QB]",
    RelationType.BROADER: "[REL_RB]",
    RelationType.NARROWER: "[REL_RN]",
}

#: Relation codes usable as link-prediction labels (synonymy excluded).
NON_SYNONYM_CODES: tuple[int, ...] = tuple(
    int(r) for r in RelationType if r is not RelationType.SYNONYM
)


@dataclass
class Concept:
    """A graph node: one CUI with its terms, preferred terms and groups.

    `terms` holds (language, term) pairs, deduplicated; `preferred_term`
    maps language -> term and always points at an entry of `terms`;
    `groups` is a non-empty, lexicographically sorted tuple of
    semantic-group codes.
    """

    cui: str
    terms: list[tuple[str, str]] = field(default_factory=list)
    preferred_term: dict[str, str] = field(default_factory=dict)
    groups: tuple[str, ...] = ()

    @property
    def canonical_group(self) -> str:
        """Single stratum label: the lexicographically smallest group code."""
        if not self.groups:
            raise GraphError(f"concept {self.cui} has no semantic groups")
        return self.groups[0]

    def terms_in(self, language: str) -> list[str]:
        return [term for lang, term in self.terms if lang == language]

    def has_language(self, language: str) -> bool:
        return any(lang == language for lang, _ in self.terms)


class Triple(NamedTuple):
    """An ordered (head cui, relation, tail cui) edge."""

    head: str
    relation: RelationType
    tail: str


class KnowledgeGraph:
    """Directed labeled multigraph with membership, group and adjacency indices.

    Build phase is single-writer: insert concepts first, then triples, then
    call freeze(). A frozen graph is immutable and safe to share across
    concurrent readers; samplers bring their own random streams.
    """

    def __init__(self) -> None:
        self.concepts: dict[str, Concept] = {}
        self._edges: set[Triple] = set()
        self._edge_order: list[Triple] = []
        self._outgoing: dict[str, list[Triple]] = {}
        self._group_members: dict[str, list[str]] = {}
        self._frozen = False

    # -- build phase ---------------------------------------------------

    def insert_concept(self, concept: Concept) -> None:
        """Insert or merge a concept (set-union semantics on terms/groups)."""
        self._check_mutable()
        if not concept.cui:
            raise GraphError("concept with empty cui rejected")
        existing = self.concepts.get(concept.cui)
        if existing is None:
            merged = Concept(
                cui=concept.cui,
                terms=sorted(set(concept.terms)),
                preferred_term=dict(concept.preferred_term),
                groups=tuple(sorted(set(concept.groups))),
            )
            self.concepts[concept.cui] = merged
        else:
            existing.terms = sorted(set(existing.terms) | set(concept.terms))
            for lang, term in concept.preferred_term.items():
                existing.preferred_term.setdefault(lang, term)
            existing.groups = tuple(sorted(set(existing.groups) | set(concept.groups)))

    def insert_triple(self, triple: Triple) -> None:
        """Insert an edge; idempotent on exact (head, relation, tail) duplicates."""
        self._check_mutable()
        for endpoint in (triple.head, triple.tail):
            if endpoint not in self.concepts:
                raise GraphError(f"triple endpoint {endpoint} not in graph")
        if triple in self._edges:
            return
        self._edges.add(triple)
        self._edge_order.append(triple)
        self._outgoing.setdefault(triple.head, []).append(triple)

    def freeze(self) -> "KnowledgeGraph":
        """Make the graph immutable and finalize indices; returns self."""
        if self._frozen:
            return self
        for cui, concept in self.concepts.items():
            for group in concept.groups:
                self._group_members.setdefault(group, []).append(cui)
        for members in self._group_members.values():
            members.sort()
        # Deterministic adjacency regardless of insertion order.
        self._edge_order.sort()
        for bucket in self._outgoing.values():
            bucket.sort()
        self._frozen = True
        return self

    def _check_mutable(self) -> None:
        if self._frozen:
            raise GraphError("graph is frozen; no inserts after freeze")

    # -- queries -------------------------------------------------------

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def edges(self) -> list[Triple]:
        return self._edge_order

    def num_edges(self) -> int:
        return len(self._edges)

    def contains(self, triple: Triple) -> bool:
        """True iff the exact (head, relation, tail) edge is in the graph."""
        return triple in self._edges

    def lookup(self, cui: str) -> Concept | None:
        return self.concepts.get(cui)

    def outgoing(self, cui: str) -> list[Triple]:
        return self._outgoing.get(cui, [])

    def group_members(self, group: str) -> list[str]:
        """All cuis having `group` among their semantic groups (sorted)."""
        return self._group_members.get(group, [])

    def groups(self) -> list[str]:
        return sorted(self._group_members)

    def canonical_group(self, cui: str) -> str:
        return self.concepts[cui].canonical_group

    def sample_concept_in_group(self, group: str, rng: random.Random) -> str:
        """Uniform draw over the members of a semantic group."""
        members = self._group_members.get(group)
        if not members:
            raise GraphError(f"semantic group {group!r} is empty or unknown")
        return members[rng.randrange(len(members))]

    def statistics(self, language: str) -> tuple[int, int, int]:
        """(term count, cui count, relation count) restricted to `language`.

        Terms tagged with the language, concepts having at least one such
        term, and edges whose both endpoints have at least one such term.
        """
        term_count = 0
        cui_count = 0
        has_language: set[str] = set()
        for cui, concept in self.concepts.items():
            n = sum(1 for lang, _ in concept.terms if lang == language)
            term_count += n
            if n:
                cui_count += 1
                has_language.add(cui)
        relation_count = sum(
            1 for t in self._edge_order if t.head in has_language and t.tail in has_language
        )
        return term_count, cui_count, relation_count


def graph_statistics(kg: KnowledgeGraph, language: str) -> tuple[int, int, int]:
    """Module-level alias for KnowledgeGraph.statistics."""
    return kg.statistics(language)
