"""Renders KG samples and free text into annotated training sequences.

A rendered sequence is plain text joined by single spaces, with character
spans marking head/tail entities and relation tokens. Classification and
separator tokens are NOT embedded: consumer tokenizers add them, so the
corpus stays vocabulary-agnostic. Masking is likewise expressed over
character spans, with subword expansion (whole-span masking) delegated to
the consumer.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import NamedTuple

from kgcorpus.graph import (
    _DEFAULT_RELATION_TOKENS,
    NON_SYNONYM_CODES,
    KnowledgeGraph,
    RelationType,
    Triple,
)
from kgcorpus.sampling import Path

#: Words reserved for the consumer's classification/separator tokens when
#: enforcing the sequence budget.
BUDGET_RESERVED = 2
DEFAULT_SEQUENCE_BUDGET = 256
DEFAULT_MLM_PROBABILITY = 0.15
#: Standard BERT-lineage corruption split for selected MLM positions.
MLM_CORRUPTION = (0.8, 0.1, 0.1)


class RenderError(ValueError):
    """Raised on rendering precondition violations."""


class Span(NamedTuple):
    role: str  # head | tail | relation
    start: int
    end: int


@dataclass(frozen=True)
class SpecialTokens:
    """The configurable special-token strings used in rendered sequences."""

    relation: dict[RelationType, str] = field(
        default_factory=lambda: dict(_DEFAULT_RELATION_TOKENS)
    )
    hidden_relation: str = "[HREL]"
    mask: str = "[MASK]"
    classification: str = "[CLS]"
    separator: str = "[SEP]"

    def all_tokens(self) -> list[str]:
        return [
            *[self.relation[r] for r in RelationType],
            self.hidden_relation,
            self.mask,
            self.classification,
            self.separator,
        ]

    def validate(self) -> None:
        tokens = self.all_tokens()
        if len(set(tokens)) != len(tokens):
            raise RenderError("special tokens must be pairwise distinct")
        if any(not t for t in tokens):
            raise RenderError("special tokens must be non-empty")

    def relation_for_token(self, token: str) -> RelationType | None:
        for relation, candidate in self.relation.items():
            if candidate == token:
                return relation
        return None

    def find_in_terms(self, kg: KnowledgeGraph) -> list[tuple[str, str, str]]:
        """Report (token, cui, term) collisions: tokens occurring inside terms."""
        offenders = []
        tokens = self.all_tokens()
        for cui in sorted(kg.concepts):
            for _, term in kg.concepts[cui].terms:
                for token in tokens:
                    if token in term:
                        offenders.append((token, cui, term))
        return offenders


@dataclass
class TrainingRecord:
    """One task-tagged rendered sequence with span annotations.

    labels: tc -> bool; lp -> list of relation codes aligned with the
    relation spans; ep/mlm -> None (masking targets are derived from spans
    and the MLM probability at consumption time).
    """

    id: str
    task: str  # mlm | ep | lp | tc
    text: str
    spans: list[Span]
    labels: bool | list[int] | None

    def spans_by_role(self, role: str) -> list[Span]:
        return [s for s in self.spans if s.role == role]

    def slice(self, span: Span) -> str:
        return self.text[span.start : span.end]


@dataclass(frozen=True)
class MaskingDirective:
    """Character spans to mask plus the replacement and label policy.

    ep/lp spans are always masked; mlm spans were selected independently
    with the configured probability, and the standard 80/10/10
    replace/random/keep split is applied at consumption time.
    """

    task: str
    spans: tuple[tuple[int, int], ...]
    replacement: str
    always_mask: bool
    labels: tuple[str, ...] | tuple[int, ...]
    label_alphabet: tuple[int, ...] | None
    corruption: tuple[float, float, float] | None = None


def realize_terms(
    kg: KnowledgeGraph, triple: Triple, language: str, rng: random.Random
) -> tuple[str, str, bool]:
    """Pick the strings for a triple's endpoints in the given language.

    Both endpoints use their preferred term, except the tail of a synonym
    relation, which is drawn uniformly from the concept's other terms (a
    concept with a single term falls back to the preferred one; the third
    return value flags that fallback).
    """
    head = kg.lookup(triple.head)
    tail = kg.lookup(triple.tail)
    if head is None or tail is None:
        raise RenderError(f"triple references unknown concept: {triple}")
    head_term = head.preferred_term.get(language)
    tail_term = tail.preferred_term.get(language)
    if head_term is None:
        raise RenderError(f"concept {head.cui} has no term in language {language}")
    if tail_term is None:
        raise RenderError(f"concept {tail.cui} has no term in language {language}")
    fallback = False
    if triple.relation is RelationType.SYNONYM:
        others = [t for t in tail.terms_in(language) if t != tail_term]
        if others:
            tail_term = others[rng.randrange(len(others))]
        else:
            fallback = True
    return head_term, tail_term, fallback


def render_triple(
    head: str,
    relation: RelationType,
    tail: str,
    tokens: SpecialTokens | None = None,
) -> tuple[str, list[Span]]:
    """Render `head RELATION-TOKEN tail` with exact spans for all three parts."""
    if not head or not tail:
        raise RenderError("head and tail strings must be non-empty")
    tokens = tokens or SpecialTokens()
    relation_token = tokens.relation[relation]
    text = f"{head} {relation_token} {tail}"
    spans = [
        Span("head", 0, len(head)),
        Span("relation", len(head) + 1, len(head) + 1 + len(relation_token)),
        Span("tail", len(text) - len(tail), len(text)),
    ]
    return text, spans


def render_path(
    path: Path, terms: list[str], tokens: SpecialTokens | None = None
) -> tuple[str, list[Span], list[int]]:
    """Render a path as alternating concept strings and relation tokens.

    Returns the text, one span per relation token, and the relation codes
    aligned with those spans. Synonym relations are rejected (the walk
    excludes them upstream; this re-checks the invariant).
    """
    if path.hops < 2:
        raise RenderError("paths must have at least 2 hops")
    if len(terms) != len(path.concepts):
        raise RenderError("need one realized term per path concept")
    if any(not t for t in terms):
        raise RenderError("realized terms must be non-empty")
    tokens = tokens or SpecialTokens()
    parts: list[str] = []
    spans: list[Span] = []
    labels: list[int] = []
    offset = 0
    for i, relation in enumerate(path.relations):
        if relation is RelationType.SYNONYM:
            raise RenderError("synonym relation in path (invariant breach)")
        parts.append(terms[i])
        offset += len(terms[i]) + 1
        relation_token = tokens.relation[relation]
        parts.append(relation_token)
        spans.append(Span("relation", offset, offset + len(relation_token)))
        labels.append(int(relation))
        offset += len(relation_token) + 1
    parts.append(terms[-1])
    return " ".join(parts), spans, labels


def word_spans(text: str) -> list[tuple[int, int]]:
    """Character spans of whitespace-separated words."""
    spans = []
    start = None
    for i, ch in enumerate(text):
        if ch.isspace():
            if start is not None:
                spans.append((start, i))
                start = None
        elif start is None:
            start = i
    if start is not None:
        spans.append((start, len(text)))
    return spans


def make_masking_directive(
    record: TrainingRecord,
    mlm_probability: float = DEFAULT_MLM_PROBABILITY,
    rng: random.Random | None = None,
    tokens: SpecialTokens | None = None,
    mask_all_relations: bool = True,
) -> MaskingDirective:
    """Compute the masking spans and label policy for one record.

    ep: the tail span exactly, always masked, labels = original content.
    lp: the relation spans (all by default, one uniformly chosen when
    mask_all_relations is False), replaced by the hidden-relation token,
    with the six non-synonym relation codes as the label alphabet.
    mlm: each word selected independently with mlm_probability.
    """
    tokens = tokens or SpecialTokens()
    if record.task == "tc":
        raise RenderError("classification sequences carry no masking directive")
    if record.task == "ep":
        tails = record.spans_by_role("tail")
        if len(tails) != 1:
            raise RenderError("entity-prediction record must have exactly one tail span")
        span = tails[0]
        return MaskingDirective(
            task="ep",
            spans=((span.start, span.end),),
            replacement=tokens.mask,
            always_mask=True,
            labels=(record.slice(span),),
            label_alphabet=None,
        )
    if record.task == "lp":
        relations = record.spans_by_role("relation")
        if not relations or not isinstance(record.labels, list):
            raise RenderError("link-prediction record must carry relation spans and labels")
        if len(relations) != len(record.labels):
            raise RenderError("relation spans and labels are misaligned")
        if any(code not in NON_SYNONYM_CODES for code in record.labels):
            raise RenderError("synonym code in link-prediction labels")
        picked = range(len(relations))
        if not mask_all_relations:
            if rng is None:
                raise RenderError("single-relation masking needs a random stream")
            picked = [rng.randrange(len(relations))]
        return MaskingDirective(
            task="lp",
            spans=tuple((relations[i].start, relations[i].end) for i in picked),
            replacement=tokens.hidden_relation,
            always_mask=True,
            labels=tuple(record.labels[i] for i in picked),
            label_alphabet=NON_SYNONYM_CODES,
        )
    if record.task == "mlm":
        if rng is None:
            raise RenderError("mlm masking needs a random stream")
        if not 0.0 <= mlm_probability <= 1.0:
            raise RenderError("mlm probability must be in [0, 1]")
        selected = [
            (start, end)
            for start, end in word_spans(record.text)
            if rng.random() < mlm_probability
        ]
        return MaskingDirective(
            task="mlm",
            spans=tuple(selected),
            replacement=tokens.mask,
            always_mask=False,
            labels=tuple(record.text[s:e] for s, e in selected),
            label_alphabet=None,
            corruption=MLM_CORRUPTION,
        )
    raise RenderError(f"unknown task {record.task!r}")


def enforce_budget(
    text: str, spans: list[Span], budget: int = DEFAULT_SEQUENCE_BUDGET
) -> tuple[str, list[Span], bool]:
    """Truncate a rendered triple sequence to the word budget, tail-first.

    The budget counts whitespace words plus the consumer's two framing
    tokens. Only tail-span words are dropped (at least one is kept), so
    head and relation spans are never touched.
    """
    limit = budget - BUDGET_RESERVED
    words = word_spans(text)
    if len(words) <= limit:
        return text, spans, False
    tails = [s for s in spans if s.role == "tail"]
    if len(tails) != 1:
        return text, spans, False  # only triple-shaped sequences are truncated
    tail = tails[0]
    excess = len(words) - limit
    tail_words = [w for w in words if w[0] >= tail.start]
    keep = max(1, len(tail_words) - excess)
    new_end = tail_words[keep - 1][1]
    new_text = text[:new_end]
    new_spans = [s if s.role != "tail" else Span("tail", tail.start, new_end) for s in spans]
    return new_text, new_spans, True
