import random
from pathlib import Path

import pytest

from kgcorpus.graph import RelationType, Triple
from kgcorpus.render import (
    RenderError,
    Span,
    SpecialTokens,
    TrainingRecord,
    enforce_budget,
    make_masking_directive,
    realize_terms,
    render_path,
    render_triple,
    word_spans,
)
from kgcorpus.sampling import Path as KgPath

from conftest import small_graph

GOLDEN = Path(__file__).parent / "golden"

_GOLDEN_TRIPLES = [
    ("atrial fibrillation", RelationType.PARENT, "heart disease"),
    ("x", RelationType.CHILD, "y"),
    ("AFib", RelationType.SYNONYM, "atrial fibrillation"),
    ("heart", RelationType.ALLOWED_QUALIFIER, "left"),
    ("left", RelationType.QUALIFIED_BY, "heart"),
    ("aspirin", RelationType.BROADER, "nsaid"),
    ("nsaid", RelationType.NARROWER, "aspirin"),
    ("multi word head token", RelationType.BROADER, "multi word tail"),
]


def test_triple_rendering_matches_golden_bytes():
    rendered = [render_triple(h, r, t)[0] for h, r, t in _GOLDEN_TRIPLES]
    expected = (GOLDEN / "triples.txt").read_bytes()
    assert ("\n".join(rendered) + "\n").encode("utf-8") == expected


def test_triple_spans_and_exact_layout():
    text, spans = render_triple("atrial fibrillation", RelationType.PARENT, "heart disease")
    assert text == "atrial fibrillation [REL_PAR] heart disease"
    assert spans == [
        Span("head", 0, 19),
        Span("relation", 20, 29),
        Span("tail", 30, 43),
    ]


def test_triple_spans_slice_back_to_inputs():
    for head, relation, tail in _GOLDEN_TRIPLES:
        text, spans = render_triple(head, relation, tail)
        by_role = {s.role: text[s.start : s.end] for s in spans}
        assert by_role == {"head": head, "relation": relation.token, "tail": tail}


def test_render_triple_rejects_empty_strings():
    with pytest.raises(RenderError):
        render_triple("", RelationType.PARENT, "tail")
    with pytest.raises(RenderError):
        render_triple("head", RelationType.PARENT, "")


def test_path_rendering_matches_golden_bytes():
    path = KgPath(
        concepts=("A", "B", "C"),
        relations=(RelationType.PARENT, RelationType.BROADER),
    )
    text, spans, labels = render_path(
        path, ["atrial fibrillation", "heart disease", "cardiovascular disorder"]
    )
    assert (text + "\n").encode("utf-8") == (GOLDEN / "path.txt").read_bytes()
    assert labels == [int(RelationType.PARENT), int(RelationType.BROADER)]
    assert [text[s.start : s.end] for s in spans] == ["[REL_PAR]", "[REL_RB]"]


def test_path_rendering_rejects_synonym_and_short_paths():
    with pytest.raises(RenderError):
        render_path(
            KgPath(("A", "B", "C"), (RelationType.SYNONYM, RelationType.PARENT)),
            ["a", "b", "c"],
        )
    with pytest.raises(RenderError):
        render_path(KgPath(("A", "B"), (RelationType.PARENT,)), ["a", "b"])


def test_path_label_alignment_on_synthetic_paths(synth):
    from kgcorpus.sampling import plan_strata, sample_paths

    kg, _ = synth
    plan = plan_strata(kg, {"lp": 2_000}, seed=4)
    paths, _ = sample_paths(kg, plan, max_hops=4)
    for path in paths:
        terms = [kg.concepts[c].preferred_term["ENG"] for c in path.concepts]
        text, spans, labels = render_path(path, terms)
        assert len(labels) == len(spans)
        for span, code in zip(spans, labels):
            assert text[span.start : span.end] == RelationType(code).token


# -- term realization -------------------------------------------------------


def test_realize_terms_non_synonym_uses_preferred():
    kg = small_graph()
    rng = random.Random(0)
    head, tail, fallback = realize_terms(
        kg, Triple("C01", RelationType.PARENT, "C02"), "ENG", rng
    )
    assert head == "atrial fibrillation"
    assert (head, tail) == (
        kg.concepts["C01"].preferred_term["ENG"],
        kg.concepts["C02"].preferred_term["ENG"],
    )
    assert not fallback


def test_realize_terms_synonym_tail_never_preferred():
    kg = small_graph()
    rng = random.Random(1)
    preferred = kg.concepts["C01"].preferred_term["ENG"]
    others = {t for t in kg.concepts["C01"].terms_in("ENG") if t != preferred}
    seen = set()
    for _ in range(1_000):
        _, tail, fallback = realize_terms(
            kg, Triple("C02", RelationType.SYNONYM, "C01"), "ENG", rng
        )
        assert tail != preferred
        assert not fallback
        seen.add(tail)
    assert seen == others  # both alternatives drawn


def test_realize_terms_single_term_falls_back_to_preferred():
    kg = small_graph()
    rng = random.Random(2)
    _, tail, fallback = realize_terms(
        kg, Triple("C01", RelationType.SYNONYM, "C02"), "ENG", rng
    )
    assert tail == kg.concepts["C02"].preferred_term["ENG"]
    assert fallback


def test_realize_terms_missing_language_errors():
    kg = small_graph()
    with pytest.raises(RenderError, match="C01"):
        realize_terms(kg, Triple("C01", RelationType.PARENT, "C02"), "FRE", random.Random(0))


# -- special tokens ----------------------------------------------------------


def test_special_tokens_must_be_distinct():
    tokens = SpecialTokens(hidden_relation="[MASK]")
    with pytest.raises(RenderError):
        tokens.validate()


def test_special_tokens_report_term_collisions():
    kg = small_graph()
    assert SpecialTokens().find_in_terms(kg) == []
    bad = SpecialTokens(mask="fib")  # substring of "atrial fibrillation"
    offenders = bad.find_in_terms(kg)
    assert any(cui == "C01" for _, cui, _ in offenders)


# -- masking directives --------------------------------------------------------


def _tc_record():
    text, spans = render_triple("aspirin", RelationType.BROADER, "nsaid")
    return TrainingRecord("t1", "tc", text, spans, True)


def _ep_record():
    text, spans = render_triple("aspirin", RelationType.BROADER, "acid remedy")
    return TrainingRecord("e1", "ep", text, spans, None)


def _lp_record():
    path = KgPath(("A", "B", "C"), (RelationType.PARENT, RelationType.BROADER))
    text, spans, labels = render_path(path, ["one term", "two term", "three term"])
    return TrainingRecord("l1", "lp", text, spans, labels)


def test_tc_records_have_no_masking_directive():
    with pytest.raises(RenderError):
        make_masking_directive(_tc_record())


def test_ep_directive_covers_exactly_the_tail_span():
    record = _ep_record()
    directive = make_masking_directive(record)
    tail = record.spans_by_role("tail")[0]
    assert directive.spans == ((tail.start, tail.end),)
    assert directive.always_mask
    assert directive.labels == ("acid remedy",)
    head = record.spans_by_role("head")[0]
    relation = record.spans_by_role("relation")[0]
    for start, end in directive.spans:
        assert not (start < head.end and end > head.start)
        assert not (start < relation.end and end > relation.start)


def test_lp_directive_masks_all_relations_with_six_way_alphabet():
    record = _lp_record()
    directive = make_masking_directive(record)
    assert len(directive.spans) == 2
    assert directive.replacement == "[HREL]"
    assert directive.labels == (int(RelationType.PARENT), int(RelationType.BROADER))
    assert len(directive.label_alphabet) == 6
    assert int(RelationType.SYNONYM) not in directive.label_alphabet


def test_lp_directive_single_relation_flag():
    record = _lp_record()
    directive = make_masking_directive(record, rng=random.Random(3), mask_all_relations=False)
    assert len(directive.spans) == 1
    assert len(directive.labels) == 1


def test_mlm_mask_rate_concentrates_at_probability():
    """10^6 maskable words at p=0.15 -> realized rate within [0.148, 0.152]."""
    rng = random.Random(99)
    words_per_record = 200
    text = " ".join(f"w{i}" for i in range(words_per_record))
    total = 0
    masked = 0
    for i in range(5_000):
        record = TrainingRecord(f"m{i}", "mlm", text, [], None)
        directive = make_masking_directive(record, mlm_probability=0.15, rng=rng)
        total += words_per_record
        masked += len(directive.spans)
    assert total == 1_000_000
    assert 0.148 <= masked / total <= 0.152


def test_mlm_directive_carries_corruption_split():
    record = TrainingRecord("m", "mlm", "alpha beta gamma", [], None)
    directive = make_masking_directive(record, mlm_probability=1.0, rng=random.Random(0))
    assert directive.corruption == (0.8, 0.1, 0.1)
    assert directive.spans == tuple(word_spans("alpha beta gamma"))
    assert directive.labels == ("alpha", "beta", "gamma")


# -- budget enforcement --------------------------------------------------------


def test_budget_truncates_tail_first_and_keeps_spans_valid():
    head = "a b c"
    tail = " ".join(f"t{i}" for i in range(300))
    text, spans = render_triple(head, RelationType.PARENT, tail)
    new_text, new_spans, truncated = enforce_budget(text, spans, budget=64)
    assert truncated
    assert len(word_spans(new_text)) == 62  # budget minus the two framing tokens
    by_role = {s.role: new_text[s.start : s.end] for s in new_spans}
    assert by_role["head"] == head
    assert by_role["relation"] == "[REL_PAR]"
    assert tail.startswith(by_role["tail"])


def test_budget_leaves_short_sequences_alone():
    text, spans = render_triple("short", RelationType.PARENT, "tail")
    new_text, new_spans, truncated = enforce_budget(text, spans)
    assert not truncated and new_text == text and new_spans == spans
