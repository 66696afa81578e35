"""End-to-end corpus build: plan, sample, render, emit."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from kgcorpus.emit import (
    FreeTextDocument,
    Manifest,
    TRAINING_DEFAULTS,
    emit,
)
from kgcorpus.graph import KnowledgeGraph
from kgcorpus.render import (
    DEFAULT_SEQUENCE_BUDGET,
    SpecialTokens,
    TrainingRecord,
    enforce_budget,
    realize_terms,
    render_path,
    render_triple,
    word_spans,
)
from kgcorpus.sampling import plan_strata, sample_ep, sample_paths, sample_tc
from kgcorpus.util import content_id, stable_seed
from kgcorpus.weights import compute_weights_for

KG_TASK_NAMES = ("tc", "ep", "lp")


@dataclass
class BuildConfig:
    language: str = "ENG"
    seed: int = 0
    tc_size: int = 0
    ep_size: int = 0
    lp_size: int = 0
    max_hops: int = 4
    mlm_probability: float = 0.15
    shards: int = 1
    sample_shards: int = 1
    disabled: frozenset[str] = frozenset()
    sequence_budget: int = DEFAULT_SEQUENCE_BUDGET
    mask_all_relations: bool = True

    def task_sizes(self) -> dict[str, int]:
        sizes = {"tc": self.tc_size, "ep": self.ep_size, "lp": self.lp_size}
        return {task: 0 if task in self.disabled else size for task, size in sizes.items()}


@dataclass
class BuildReport:
    truncated: dict[str, int] = field(default_factory=dict)
    synonym_term_fallbacks: int = 0
    token_collisions: list[tuple[str, str, str]] = field(default_factory=list)

    def as_dict(self) -> dict[str, object]:
        return {
            "truncated": dict(sorted(self.truncated.items())),
            "synonym_term_fallbacks": self.synonym_term_fallbacks,
            "token_collisions": [list(c) for c in self.token_collisions[:20]],
        }


def _preferred(kg: KnowledgeGraph, cui: str, language: str) -> str:
    term = kg.concepts[cui].preferred_term.get(language)
    if term is None:
        raise ValueError(f"concept {cui} has no term in language {language}")
    return term


def build_records(
    kg: KnowledgeGraph,
    config: BuildConfig,
    freetext: list[FreeTextDocument],
    tokens: SpecialTokens | None = None,
) -> tuple[dict[str, list[TrainingRecord]], dict[str, object], BuildReport]:
    """Sample and render all enabled tasks into TrainingRecords.

    Returns records per task, the sampler reports (plus tc provenance
    counts), and the rendering report.
    """
    tokens = tokens or SpecialTokens()
    tokens.validate()
    report = BuildReport()
    report.token_collisions = tokens.find_in_terms(kg)

    sizes = config.task_sizes()
    plan = plan_strata(kg, sizes, seed=config.seed)
    records: dict[str, list[TrainingRecord]] = {}
    sample_reports: dict[str, object] = {}

    def truncate(task: str, text: str, spans: list) -> tuple[str, list]:
        new_text, new_spans, truncated = enforce_budget(text, spans, config.sequence_budget)
        if truncated:
            report.truncated[task] = report.truncated.get(task, 0) + 1
        return new_text, new_spans

    if sizes["tc"]:
        examples, tc_report = sample_tc(kg, plan, shards=config.sample_shards)
        rng = random.Random(stable_seed(config.seed, "realize", "tc"))
        out = []
        for index, example in enumerate(examples):
            head, tail, fallback = realize_terms(kg, example.triple, config.language, rng)
            report.synonym_term_fallbacks += fallback
            text, spans = render_triple(head, example.triple.relation, tail, tokens)
            text, spans = truncate("tc", text, spans)
            out.append(
                TrainingRecord(
                    id=content_id("tc", *example.triple, example.provenance, index),
                    task="tc",
                    text=text,
                    spans=spans,
                    labels=example.label,
                )
            )
        records["tc"] = out
        sample_reports["tc"] = tc_report.as_dict()

    if sizes["ep"]:
        triples, ep_report = sample_ep(kg, plan, shards=config.sample_shards)
        rng = random.Random(stable_seed(config.seed, "realize", "ep"))
        out = []
        for index, triple in enumerate(triples):
            head, tail, fallback = realize_terms(kg, triple, config.language, rng)
            report.synonym_term_fallbacks += fallback
            text, spans = render_triple(head, triple.relation, tail, tokens)
            text, spans = truncate("ep", text, spans)
            out.append(
                TrainingRecord(
                    id=content_id("ep", *triple, index),
                    task="ep",
                    text=text,
                    spans=spans,
                    labels=None,
                )
            )
        records["ep"] = out
        sample_reports["ep"] = ep_report.as_dict()

    if sizes["lp"]:
        paths, lp_report = sample_paths(
            kg, plan, max_hops=config.max_hops, shards=config.sample_shards
        )
        out = []
        for index, path in enumerate(paths):
            terms = [_preferred(kg, cui, config.language) for cui in path.concepts]
            text, spans, labels = render_path(path, terms, tokens)
            out.append(
                TrainingRecord(
                    id=content_id("lp", "|".join(path.concepts), index),
                    task="lp",
                    text=text,
                    spans=spans,
                    labels=labels,
                )
            )
        records["lp"] = out
        sample_reports["lp"] = lp_report.as_dict()

    if freetext:
        limit = config.sequence_budget - 2
        out = []
        for doc in freetext:
            text = doc.text
            words = word_spans(text)
            if len(words) > limit:
                text = text[: words[limit - 1][1]]
                report.truncated["mlm"] = report.truncated.get("mlm", 0) + 1
            out.append(
                TrainingRecord(
                    id=content_id("mlm", doc.id),
                    task="mlm",
                    text=text,
                    spans=[],
                    labels=None,
                )
            )
        records["mlm"] = out

    return records, sample_reports, report


def build_corpus(
    kg: KnowledgeGraph,
    config: BuildConfig,
    freetext: list[FreeTextDocument],
    out_dir: str | Path,
    tokens: SpecialTokens | None = None,
    ingest_report: dict[str, object] | None = None,
) -> tuple[Manifest, BuildReport]:
    """Build and emit a full corpus directory; returns its manifest."""
    tokens = tokens or SpecialTokens()
    records, sample_reports, report = build_records(kg, config, freetext, tokens)

    weight_counts = {
        task: len(records[task]) for task in KG_TASK_NAMES if records.get(task)
    }
    weights = compute_weights_for(weight_counts, n_mlm=len(records.get("mlm", [])))

    tc_provenance: dict[str, int] = {}
    if "tc" in sample_reports:
        tc_provenance = dict(sample_reports["tc"]["realized_provenance"])

    training_defaults = dict(TRAINING_DEFAULTS)
    training_defaults["mlm_probability"] = config.mlm_probability
    training_defaults["sequence_length"] = config.sequence_budget

    manifest = emit(
        records,
        out_dir,
        shards=config.shards,
        seed=config.seed,
        language=config.language,
        weights=weights,
        tokens=tokens,
        tc_provenance=tc_provenance,
        sample_reports={
            "samplers": sample_reports,
            "rendering": report.as_dict(),
        },
        ingest_report=ingest_report or {},
        interleave={"seed": config.seed},
        training_defaults=training_defaults,
    )
    return manifest, report
