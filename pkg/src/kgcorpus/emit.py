"""Sharded corpus serialization, manifest handling and validation.

Records are emitted as line-delimited JSON objects with fields exactly
{id, task, text, spans, labels}; shard assignment hashes the record id
with the seed, and records within a shard are ordered by id, so a corpus
is byte-identical across reruns and its record multiset is invariant to
the shard count. The manifest is written last and atomically: a corpus
directory without a manifest is invalid by definition.
"""

from __future__ import annotations

import json
import os
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path

from kgcorpus import __version__
from kgcorpus.graph import KnowledgeGraph, RelationType, Triple
from kgcorpus.render import Span, SpecialTokens, TrainingRecord
from kgcorpus.sampling import composition_counts
from kgcorpus.util import sha256_file, stable_seed
from kgcorpus.weights import TaskWeights

MANIFEST_NAME = "manifest.json"
SCHEMA_VERSION = 1

#: Trainer defaults recorded in every manifest (consumers may override).
TRAINING_DEFAULTS = {
    "sequence_length": 256,
    "learning_rate": 0.00075,
    "learning_rate_warmup_steps": 10770,
    "batch_size": 15,
    "gradient_accumulation_steps": 100,
    "mlm_probability": 0.15,
}


class CorpusError(ValueError):
    """Raised on unusable corpus directories or I/O-level failures."""


# -- record serialization -----------------------------------------------


def record_to_line(record: TrainingRecord) -> str:
    obj = {
        "id": record.id,
        "task": record.task,
        "text": record.text,
        "spans": [[s.role, s.start, s.end] for s in record.spans],
        "labels": record.labels,
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def record_from_line(line: str) -> TrainingRecord:
    obj = json.loads(line)
    return TrainingRecord(
        id=obj["id"],
        task=obj["task"],
        text=obj["text"],
        spans=[Span(role, start, end) for role, start, end in obj["spans"]],
        labels=obj["labels"],
    )


def iter_records(shard_path: str | Path) -> Iterator[TrainingRecord]:
    with open(shard_path, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                yield record_from_line(line)


# -- free text ------------------------------------------------------------


@dataclass(slots=True)
class FreeTextDocument:
    id: str
    language: str
    text: str


@dataclass
class FreeTextReport:
    files: int = 0
    documents: int = 0
    dropped_empty: int = 0
    skipped_undecodable: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "files": self.files,
            "documents": self.documents,
            "dropped_empty": self.dropped_empty,
            "skipped_undecodable": self.skipped_undecodable,
        }


def _normalize(text: str) -> str:
    return " ".join(text.split())


def ingest_freetext(
    paths: Iterable[str | Path],
    language: str,
    report: FreeTextReport | None = None,
    strict: bool = False,
) -> list[FreeTextDocument]:
    """Load plain-text or JSONL documents, whitespace-normalized.

    A plain-text file is one document; a .jsonl file holds one document
    per line in a `text` field (optional `id`). Files are processed in
    sorted order; empty documents are dropped and counted; undecodable
    files are skipped and counted unless strict.
    """
    from kgcorpus.util import open_text

    report = report if report is not None else FreeTextReport()
    files: list[Path] = []
    for entry in paths:
        path = Path(entry)
        if path.is_dir():
            files.extend(p for p in sorted(path.rglob("*")) if p.is_file())
        else:
            files.append(path)
    documents: list[FreeTextDocument] = []

    def add(doc_id: str, text: str) -> None:
        normalized = _normalize(text)
        if not normalized:
            report.dropped_empty += 1
            return
        report.documents += 1
        documents.append(FreeTextDocument(doc_id, language, normalized))

    for path in files:
        report.files += 1
        name = path.name
        try:
            if ".jsonl" in name:
                with open_text(path) as handle:
                    for line_no, line in enumerate(handle, 1):
                        if not line.strip():
                            continue
                        obj = json.loads(line)
                        add(str(obj.get("id", f"{name}:{line_no}")), str(obj.get("text", "")))
            else:
                with open_text(path) as handle:
                    add(name, handle.read())
        except (UnicodeDecodeError, json.JSONDecodeError, OSError) as exc:
            if strict:
                raise CorpusError(f"cannot read {path}: {exc}") from exc
            report.skipped_undecodable += 1
    return documents


# -- manifest ---------------------------------------------------------------


@dataclass
class Manifest:
    """Machine-readable corpus summary: counts, weights, digests, seed."""

    seed: int
    language: str
    counts: dict[str, int]
    weights: dict[str, float | int]
    special_tokens: dict[str, object]
    shards: list[dict[str, object]]
    total_bytes: int
    tc_provenance: dict[str, int] = field(default_factory=dict)
    sample_reports: dict[str, object] = field(default_factory=dict)
    ingest_report: dict[str, object] = field(default_factory=dict)
    interleave: dict[str, int] = field(default_factory=dict)
    training_defaults: dict[str, object] = field(default_factory=lambda: dict(TRAINING_DEFAULTS))
    schema_version: int = SCHEMA_VERSION
    tool_version: str = __version__

    def as_dict(self) -> dict[str, object]:
        return {
            "schema_version": self.schema_version,
            "tool_version": self.tool_version,
            "seed": self.seed,
            "language": self.language,
            "counts": self.counts,
            "weights": self.weights,
            "special_tokens": self.special_tokens,
            "shards": self.shards,
            "total_bytes": self.total_bytes,
            "tc_provenance": self.tc_provenance,
            "sample_reports": self.sample_reports,
            "ingest_report": self.ingest_report,
            "interleave": self.interleave,
            "training_defaults": self.training_defaults,
        }


def tokens_to_dict(tokens: SpecialTokens) -> dict[str, object]:
    """Manifest form of the token set; carries integer codes so consumers
    can map link-prediction labels without this package."""
    return {
        "relation": {
            relation.name: {"token": token, "code": int(relation)}
            for relation, token in tokens.relation.items()
        },
        "synonym_code": int(RelationType.SYNONYM),
        "hidden_relation": tokens.hidden_relation,
        "mask": tokens.mask,
        "classification": tokens.classification,
        "separator": tokens.separator,
    }


def tokens_from_dict(data: dict[str, object]) -> SpecialTokens:
    relation = {
        RelationType[name]: entry["token"] for name, entry in data["relation"].items()
    }
    return SpecialTokens(
        relation=relation,
        hidden_relation=data["hidden_relation"],
        mask=data["mask"],
        classification=data["classification"],
        separator=data["separator"],
    )


def load_manifest(corpus_dir: str | Path) -> Manifest:
    path = Path(corpus_dir) / MANIFEST_NAME
    if not path.exists():
        raise CorpusError(f"{corpus_dir} has no {MANIFEST_NAME}; corpus is invalid")
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    return Manifest(
        seed=data["seed"],
        language=data["language"],
        counts=data["counts"],
        weights=data["weights"],
        special_tokens=data["special_tokens"],
        shards=data["shards"],
        total_bytes=data["total_bytes"],
        tc_provenance=data.get("tc_provenance", {}),
        sample_reports=data.get("sample_reports", {}),
        ingest_report=data.get("ingest_report", {}),
        interleave=data.get("interleave", {}),
        training_defaults=data.get("training_defaults", {}),
        schema_version=data["schema_version"],
        tool_version=data.get("tool_version", ""),
    )


def emit(
    records_by_task: dict[str, list[TrainingRecord]],
    out_dir: str | Path,
    shards: int,
    seed: int,
    language: str,
    weights: TaskWeights,
    tokens: SpecialTokens,
    tc_provenance: dict[str, int] | None = None,
    sample_reports: dict[str, object] | None = None,
    ingest_report: dict[str, object] | None = None,
    interleave: dict[str, int] | None = None,
    training_defaults: dict[str, object] | None = None,
) -> Manifest:
    """Write sharded record files plus the manifest (manifest last, atomically)."""
    if shards < 1:
        raise CorpusError("shard count must be at least 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    buckets: list[list[TrainingRecord]] = [[] for _ in range(shards)]
    for task in sorted(records_by_task):
        for record in records_by_task[task]:
            buckets[stable_seed(record.id, seed) % shards].append(record)

    shard_meta: list[dict[str, object]] = []
    total_bytes = 0
    counts = {task: len(records) for task, records in sorted(records_by_task.items())}
    for index, bucket in enumerate(buckets):
        bucket.sort(key=lambda r: r.id)
        name = f"part-{index:05d}.jsonl"
        path = out_dir / name
        task_counts: dict[str, int] = {}
        with open(path, "w", encoding="utf-8") as handle:
            for record in bucket:
                handle.write(record_to_line(record) + "\n")
                task_counts[record.task] = task_counts.get(record.task, 0) + 1
        size = path.stat().st_size
        total_bytes += size
        shard_meta.append(
            {
                "name": name,
                "records": len(bucket),
                "task_counts": dict(sorted(task_counts.items())),
                "bytes": size,
                "sha256": sha256_file(path),
            }
        )

    manifest = Manifest(
        seed=seed,
        language=language,
        counts=counts,
        weights=weights.as_dict(),
        special_tokens=tokens_to_dict(tokens),
        shards=shard_meta,
        total_bytes=total_bytes,
        tc_provenance=dict(tc_provenance or {}),
        sample_reports=dict(sample_reports or {}),
        ingest_report=dict(ingest_report or {}),
        interleave=dict(interleave or {}),
        training_defaults=dict(training_defaults or TRAINING_DEFAULTS),
    )
    tmp_path = out_dir / (MANIFEST_NAME + ".tmp")
    with open(tmp_path, "w", encoding="utf-8") as handle:
        json.dump(manifest.as_dict(), handle, ensure_ascii=False, indent=2, sort_keys=True)
        handle.write("\n")
    os.replace(tmp_path, out_dir / MANIFEST_NAME)
    return manifest


# -- validation -------------------------------------------------------------


@dataclass
class ValidationReport:
    ok: bool = True
    failures: list[str] = field(default_factory=list)
    records_checked: int = 0

    def fail(self, message: str) -> None:
        self.ok = False
        self.failures.append(message)

    def to_text(self) -> str:
        lines = [f"records_checked: {self.records_checked}", f"ok: {self.ok}"]
        lines.extend(f"FAIL: {message}" for message in self.failures)
        return "\n".join(lines) + "\n"


def _check_spans(record: TrainingRecord, report: ValidationReport) -> None:
    previous_end = -1
    for span in sorted(record.spans, key=lambda s: s.start):
        if not (0 <= span.start < span.end <= len(record.text)):
            report.fail(f"record {record.id}: span {span} out of bounds")
            return
        if span.start < previous_end:
            report.fail(f"record {record.id}: overlapping spans")
            return
        previous_end = span.end


def _role_counts(record: TrainingRecord) -> dict[str, int]:
    counts: dict[str, int] = {}
    for span in record.spans:
        counts[span.role] = counts.get(span.role, 0) + 1
    return counts


def validate(
    corpus_dir: str | Path, kg: KnowledgeGraph | None = None
) -> ValidationReport:
    """Re-check digests, counts, span consistency and task contracts.

    When a graph is supplied, link-prediction hops are re-verified against
    it via preferred-term lookup, and triple-classification labels are
    re-checked with the membership index.
    """
    corpus_dir = Path(corpus_dir)
    report = ValidationReport()
    manifest = load_manifest(corpus_dir)  # raises CorpusError when missing
    tokens = tokens_from_dict(manifest.special_tokens)
    relation_tokens = {token: relation for relation, token in tokens.relation.items()}

    term_index: dict[str, set[str]] = {}
    if kg is not None:
        for cui in kg.concepts:
            for _, term in kg.concepts[cui].terms:
                term_index.setdefault(term, set()).add(cui)

    counts: dict[str, int] = {}
    tc_total = 0
    tc_positive = 0
    for shard in manifest.shards:
        path = corpus_dir / str(shard["name"])
        if not path.exists():
            report.fail(f"missing shard {shard['name']}")
            continue
        if path.stat().st_size != shard["bytes"]:
            report.fail(f"shard {shard['name']}: size mismatch")
        digest = sha256_file(path)
        if digest != shard["sha256"]:
            report.fail(f"shard {shard['name']}: digest mismatch")
            continue
        shard_records = 0
        for record in iter_records(path):
            shard_records += 1
            report.records_checked += 1
            counts[record.task] = counts.get(record.task, 0) + 1
            _check_spans(record, report)
            roles = _role_counts(record)
            for span in record.spans_by_role("relation"):
                token = record.slice(span)
                if token not in relation_tokens:
                    report.fail(
                        f"record {record.id}: relation span slices to {token!r}, "
                        "not a relation token"
                    )
            if record.task == "tc":
                tc_total += 1
                if not isinstance(record.labels, bool):
                    report.fail(f"record {record.id}: tc labels must be boolean")
                elif record.labels:
                    tc_positive += 1
                if roles != {"head": 1, "relation": 1, "tail": 1}:
                    report.fail(f"record {record.id}: tc needs one head/relation/tail span")
            elif record.task == "ep":
                if record.labels is not None:
                    report.fail(f"record {record.id}: ep labels must be null")
                if roles != {"head": 1, "relation": 1, "tail": 1}:
                    report.fail(f"record {record.id}: ep needs one head/relation/tail span")
            elif record.task == "lp":
                relation_spans = record.spans_by_role("relation")
                if not isinstance(record.labels, list) or len(record.labels) != len(
                    relation_spans
                ):
                    report.fail(f"record {record.id}: lp labels misaligned with spans")
                else:
                    for span, code in zip(relation_spans, record.labels):
                        relation = relation_tokens.get(record.slice(span))
                        if relation is None or int(relation) != code:
                            report.fail(f"record {record.id}: lp label does not match token")
                        if code == int(RelationType.SYNONYM):
                            report.fail(f"record {record.id}: synonym label in lp record")
                if kg is not None:
                    _check_path_adjacency(record, kg, term_index, relation_tokens, report)
            elif record.task == "mlm":
                if record.labels is not None:
                    report.fail(f"record {record.id}: mlm labels must be null")
            else:
                report.fail(f"record {record.id}: unknown task {record.task!r}")
        if shard_records != shard["records"]:
            report.fail(f"shard {shard['name']}: record count mismatch")

    for task, expected in manifest.counts.items():
        if counts.get(task, 0) != expected:
            report.fail(
                f"task {task}: manifest count {expected} != observed {counts.get(task, 0)}"
            )
    shard_total = sum(int(s["records"]) for s in manifest.shards)
    if shard_total != sum(manifest.counts.values()):
        report.fail("manifest per-task counts do not sum to shard totals")
    byte_total = sum(int(s["bytes"]) for s in manifest.shards)
    if byte_total != manifest.total_bytes:
        report.fail("manifest total_bytes does not match shard byte sum")

    if tc_total:
        _check_tc_composition(manifest, tc_total, tc_positive, report)
    return report


def _check_tc_composition(
    manifest: Manifest, total: int, positive: int, report: ValidationReport
) -> None:
    targets = composition_counts(total)
    observed = dict(manifest.tc_provenance)
    if observed:
        if sum(observed.values()) != total:
            report.fail("tc provenance counts do not sum to the tc record count")
        for provenance, target in targets.items():
            got = observed.get(provenance, 0)
            if abs(got - target) > 1:
                ratios = {k: round(v / total, 4) for k, v in observed.items()}
                report.fail(
                    f"tc composition {ratios} violates the 50/25/25 rule "
                    f"({provenance}: {got} vs target {target})"
                )
    target_positive = targets["positive"]
    if abs(positive - target_positive) > 1:
        report.fail(
            f"tc positive labels {positive}/{total} deviate from the 50% target"
        )


def _check_path_adjacency(
    record: TrainingRecord,
    kg: KnowledgeGraph,
    term_index: dict[str, set[str]],
    relation_tokens: dict[str, RelationType],
    report: ValidationReport,
) -> None:
    """Re-verify each hop of a path record via term lookup and the edge index."""
    spans = record.spans_by_role("relation")
    segments: list[str] = []
    cursor = 0
    for span in spans:
        segments.append(record.text[cursor : span.start].strip())
        cursor = span.end
    segments.append(record.text[cursor:].strip())
    if len(segments) != len(spans) + 1:
        report.fail(f"record {record.id}: malformed path text")
        return
    for i, span in enumerate(spans):
        relation = relation_tokens[record.slice(span)]
        heads = term_index.get(segments[i], set())
        tails = term_index.get(segments[i + 1], set())
        if not heads or not tails:
            report.fail(f"record {record.id}: path concept not found in graph terms")
            return
        if not any(
            kg.contains(Triple(h, relation, t)) for h in heads for t in tails
        ):
            report.fail(f"record {record.id}: hop {i} is not an edge of the graph")
            return
