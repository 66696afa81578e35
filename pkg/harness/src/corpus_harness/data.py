"""Corpus loading: manifest verification, vocabulary, batch assembly.

Implements the consumption side of the corpus contract: records are
line-delimited JSON objects {id, task, text, spans, labels}; text joins
segments with single spaces; classification/separator tokens are added
here; masking is whole-span (every word token overlapping a masked
character span is masked). Unmasked label positions carry the ignore
index and contribute nothing to any loss.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

import torch

IGNORE_INDEX = -100
PAD, UNK = "[PAD]", "[UNK]"
_SPECIAL_SHAPE = re.compile(r"^\[[^\s\[\]]+\]$")


class CorpusFormatError(ValueError):
    """Raised when a corpus directory violates the file contract."""


@dataclass
class ManifestInfo:
    """The slice of the manifest the trainer needs."""

    seed: int
    language: str
    counts: dict[str, int]
    weights: dict[str, float]
    relation_token_codes: dict[str, int]  # token string -> relation code
    synonym_code: int
    hidden_relation: str
    mask: str
    classification: str
    separator: str
    mlm_probability: float
    sequence_length: int
    shards: list[dict]

    @property
    def lp_classes(self) -> list[int]:
        """Relation codes predictable at hidden-relation positions (6-way)."""
        return sorted(c for c in self.relation_token_codes.values() if c != self.synonym_code)

    def special_tokens(self) -> list[str]:
        return [
            self.classification,
            self.separator,
            self.mask,
            self.hidden_relation,
            *sorted(self.relation_token_codes),
        ]


def load_manifest(corpus_dir: str | Path) -> ManifestInfo:
    path = Path(corpus_dir) / "manifest.json"
    if not path.exists():
        raise CorpusFormatError(f"{corpus_dir} has no manifest.json; corpus is invalid")
    data = json.loads(path.read_text(encoding="utf-8"))
    tokens = data["special_tokens"]
    relation_token_codes = {
        entry["token"]: int(entry["code"]) for entry in tokens["relation"].values()
    }
    defaults = data.get("training_defaults", {})
    return ManifestInfo(
        seed=int(data["seed"]),
        language=data["language"],
        counts={k: int(v) for k, v in data["counts"].items()},
        weights={k: float(v) for k, v in data["weights"].items() if k.startswith("alpha_")},
        relation_token_codes=relation_token_codes,
        synonym_code=int(tokens["synonym_code"]),
        hidden_relation=tokens["hidden_relation"],
        mask=tokens["mask"],
        classification=tokens["classification"],
        separator=tokens["separator"],
        mlm_probability=float(defaults.get("mlm_probability", 0.15)),
        sequence_length=int(defaults.get("sequence_length", 256)),
        shards=data["shards"],
    )


def verify_shards(corpus_dir: str | Path, manifest: ManifestInfo) -> None:
    """Digest and count re-check; the load precondition is a valid corpus."""
    corpus_dir = Path(corpus_dir)
    total = 0
    for shard in manifest.shards:
        path = corpus_dir / shard["name"]
        if not path.exists():
            raise CorpusFormatError(f"missing shard {shard['name']}")
        hasher = hashlib.sha256()
        with open(path, "rb") as handle:
            for block in iter(lambda: handle.read(1 << 20), b""):
                hasher.update(block)
        if hasher.hexdigest() != shard["sha256"]:
            raise CorpusFormatError(f"shard {shard['name']} fails its digest")
        total += int(shard["records"])
    if total != sum(manifest.counts.values()):
        raise CorpusFormatError("shard record counts disagree with manifest counts")


def _word_spans(text: str) -> list[tuple[int, int]]:
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


@dataclass
class EncodedRecord:
    """One record as word tokens plus token-aligned task annotations."""

    task: str
    words: list[str]
    tail_tokens: tuple[int, ...] = ()  # ep: positions to mask
    relation_positions: tuple[int, ...] = ()  # lp: positions to hide
    relation_classes: tuple[int, ...] = ()  # lp: 6-way class per position
    tc_label: int | None = None


def _overlapping_tokens(spans, start, end) -> tuple[int, ...]:
    return tuple(i for i, (ws, we) in enumerate(spans) if ws < end and we > start)


def encode_record(obj: dict, manifest: ManifestInfo) -> EncodedRecord:
    text = obj["text"]
    task = obj["task"]
    spans = _word_spans(text)
    words = [text[s:e] for s, e in spans]
    registered = set(manifest.special_tokens())
    for word in words:
        if _SPECIAL_SHAPE.match(word) and word not in registered:
            raise CorpusFormatError(f"unregistered special token {word!r} in record {obj['id']}")

    if task == "tc":
        if not isinstance(obj["labels"], bool):
            raise CorpusFormatError(f"record {obj['id']}: tc labels must be boolean")
        return EncodedRecord(task, words, tc_label=int(obj["labels"]))

    if task == "ep":
        tail = [s for s in obj["spans"] if s[0] == "tail"]
        if len(tail) != 1:
            raise CorpusFormatError(f"record {obj['id']}: ep needs exactly one tail span")
        _, start, end = tail[0]
        return EncodedRecord(task, words, tail_tokens=_overlapping_tokens(spans, start, end))

    if task == "lp":
        relations = [s for s in obj["spans"] if s[0] == "relation"]
        labels = obj["labels"]
        if not isinstance(labels, list) or len(labels) != len(relations):
            raise CorpusFormatError(f"record {obj['id']}: lp labels misaligned")
        classes = manifest.lp_classes
        positions = []
        class_ids = []
        for (_, start, end), code in zip(relations, labels):
            tokens = _overlapping_tokens(spans, start, end)
            if len(tokens) != 1:
                raise CorpusFormatError(f"record {obj['id']}: relation span is not one token")
            if code not in classes:
                raise CorpusFormatError(f"record {obj['id']}: label {code} outside alphabet")
            positions.append(tokens[0])
            class_ids.append(classes.index(code))
        return EncodedRecord(
            task, words, relation_positions=tuple(positions), relation_classes=tuple(class_ids)
        )

    if task == "mlm":
        return EncodedRecord(task, words)
    raise CorpusFormatError(f"unknown task {task!r}")


class Vocabulary:
    """Whitespace-level vocabulary with registered special tokens."""

    def __init__(self, manifest: ManifestInfo, records: list[EncodedRecord]):
        self.itos: list[str] = [PAD, UNK, *manifest.special_tokens()]
        seen = set(self.itos)
        frequency: dict[str, int] = {}
        for record in records:
            for word in record.words:
                if word not in seen:
                    frequency[word] = frequency.get(word, 0) + 1
        self.itos.extend(sorted(frequency, key=lambda w: (-frequency[w], w)))
        self.stoi = {token: i for i, token in enumerate(self.itos)}
        self.pad_id = self.stoi[PAD]
        self.unk_id = self.stoi[UNK]
        self.cls_id = self.stoi[manifest.classification]
        self.sep_id = self.stoi[manifest.separator]
        self.mask_id = self.stoi[manifest.mask]
        self.hrel_id = self.stoi[manifest.hidden_relation]
        #: ids eligible as random replacements in MLM corruption (plain words).
        self.word_ids = list(range(2 + len(manifest.special_tokens()), len(self.itos)))

    def __len__(self) -> int:
        return len(self.itos)

    def id(self, word: str) -> int:
        return self.stoi.get(word, self.unk_id)


@dataclass
class Batch:
    input_ids: torch.Tensor  # (B, L)
    attention_mask: torch.Tensor  # (B, L), 1 = real token
    tasks: list[str]
    token_labels: torch.Tensor  # (B, L) vocabulary targets for mlm/ep, else ignore
    lp_labels: torch.Tensor  # (B, L) 6-way targets at hidden positions, else ignore
    tc_labels: torch.Tensor  # (B,) binary targets for tc rows, else ignore

    def rows_for(self, task: str) -> list[int]:
        return [i for i, t in enumerate(self.tasks) if t == task]


class CorpusDataset:
    """Validated, encoded corpus plus deterministic batch assembly."""

    def __init__(
        self,
        corpus_dir: str | Path,
        mlm_probability: float | None = None,
        sequence_length: int | None = None,
    ):
        self.manifest = load_manifest(corpus_dir)
        verify_shards(corpus_dir, self.manifest)
        self.mlm_probability = (
            self.manifest.mlm_probability if mlm_probability is None else mlm_probability
        )
        self.sequence_length = (
            self.manifest.sequence_length if sequence_length is None else sequence_length
        )
        raw: list[tuple[str, dict]] = []
        for shard in self.manifest.shards:
            with open(Path(corpus_dir) / shard["name"], "r", encoding="utf-8") as handle:
                for line in handle:
                    if line.strip():
                        obj = json.loads(line)
                        raw.append((obj["id"], obj))
        raw.sort(key=lambda pair: pair[0])
        self.records = [encode_record(obj, self.manifest) for _, obj in raw]
        longest = max((len(r.words) for r in self.records), default=0)
        if longest + 2 > self.sequence_length:
            raise CorpusFormatError(
                f"sequence cap {self.sequence_length} is below the longest "
                f"record ({longest} words + 2 framing tokens)"
            )
        self.vocab = Vocabulary(self.manifest, self.records)
        self.tasks_present = sorted({r.task for r in self.records})

    def epoch_order(self, epoch: int) -> list[int]:
        order = list(range(len(self.records)))
        # str seeds hash deterministically across processes, unlike hash().
        random.Random(f"{self.manifest.seed}:{epoch}").shuffle(order)
        return order

    def batches(self, batch_size: int, rng: random.Random):
        """Yield batches forever, reshuffling per epoch (manifest-seeded)."""
        epoch = 0
        while True:
            order = self.epoch_order(epoch)
            for start in range(0, len(order), batch_size):
                chunk = [self.records[i] for i in order[start : start + batch_size]]
                if chunk:
                    yield self.collate(chunk, rng)
            epoch += 1

    def collate(self, records: list[EncodedRecord], rng: random.Random) -> Batch:
        width = min(self.sequence_length, max(len(r.words) for r in records) + 2)
        size = len(records)
        input_ids = torch.full((size, width), self.vocab.pad_id, dtype=torch.long)
        attention = torch.zeros((size, width), dtype=torch.long)
        token_labels = torch.full((size, width), IGNORE_INDEX, dtype=torch.long)
        lp_labels = torch.full((size, width), IGNORE_INDEX, dtype=torch.long)
        tc_labels = torch.full((size,), IGNORE_INDEX, dtype=torch.long)
        for row, record in enumerate(records):
            ids = [self.vocab.cls_id]
            ids.extend(self.vocab.id(w) for w in record.words)
            ids.append(self.vocab.sep_id)
            length = len(ids)
            input_ids[row, :length] = torch.tensor(ids, dtype=torch.long)
            attention[row, :length] = 1
            offset = 1  # words shift right by one for the classification token
            if record.task == "ep":
                for position in record.tail_tokens:
                    token_labels[row, position + offset] = input_ids[row, position + offset]
                    input_ids[row, position + offset] = self.vocab.mask_id
            elif record.task == "lp":
                for position, class_id in zip(
                    record.relation_positions, record.relation_classes
                ):
                    lp_labels[row, position + offset] = class_id
                    input_ids[row, position + offset] = self.vocab.hrel_id
            elif record.task == "tc":
                tc_labels[row] = record.tc_label
            elif record.task == "mlm":
                for position in range(len(record.words)):
                    if rng.random() >= self.mlm_probability:
                        continue
                    target = position + offset
                    token_labels[row, target] = input_ids[row, target]
                    roll = rng.random()
                    if roll < 0.8:
                        input_ids[row, target] = self.vocab.mask_id
                    elif roll < 0.9 and self.vocab.word_ids:
                        input_ids[row, target] = rng.choice(self.vocab.word_ids)
                    # else: keep the original token
        return Batch(
            input_ids=input_ids,
            attention_mask=attention,
            tasks=[r.task for r in records],
            token_labels=token_labels,
            lp_labels=lp_labels,
            tc_labels=tc_labels,
        )
