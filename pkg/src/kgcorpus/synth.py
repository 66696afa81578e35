"""Synthetic terminology-release generator.

Writes concept/relation/type/group files in the exact pipe-delimited
layouts the ingest parsers expect, together with ground-truth tallies for
every quantity the pipeline later reports. Output is fully determined by
the spec's seed, so round-trip tests can compare byte-for-byte.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from kgcorpus.graph import RelationType

_SYLLABLES = [
    "an", "bel", "cor", "dan", "eth", "fir", "gal", "hom", "ist", "jor",
    "kel", "lum", "mor", "nat", "oph", "pra", "qui", "rov", "sul", "tev",
    "urn", "vex", "wil", "xan", "yor", "zem",
]

_PREFERRED_SUFFIX = {"ENG": "disease", "FRE": "maladie", "SPA": "enfermedad"}

#: Release codes in the order edges are written, matching the default map.
_RELATION_CODES = {
    RelationType.PARENT: "PAR",
    RelationType.CHILD: "CHD",
    RelationType.SYNONYM: "SY",
    RelationType.ALLOWED_QUALIFIER: "AQ",
    RelationType.QUALIFIED_BY: "QB",
    RelationType.BROADER: "RB",
    RelationType.NARROWER: "RN",
}


@dataclass
class SyntheticKgSpec:
    """Shape of a synthetic release: sizes, weights and distributions."""

    concept_count: int = 100
    group_weights: dict[str, float] = field(
        default_factory=lambda: {"ANAT": 0.2, "CHEM": 0.3, "DISO": 0.5}
    )
    terms_per_concept: tuple[int, int] = (1, 3)
    edges_per_relation: dict[RelationType, int] = field(
        default_factory=lambda: {r: 100 for r in RelationType}
    )
    languages: tuple[str, ...] = ("ENG",)
    # Extra memberships are drawn only from groups sorting above the
    # primary one, so the canonical (smallest) group stays the weighted draw.
    extra_group_prob: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.concept_count <= 0:
            raise ValueError("concept_count must be positive")
        if not self.group_weights:
            raise ValueError("group_weights must be non-empty")
        if any(w <= 0 for w in self.group_weights.values()):
            raise ValueError("group weights must be positive")
        if abs(sum(self.group_weights.values()) - 1.0) > 1e-9:
            raise ValueError("group weights must sum to 1")
        lo, hi = self.terms_per_concept
        if lo < 1 or hi < lo:
            raise ValueError("terms_per_concept bounds must satisfy 1 <= lo <= hi")
        if not self.languages:
            raise ValueError("at least one language required")
        pair_limit = self.concept_count * (self.concept_count - 1)
        for relation, count in self.edges_per_relation.items():
            if count <= 0:
                raise ValueError(f"edge count for {relation.name} must be positive")
            if count > pair_limit:
                raise ValueError(
                    f"edge count for {relation.name} exceeds distinct pair limit {pair_limit}"
                )


@dataclass
class GroundTruth:
    """Generator-side tallies the ingested graph must reproduce exactly."""

    concepts: int
    terms_per_language: dict[str, int]
    cuis_per_language: dict[str, int]
    relations_per_language: dict[str, int]
    per_relation: dict[str, int]
    per_group_concepts: dict[str, int]
    per_group_triples: dict[str, int]
    total_edges: int
    file_rows: dict[str, int]

    def as_dict(self) -> dict[str, object]:
        return {
            "concepts": self.concepts,
            "terms_per_language": self.terms_per_language,
            "cuis_per_language": self.cuis_per_language,
            "relations_per_language": self.relations_per_language,
            "per_relation": self.per_relation,
            "per_group_concepts": self.per_group_concepts,
            "per_group_triples": self.per_group_triples,
            "total_edges": self.total_edges,
            "file_rows": self.file_rows,
        }


def _name_root(rng: random.Random, index: int) -> str:
    word = "".join(rng.choice(_SYLLABLES) for _ in range(3))
    return f"{word}{index}"


def generate_synthetic_kg(spec: SyntheticKgSpec, out_dir: str | Path) -> GroundTruth:
    """Write a synthetic release under out_dir and return its ground truth.

    Layouts: concept file with the term string in field 14 (18 fields plus
    trailing pipe), relation file with the code in field 3 and the second
    cui in field 4, type file with the type id in field 1, and a group
    mapping file with group code in field 0 / type id in field 2.
    """
    spec.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(spec.seed)

    groups = sorted(spec.group_weights)
    weights = [spec.group_weights[g] for g in groups]
    # Two type identifiers per group, written to the mapping file.
    group_types = {g: (f"T{2 * i + 1:03d}", f"T{2 * i + 2:03d}") for i, g in enumerate(groups)}

    cuis = [f"C{i:07d}" for i in range(1, spec.concept_count + 1)]
    primary = rng.choices(groups, weights=weights, k=spec.concept_count)
    memberships: dict[str, list[str]] = {}
    for cui, group in zip(cuis, primary):
        extra: list[str] = []
        if spec.extra_group_prob > 0 and rng.random() < spec.extra_group_prob:
            above = [g for g in groups if g > group]
            if above:
                extra = [rng.choice(above)]
        memberships[cui] = [group] + extra

    lo, hi = spec.terms_per_concept
    terms_per_language = {lang: 0 for lang in spec.languages}
    concept_rows: list[str] = []
    for i, cui in enumerate(cuis):
        root = _name_root(rng, i + 1)
        for lang in spec.languages:
            n_terms = rng.randint(lo, hi)
            terms_per_language[lang] += n_terms
            for j in range(n_terms):
                if j == 0:
                    term = f"{root} {_PREFERRED_SUFFIX.get(lang, lang.lower())}"
                    status, ispref = "P", "Y"
                else:
                    term = f"{root} {lang.lower()} v{j}"
                    status, ispref = "S", "N"
                fields = [""] * 18
                fields[0] = cui
                fields[1] = lang
                fields[2] = status
                fields[6] = ispref
                fields[11] = "SYNTH"
                fields[14] = term
                concept_rows.append("|".join(fields) + "|")

    edge_rows: list[str] = []
    per_relation: dict[str, int] = {}
    per_group_triples = {g: 0 for g in groups}
    total_edges = 0
    for relation in RelationType:
        count = spec.edges_per_relation.get(relation)
        if not count:
            continue
        seen: set[tuple[str, str]] = set()
        attempts = 0
        while len(seen) < count:
            attempts += 1
            if attempts > 50 * count + 1000:
                raise ValueError(f"could not draw {count} distinct edges for {relation.name}")
            head = cuis[rng.randrange(spec.concept_count)]
            tail = cuis[rng.randrange(spec.concept_count)]
            if head == tail or (head, tail) in seen:
                continue
            seen.add((head, tail))
            # Release rows are (CUI1, REL, CUI2); ingest emits head=CUI2.
            fields = [""] * 16
            fields[0] = tail
            fields[3] = _RELATION_CODES[relation]
            fields[4] = head
            fields[10] = "SYNTH"
            edge_rows.append("|".join(fields) + "|")
            per_group_triples[memberships[head][0]] += 1
        per_relation[relation.name] = count
        total_edges += count

    type_rows: list[str] = []
    for cui in cuis:
        for group in sorted(memberships[cui]):
            type_id = group_types[group][rng.randrange(2)]
            fields = [""] * 6
            fields[0] = cui
            fields[1] = type_id
            type_rows.append("|".join(fields) + "|")

    group_rows = [
        f"{group}|{group} group|{type_id}|{type_id} name"
        for group in groups
        for type_id in group_types[group]
    ]

    (out_dir / "MRCONSO.RRF").write_text("\n".join(concept_rows) + "\n", encoding="utf-8")
    (out_dir / "MRREL.RRF").write_text("\n".join(edge_rows) + "\n", encoding="utf-8")
    (out_dir / "MRSTY.RRF").write_text("\n".join(type_rows) + "\n", encoding="utf-8")
    (out_dir / "SemGroups.txt").write_text("\n".join(group_rows) + "\n", encoding="utf-8")

    per_group_concepts = {g: 0 for g in groups}
    for group in primary:
        per_group_concepts[group] += 1

    truth = GroundTruth(
        concepts=spec.concept_count,
        terms_per_language=terms_per_language,
        cuis_per_language={lang: spec.concept_count for lang in spec.languages},
        relations_per_language={lang: total_edges for lang in spec.languages},
        per_relation=per_relation,
        per_group_concepts=per_group_concepts,
        per_group_triples=per_group_triples,
        total_edges=total_edges,
        file_rows={
            "concept_file": len(concept_rows),
            "relation_file": len(edge_rows),
            "type_file": len(type_rows),
        },
    )
    with open(out_dir / "ground_truth.json", "w", encoding="utf-8") as handle:
        json.dump(truth.as_dict(), handle, indent=2, sort_keys=True)
    return truth
