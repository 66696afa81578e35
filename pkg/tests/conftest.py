import pytest

from kgcorpus.graph import Concept, KnowledgeGraph, RelationType, Triple
from kgcorpus.ingest import IngestConfig, ingest_release
from kgcorpus.synth import SyntheticKgSpec, generate_synthetic_kg


def make_concept(cui, groups=("DISO",), terms=None, language="ENG"):
    terms = terms if terms is not None else [f"{cui.lower()} term"]
    return Concept(
        cui=cui,
        terms=[(language, t) for t in terms],
        preferred_term={language: terms[0]},
        groups=tuple(sorted(groups)),
    )


def small_graph():
    """Four concepts over two groups with a mix of relation types."""
    kg = KnowledgeGraph()
    kg.insert_concept(make_concept("C01", ["DISO"], ["atrial fibrillation", "AFib", "A-fib"]))
    kg.insert_concept(make_concept("C02", ["DISO"], ["heart disease"]))
    kg.insert_concept(make_concept("C03", ["CHEM"], ["aspirin"]))
    kg.insert_concept(make_concept("C04", ["CHEM", "DISO"], ["warfarin toxicity"]))
    kg.insert_triple(Triple("C01", RelationType.PARENT, "C02"))
    kg.insert_triple(Triple("C02", RelationType.CHILD, "C01"))
    kg.insert_triple(Triple("C01", RelationType.SYNONYM, "C01"))
    kg.insert_triple(Triple("C03", RelationType.BROADER, "C04"))
    kg.insert_triple(Triple("C04", RelationType.NARROWER, "C03"))
    return kg.freeze()


def build_synthetic(tmp_dir, concepts=400, edges=200, seed=13, languages=("ENG",), **kwargs):
    spec = SyntheticKgSpec(
        concept_count=concepts,
        edges_per_relation={r: edges for r in RelationType},
        languages=tuple(languages),
        seed=seed,
        **kwargs,
    )
    truth = generate_synthetic_kg(spec, tmp_dir)
    kg, report = ingest_release(
        tmp_dir / "MRCONSO.RRF",
        tmp_dir / "MRREL.RRF",
        tmp_dir / "MRSTY.RRF",
        tmp_dir / "SemGroups.txt",
        IngestConfig(),
    )
    return kg, truth, report, spec


@pytest.fixture(scope="session")
def synth(tmp_path_factory):
    """A mid-sized synthetic graph shared by sampler and pipeline tests."""
    tmp = tmp_path_factory.mktemp("synth-kg")
    kg, truth, report, spec = build_synthetic(tmp, concepts=400, edges=200, seed=13)
    return kg, truth


@pytest.fixture(scope="session")
def edge_oracle(synth):
    """Independent membership oracle: a frozenset over raw edge tuples."""
    kg, _ = synth
    return frozenset((t.head, int(t.relation), t.tail) for t in kg.edges)
