import random

import pytest

from kgcorpus.graph import (
    Concept,
    GraphError,
    KnowledgeGraph,
    RelationType,
    Triple,
)

from conftest import make_concept, small_graph


def test_relation_type_is_a_bijection_onto_codes():
    assert len(RelationType) == 7
    assert sorted(int(r) for r in RelationType) == list(range(7))
    tokens = [r.token for r in RelationType]
    assert len(set(tokens)) == 7
    assert all(tokens)


def test_insert_concept_merges_terms_and_groups():
    kg = KnowledgeGraph()
    kg.insert_concept(make_concept("C0001", ["DISO"], ["term one", "term two"]))
    kg.insert_concept(make_concept("C0001", ["CHEM"], ["term three"]))
    concept = kg.lookup("C0001")
    assert len(concept.terms) == 3
    assert concept.groups == ("CHEM", "DISO")


def test_lookup_unknown_cui_is_absent():
    kg = KnowledgeGraph()
    kg.insert_concept(make_concept("C0001"))
    assert kg.lookup("C9999") is None


def test_groups_are_normalized_lexicographically():
    kg = KnowledgeGraph()
    kg.insert_concept(make_concept("C0001", ["DISO", "CHEM"]))
    assert kg.lookup("C0001").groups == ("CHEM", "DISO")


def test_empty_cui_rejected():
    kg = KnowledgeGraph()
    with pytest.raises(GraphError):
        kg.insert_concept(make_concept(""))


def test_insert_triple_idempotent():
    kg = KnowledgeGraph()
    kg.insert_concept(make_concept("A"))
    kg.insert_concept(make_concept("B"))
    kg.insert_triple(Triple("A", RelationType.PARENT, "B"))
    kg.insert_triple(Triple("A", RelationType.PARENT, "B"))
    assert kg.num_edges() == 1


def test_insert_triple_dangling_endpoint_names_cui():
    kg = KnowledgeGraph()
    kg.insert_concept(make_concept("A"))
    with pytest.raises(GraphError, match="B"):
        kg.insert_triple(Triple("A", RelationType.PARENT, "B"))


def test_contains_discriminates_relation_type():
    kg = KnowledgeGraph()
    kg.insert_concept(make_concept("A"))
    kg.insert_concept(make_concept("B"))
    kg.insert_triple(Triple("A", RelationType.PARENT, "B"))
    assert kg.contains(Triple("A", RelationType.PARENT, "B"))
    assert not kg.contains(Triple("A", RelationType.CHILD, "B"))


def test_contains_agrees_with_exhaustive_scan():
    """Index vs brute-force scan on a 1,000-edge graph, edge x 7 relation probes."""
    rng = random.Random(42)
    kg = KnowledgeGraph()
    cuis = [f"C{i:04d}" for i in range(120)]
    for cui in cuis:
        kg.insert_concept(make_concept(cui))
    edges = set()
    while len(edges) < 1000:
        edge = (
            rng.choice(cuis),
            RelationType(rng.randrange(7)),
            rng.choice(cuis),
        )
        edges.add(edge)
    for head, relation, tail in edges:
        kg.insert_triple(Triple(head, relation, tail))
    kg.freeze()

    def scan(triple):
        return any(e == triple for e in kg.edges)

    probes = 0
    for head, _, tail in list(edges):
        for relation in RelationType:
            probe = Triple(head, relation, tail)
            assert kg.contains(probe) == scan(probe)
            probes += 1
    assert probes == 7000


def test_adjacency_index_partitions_edges():
    kg = small_graph()
    from_adjacency = [t for cui in kg.concepts for t in kg.outgoing(cui)]
    assert sorted(from_adjacency) == sorted(kg.edges)
    assert len(from_adjacency) == kg.num_edges()


def test_group_index_agrees_with_concept_groups():
    kg = small_graph()
    for group in kg.groups():
        for cui in kg.group_members(group):
            assert group in kg.concepts[cui].groups
    for cui, concept in kg.concepts.items():
        for group in concept.groups:
            assert cui in kg.group_members(group)


def test_sample_concept_single_member_group():
    kg = KnowledgeGraph()
    kg.insert_concept(make_concept("A", ["ANAT"]))
    kg.freeze()
    rng = random.Random(0)
    assert all(kg.sample_concept_in_group("ANAT", rng) == "A" for _ in range(50))


def test_sample_concept_uniform_over_four_members():
    kg = KnowledgeGraph()
    for cui in ("A", "B", "C", "D"):
        kg.insert_concept(make_concept(cui, ["DISO"]))
    kg.freeze()
    rng = random.Random(7)
    counts = {}
    draws = 100_000
    for _ in range(draws):
        cui = kg.sample_concept_in_group("DISO", rng)
        assert "DISO" in kg.concepts[cui].groups
        counts[cui] = counts.get(cui, 0) + 1
    for cui in ("A", "B", "C", "D"):
        assert abs(counts[cui] / draws - 0.25) < 0.02


def test_sample_concept_unknown_group_errors():
    kg = small_graph()
    with pytest.raises(GraphError, match="NOPE"):
        kg.sample_concept_in_group("NOPE", random.Random(0))


def test_statistics_empty_graph():
    assert KnowledgeGraph().statistics("ENG") == (0, 0, 0)


def test_statistics_fixed_by_construction():
    """100 concepts, 250 terms, 400 edges, one language."""
    rng = random.Random(5)
    kg = KnowledgeGraph()
    cuis = [f"C{i:03d}" for i in range(100)]
    for i, cui in enumerate(cuis):
        n_terms = 2 if i < 50 else 3  # 50*2 + 50*3 = 250
        kg.insert_concept(make_concept(cui, ["DISO"], [f"{cui} term {j}" for j in range(n_terms)]))
    edges = set()
    while len(edges) < 400:
        edges.add((rng.choice(cuis), RelationType(rng.randrange(7)), rng.choice(cuis)))
    for head, relation, tail in edges:
        kg.insert_triple(Triple(head, relation, tail))
    kg.freeze()
    assert kg.statistics("ENG") == (250, 100, 400)
    assert kg.statistics("FRE") == (0, 0, 0)


def test_statistics_counts_only_language_covered_edges():
    kg = KnowledgeGraph()
    kg.insert_concept(
        Concept("A", [("ENG", "a"), ("FRE", "a fr")], {"ENG": "a", "FRE": "a fr"}, ("DISO",))
    )
    kg.insert_concept(Concept("B", [("ENG", "b")], {"ENG": "b"}, ("DISO",)))
    kg.insert_triple(Triple("A", RelationType.PARENT, "B"))
    kg.freeze()
    assert kg.statistics("ENG") == (2, 2, 1)
    assert kg.statistics("FRE") == (1, 1, 0)


def test_frozen_graph_rejects_inserts():
    kg = small_graph()
    with pytest.raises(GraphError):
        kg.insert_concept(make_concept("C99"))
    with pytest.raises(GraphError):
        kg.insert_triple(Triple("C01", RelationType.PARENT, "C02"))


def test_canonical_group_is_smallest_code():
    kg = small_graph()
    assert kg.canonical_group("C04") == "CHEM"
