"""Knowledge-graph-to-corpus compiler.

Turns a UMLS-style terminology release plus a free-text corpus into four
mixed-objective pre-training datasets (masked-language modelling, entity
prediction, link prediction, triple classification) with deterministic
sampling and a manifest of task-weighting coefficients.
"""

__version__ = "0.1.0"

from kgcorpus.graph import Concept, KnowledgeGraph, RelationType, Triple

__all__ = ["Concept", "KnowledgeGraph", "RelationType", "Triple", "__version__"]
