"""Desk-scale consumer of mixed-objective pre-training corpora.

Loads a sharded corpus directory by its manifest, tokenizes with
whole-span masking, and trains a tiny four-head transformer encoder under
the mixed loss recorded in the manifest. Talks to the corpus producer
only through its files: no producer code is imported.
"""

__version__ = "0.1.0"
