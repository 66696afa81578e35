import json
import random
import subprocess
import sys

import pytest

#: The corpus producer is exercised strictly through its command line.
PRODUCER = [sys.executable, "-m", "kgcorpus.cli"]


def run_producer(*args):
    result = subprocess.run(
        [*PRODUCER, *map(str, args)], capture_output=True, text=True
    )
    assert result.returncode == 0, result.stderr
    return result.stdout


def write_markov_docs(path, n_docs=1000, states=60, seed=9):
    """Free text with learnable bigram structure (each word has two successors)."""
    rng = random.Random(seed)
    pool = [f"word{i}" for i in range(states)]
    with open(path, "w", encoding="utf-8") as handle:
        for i in range(n_docs):
            length = rng.randint(8, 20)
            state = rng.randrange(states)
            words = []
            for _ in range(length):
                words.append(pool[state])
                state = (state * 2 + rng.randrange(2)) % states
            handle.write(json.dumps({"id": f"d{i}", "text": " ".join(words)}) + "\n")


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """A 5,000-record corpus built end-to-end by the producer CLI."""
    tmp = tmp_path_factory.mktemp("harness-corpus")
    run_producer(
        "synth",
        "--out-dir", tmp / "release",
        "--concepts", 80,
        "--seed", 31,
        "--edges-per-relation",
        "PARENT:80,CHILD:40,SYNONYM:30,ALLOWED_QUALIFIER:20,QUALIFIED_BY:20,BROADER:60,NARROWER:12",
    )
    run_producer(
        "ingest", "--release-dir", tmp / "release", "--out", tmp / "graph.bin"
    )
    write_markov_docs(tmp / "docs.jsonl")
    run_producer(
        "build",
        "--graph", tmp / "graph.bin",
        "--out-dir", tmp / "corpus",
        "--tc-size", 2500,
        "--ep-size", 1000,
        "--lp-size", 500,
        "--freetext", tmp / "docs.jsonl",
        "--seed", 77,
    )
    return tmp / "corpus"
