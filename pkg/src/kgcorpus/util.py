"""Shared helpers: stable hashing, seeded streams, integer apportionment."""

from __future__ import annotations

import gzip
import hashlib
import io
from collections.abc import Iterator
from pathlib import Path


def stable_seed(*parts: object) -> int:
    """Derive a 64-bit seed from arbitrary parts, stable across processes.

    Python's built-in hash() is salted per process, so shard seeds and
    record ids go through sha256 instead.
    """
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def content_id(*parts: object) -> str:
    """Content-derived record id: hex digest of the joined parts."""
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).hexdigest()
    return digest[:16]


def largest_remainder(total: int, weights: dict[str, float]) -> dict[str, int]:
    """Apportion `total` into integer counts proportional to `weights`.

    Uses the largest-remainder method; ties broken by lexicographic key so
    the result is deterministic. Keys with zero weight get zero. Counts sum
    to exactly `total`.
    """
    if total < 0:
        raise ValueError("total must be non-negative")
    weight_sum = sum(weights.values())
    if total > 0 and weight_sum <= 0:
        raise ValueError("weights must have a positive sum")
    keys = sorted(weights)
    if total == 0 or not keys:
        return {k: 0 for k in keys}
    quotas = {k: total * weights[k] / weight_sum for k in keys}
    counts = {k: int(quotas[k]) for k in keys}
    leftover = total - sum(counts.values())
    by_remainder = sorted(keys, key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in by_remainder[:leftover]:
        counts[k] += 1
    return counts


def split_evenly(total: int, parts: int) -> list[int]:
    """Split an integer into `parts` near-equal counts (earlier parts larger)."""
    if parts <= 0:
        raise ValueError("parts must be positive")
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def open_text(path: str | Path) -> io.TextIOBase:
    """Open a UTF-8 text file for reading, transparently decompressing .gz."""
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def iter_lines(path: str | Path) -> Iterator[str]:
    """Stream lines from a (possibly gzipped) text file without slurping it."""
    with open_text(path) as handle:
        yield from handle


def sha256_file(path: str | Path) -> str:
    hasher = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            hasher.update(block)
    return hasher.hexdigest()
