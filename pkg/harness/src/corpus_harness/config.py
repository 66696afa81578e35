"""Harness configuration."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


@dataclass
class HarnessConfig:
    corpus_dir: str = ""
    vocab: str = "whitespace"  # "whitespace" or a pre-trained tokenizer identifier
    width: int = 128
    depth: int = 4
    heads: int = 4
    batch_size: int = 32
    steps: int = 500
    learning_rate: float = 1e-3
    triangular_schedule: bool = False
    mlm_probability: float | None = None  # None -> manifest default
    sequence_length: int | None = None  # None -> manifest default
    seed: int = 0
    smoothing_window: int = 25
    log_path: str | None = None

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "HarnessConfig":
        """Read a flat key-value config file; explicit overrides win."""
        values: dict[str, object] = {}
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            key = key.strip().replace("-", "_")
            value = value.strip()
            if key not in cls.__dataclass_fields__:
                raise ValueError(f"unknown config key {key!r}")
            values[key] = _cast(key, value)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def _cast(key: str, value: str):
    if key in ("corpus_dir", "vocab", "log_path"):
        return value
    if key == "triangular_schedule":
        return value.lower() in ("1", "true", "yes", "on")
    if key in ("learning_rate", "mlm_probability"):
        return float(value)
    return int(value)
