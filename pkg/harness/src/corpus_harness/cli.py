"""Command-line entry point for the toy trainer."""

from __future__ import annotations

import argparse
import json
import sys

from corpus_harness.config import HarnessConfig
from corpus_harness.train import train_toy


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="corpus-harness", description=__doc__)
    parser.add_argument("--config", help="flat key-value config file")
    parser.add_argument("--corpus-dir")
    parser.add_argument("--steps", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--learning-rate", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--log-path")
    parser.add_argument("--triangular-schedule", action="store_true", default=None)
    args = parser.parse_args(argv)

    overrides = {
        "corpus_dir": args.corpus_dir,
        "steps": args.steps,
        "batch_size": args.batch_size,
        "learning_rate": args.learning_rate,
        "seed": args.seed,
        "log_path": args.log_path,
        "triangular_schedule": args.triangular_schedule,
    }
    if args.config:
        config = HarnessConfig.from_file(args.config, **overrides)
    else:
        config = HarnessConfig(**{k: v for k, v in overrides.items() if v is not None})
    if not config.corpus_dir:
        parser.error("--corpus-dir is required (flag or config file)")
    metrics = train_toy(config)
    json.dump(metrics, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
