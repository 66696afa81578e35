"""The toy training loop: mixed loss, metrics log, trainability summary."""

from __future__ import annotations

import json
import math
import random
from pathlib import Path

import torch

from corpus_harness.config import HarnessConfig
from corpus_harness.data import CorpusDataset
from corpus_harness.model import TinyEncoder, assemble, task_losses


class DivergenceError(RuntimeError):
    pass


def smoothed(values: list[float], window: int) -> tuple[float, float]:
    """(mean of the first window, mean of the last window) of a loss trace."""
    if not values:
        raise ValueError("empty loss trace")
    head = values[: max(1, window)]
    tail = values[-max(1, window):]
    return sum(head) / len(head), sum(tail) / len(tail)


def train_toy(config: HarnessConfig, corpus_dir: str | Path | None = None) -> dict:
    """Run the configured steps over the corpus and report per-task deltas.

    Requires at least two tasks in the corpus. Returns a metrics dict with
    per-task smoothed initial/final losses and their relative reductions;
    the full per-step trace goes to config.log_path when set.
    """
    corpus_dir = Path(corpus_dir or config.corpus_dir)
    dataset = CorpusDataset(
        corpus_dir,
        mlm_probability=config.mlm_probability,
        sequence_length=config.sequence_length,
    )
    if len(dataset.tasks_present) < 2:
        raise ValueError("the corpus must contain at least two tasks")

    torch.manual_seed(config.seed)
    model = TinyEncoder(
        vocab_size=len(dataset.vocab),
        width=config.width,
        depth=config.depth,
        heads=config.heads,
        max_len=dataset.sequence_length,
        lp_classes=len(dataset.manifest.lp_classes),
    )
    model.train()
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    scheduler = None
    if config.triangular_schedule:
        warmup = max(1, config.steps // 10)

        def triangle(step):
            if step < warmup:
                return (step + 1) / warmup
            remaining = max(1, config.steps - warmup)
            return max(0.05, 1.0 - (step - warmup) / remaining)

        scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, triangle)

    rng = random.Random(f"mask:{config.seed}")
    batches = dataset.batches(config.batch_size, rng)
    traces: dict[str, list[float]] = {task: [] for task in dataset.tasks_present}
    log_handle = open(config.log_path, "w", encoding="utf-8") if config.log_path else None
    try:
        for step in range(config.steps):
            batch = next(batches)
            losses = task_losses(model, batch)
            loss = assemble(losses, dataset.manifest.weights)
            if not math.isfinite(loss.item()):
                raise DivergenceError(f"non-finite loss at step {step}: {loss.item()}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            if scheduler is not None:
                scheduler.step()
            entry: dict[str, float | int | None] = {"step": step, "loss": float(loss.item())}
            for task, value in losses.items():
                entry[task] = None if value is None else float(value.item())
                if value is not None and task in traces:
                    traces[task].append(float(value.item()))
            if log_handle:
                log_handle.write(json.dumps(entry) + "\n")
    finally:
        if log_handle:
            log_handle.close()

    metrics: dict[str, object] = {"steps": config.steps, "tasks": {}}
    for task, trace in traces.items():
        initial, final = smoothed(trace, config.smoothing_window)
        metrics["tasks"][task] = {
            "initial": initial,
            "final": final,
            "reduction": 0.0 if initial == 0 else (initial - final) / initial,
        }
    return metrics
