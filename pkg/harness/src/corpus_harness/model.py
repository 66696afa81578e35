"""Tiny transformer encoder with the four task heads.

The vocabulary head serves both masked-language modelling and entity
prediction; link prediction gets a dedicated six-way head over hidden
relation positions; triple classification reads the classification-token
representation through a binary head.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from corpus_harness.data import Batch, IGNORE_INDEX


class TinyEncoder(nn.Module):
    def __init__(
        self,
        vocab_size: int,
        width: int = 128,
        depth: int = 4,
        heads: int = 4,
        max_len: int = 256,
        lp_classes: int = 6,
    ):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, width)
        self.position = nn.Embedding(max_len, width)
        # No dropout: the desk-scale harness checks that the corpora are
        # learnable, and memorization is the point.
        layer = nn.TransformerEncoderLayer(
            d_model=width,
            nhead=heads,
            dim_feedforward=4 * width,
            dropout=0.0,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=depth, enable_nested_tensor=False)
        self.norm = nn.LayerNorm(width)
        self.vocab_head = nn.Linear(width, vocab_size)
        self.lp_head = nn.Linear(width, lp_classes)
        self.tc_head = nn.Linear(width, 2)

    def forward(self, input_ids: torch.Tensor, attention_mask: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(input_ids.shape[1], device=input_ids.device)
        hidden = self.embed(input_ids) + self.position(positions)[None, :, :]
        hidden = self.encoder(hidden, src_key_padding_mask=attention_mask == 0)
        return self.norm(hidden)


def task_losses(model: TinyEncoder, batch: Batch) -> dict[str, torch.Tensor | None]:
    """Per-task mean cross-entropy over the batch; absent tasks map to None.

    Only labeled positions contribute (ignore-index contract); a task with
    rows but no labeled positions in this batch also maps to None.
    """
    hidden = model(batch.input_ids, batch.attention_mask)
    losses: dict[str, torch.Tensor | None] = {}
    for task in ("mlm", "ep"):
        rows = batch.rows_for(task)
        losses[task] = None
        if rows:
            logits = model.vocab_head(hidden[rows])
            labels = batch.token_labels[rows]
            if (labels != IGNORE_INDEX).any():
                losses[task] = F.cross_entropy(
                    logits.reshape(-1, logits.shape[-1]),
                    labels.reshape(-1),
                    ignore_index=IGNORE_INDEX,
                )
    rows = batch.rows_for("lp")
    losses["lp"] = None
    if rows:
        logits = model.lp_head(hidden[rows])
        labels = batch.lp_labels[rows]
        if (labels != IGNORE_INDEX).any():
            losses["lp"] = F.cross_entropy(
                logits.reshape(-1, logits.shape[-1]),
                labels.reshape(-1),
                ignore_index=IGNORE_INDEX,
            )
    rows = batch.rows_for("tc")
    losses["tc"] = None
    if rows:
        logits = model.tc_head(hidden[rows][:, 0, :])
        losses["tc"] = F.cross_entropy(logits, batch.tc_labels[rows])
    return losses


def assemble(losses: dict[str, torch.Tensor | float | None], weights: dict[str, float]):
    """Mixed loss: L_MLM + a_ep*L_EP + a_lp*L_LP + a_tc*L_TC (absent terms are 0)."""
    total = None

    def accumulate(total, term):
        return term if total is None else total + term

    for task, loss in losses.items():
        if loss is None:
            continue
        scale = 1.0 if task == "mlm" else weights[f"alpha_{task}"]
        total = accumulate(total, scale * loss)
    if total is None:
        raise ValueError("no task produced a loss; batch is empty")
    return total
