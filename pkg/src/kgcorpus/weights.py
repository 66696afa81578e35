"""Task-weighting coefficients, batch interleaving and loss assembly.

The mixed loss is L = L_MLM + a_ep*L_EP + a_lp*L_LP + a_tc*L_TC where each
coefficient is inversely proportional to its task's document count:
a_i = (sum of the other tasks' counts) / ((k-1) * sum of all counts) over
the k enabled KG tasks. The coefficients sum to 1, so the free-text
masked-language loss (implicit coefficient 1) carries the same total
weight as the KG-task losses combined. That parity is preserved when
tasks are disabled for ablations.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

KG_TASKS = ("ep", "lp", "tc")


class WeightError(ValueError):
    """Raised on unusable counts or losses."""


@dataclass(frozen=True)
class TaskWeights:
    """Coefficients for the mixed loss plus the counts that derived them."""

    alpha_ep: float
    alpha_lp: float
    alpha_tc: float
    n_ep: int
    n_lp: int
    n_tc: int
    n_mlm: int = 0

    def alpha(self, task: str) -> float:
        return {"ep": self.alpha_ep, "lp": self.alpha_lp, "tc": self.alpha_tc}[task]

    def as_dict(self) -> dict[str, float | int]:
        return {
            "alpha_ep": self.alpha_ep,
            "alpha_lp": self.alpha_lp,
            "alpha_tc": self.alpha_tc,
            "n_ep": self.n_ep,
            "n_lp": self.n_lp,
            "n_tc": self.n_tc,
            "n_mlm": self.n_mlm,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TaskWeights":
        return cls(
            alpha_ep=float(data["alpha_ep"]),
            alpha_lp=float(data["alpha_lp"]),
            alpha_tc=float(data["alpha_tc"]),
            n_ep=int(data["n_ep"]),
            n_lp=int(data["n_lp"]),
            n_tc=int(data["n_tc"]),
            n_mlm=int(data.get("n_mlm", 0)),
        )


def compute_weights_for(counts: dict[str, int], n_mlm: int = 0) -> TaskWeights:
    """Derive coefficients for an arbitrary subset of the KG tasks.

    `counts` maps enabled task names to positive document counts; omitted
    tasks get coefficient 0. A zero count is rejected: drop the task from
    the mapping explicitly instead.
    """
    unknown = set(counts) - set(KG_TASKS)
    if unknown:
        raise WeightError(f"unknown tasks {sorted(unknown)}")
    for task, count in counts.items():
        if count <= 0:
            raise WeightError(
                f"count for task {task!r} must be positive; "
                "drop the task from the mix explicitly to disable it"
            )
    alphas = {task: 0.0 for task in KG_TASKS}
    if counts:
        total = sum(counts.values())
        k = len(counts)
        if k == 1:
            (task,) = counts
            alphas[task] = 1.0
        else:
            for task, count in counts.items():
                alphas[task] = (total - count) / ((k - 1) * total)
    return TaskWeights(
        alpha_ep=alphas["ep"],
        alpha_lp=alphas["lp"],
        alpha_tc=alphas["tc"],
        n_ep=counts.get("ep", 0),
        n_lp=counts.get("lp", 0),
        n_tc=counts.get("tc", 0),
        n_mlm=n_mlm,
    )


def compute_weights(n_ep: int, n_lp: int, n_tc: int, n_mlm: int = 0) -> TaskWeights:
    """Coefficients for the full three-task mix (all counts required positive)."""
    return compute_weights_for({"ep": n_ep, "lp": n_lp, "tc": n_tc}, n_mlm=n_mlm)


def assemble_loss(
    losses: dict[str, float | None], weights: TaskWeights
) -> float:
    """L = L_MLM + a_ep*L_EP + a_lp*L_LP + a_tc*L_TC, absent terms contributing 0.

    `losses` maps task names (mlm/ep/lp/tc) to per-task mean losses; a
    missing key or None marks the task absent from the batch.
    """
    total = 0.0
    for task, loss in losses.items():
        if loss is None:
            continue
        if loss < 0:
            raise WeightError(f"negative loss for task {task!r}")
        if task == "mlm":
            total += loss
        elif task in KG_TASKS:
            total += weights.alpha(task) * loss
        else:
            raise WeightError(f"unknown task {task!r}")
    return total


@dataclass
class InterleavePlan:
    """Epoch-level shuffled ordering of (task, index) record slots."""

    order: list[tuple[str, int]]
    batch_size: int
    seed: int

    def batches(self) -> list[list[tuple[str, int]]]:
        return [
            self.order[i : i + self.batch_size]
            for i in range(0, len(self.order), self.batch_size)
        ]


def plan_interleave(sizes: dict[str, int], batch_size: int, seed: int) -> InterleavePlan:
    """Uniformly shuffle the union of all task record slots into batches.

    Every (task, index) slot appears exactly once per epoch, so expected
    per-batch task mix equals the corpus proportions.
    """
    if batch_size < 1:
        raise WeightError("batch size must be at least 1")
    order = [(task, i) for task in sorted(sizes) for i in range(sizes[task])]
    random.Random(seed).shuffle(order)
    return InterleavePlan(order=order, batch_size=batch_size, seed=seed)
